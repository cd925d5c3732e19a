//! Randomised invariants, each checked against an independent oracle.

mod common;

use chclin::ast::{normalize_program, parse_program, print_program, rat, Constraint, LinExpr, PrintStyle, Program, Query, Rat, Rel, Var};
use chclin::dimension::{kdim, map_trace, tree_dimension, TraceTree};
use chclin::driver::tree_conjunction;
use chclin::linarith::{negate_atomic, ConstraintSet};
use chclin::linear_solver::path_conjunction;
use chclin::linearise::{back_map, index_bound, linearise_pe, LinearProgram, Strategy as Order};
use chclin::oracle::{derivable, enumerate_feasible_traces, EnumBudget};
use chclin::polyhedra::{arg_dims, Polyhedron};
use num_traits::{Signed, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

const NAMES: [&str; 4] = ["A", "B", "C", "D"];

fn v(i: usize) -> Var {
    Var::named(NAMES[i])
}

fn constraint(nvars: usize) -> impl Strategy<Value = Constraint> {
    (prop::collection::vec(-3i64..=3, nvars), -4i64..=4, 0..3usize).prop_map(move |(ks, c, r)| {
        let expr = LinExpr::from_terms(ks.iter().enumerate().map(|(i, &k)| (v(i), rat(k))), rat(c));
        Constraint::new(expr, [Rel::Eq, Rel::Ge, Rel::Gt][r])
    })
}

fn constraint_set(nvars: usize, max: usize) -> impl Strategy<Value = ConstraintSet> {
    prop::collection::vec(constraint(nvars), 0..=max).prop_map(ConstraintSet::new)
}

/// Half-integer grid over the first `nvars` variables.
fn grid(nvars: usize, lo: i64, hi: i64) -> Vec<BTreeMap<Var, Rat>> {
    let axis: Vec<Rat> = (2 * lo..=2 * hi).map(|n| Rat::new(n.into(), 2.into())).collect();
    let mut points = vec![BTreeMap::new()];
    for i in 0..nvars {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |x| {
                    let mut q = p.clone();
                    q.insert(v(i), x.clone());
                    q
                })
            })
            .collect();
    }
    points
}

fn holds(cs: &ConstraintSet, point: &BTreeMap<Var, Rat>) -> bool {
    cs.constraints().iter().all(|c| c.holds_at(point).expect("point covers every variable"))
}

/// Whether some value of `x` extends `point` to a solution of `cs`, by
/// intersecting the bounds each constraint puts on `x`.
fn extends(cs: &ConstraintSet, point: &BTreeMap<Var, Rat>, x: &Var) -> bool {
    // (value, strict)
    let mut lower: Option<(Rat, bool)> = None;
    let mut upper: Option<(Rat, bool)> = None;
    let tighter_lo = |b: &Option<(Rat, bool)>, n: &(Rat, bool)| b.as_ref().is_none_or(|o| n.0 > o.0 || (n.0 == o.0 && n.1));
    let tighter_hi = |b: &Option<(Rat, bool)>, n: &(Rat, bool)| b.as_ref().is_none_or(|o| n.0 < o.0 || (n.0 == o.0 && n.1));
    for c in cs.constraints() {
        let k = c.expr.coeff(x);
        let mut rest = c.expr.constant_term().clone();
        for (w, a) in c.expr.coeffs() {
            if w != x {
                rest += a * &point[w];
            }
        }
        if k.is_zero() {
            let ok = match c.rel {
                Rel::Eq => rest.is_zero(),
                Rel::Ge => !rest.is_negative(),
                Rel::Gt => rest.is_positive(),
            };
            if !ok {
                return false;
            }
            continue;
        }
        // k x + rest rel 0, so x rel' -rest/k
        let b = -rest / &k;
        let strict = c.rel == Rel::Gt;
        let mut set_lo = |n: (Rat, bool)| {
            if tighter_lo(&lower, &n) {
                lower = Some(n)
            }
        };
        match c.rel {
            Rel::Eq => set_lo((b.clone(), false)),
            _ if k.is_positive() => set_lo((b.clone(), strict)),
            _ => {}
        }
        let mut set_hi = |n: (Rat, bool)| {
            if tighter_hi(&upper, &n) {
                upper = Some(n)
            }
        };
        match c.rel {
            Rel::Eq => set_hi((b, false)),
            _ if k.is_negative() => set_hi((b, strict)),
            _ => {}
        }
    }
    match (lower, upper) {
        (Some((l, ls)), Some((u, us))) => l < u || (l == u && !ls && !us),
        _ => true,
    }
}

fn polyhedron(n: usize) -> impl Strategy<Value = Polyhedron> {
    constraint_set(n, 3).prop_map(move |cs| {
        Polyhedron::new(arg_dims(n), cs.rename(&|x| arg_dims(n)[NAMES.iter().position(|s| Var::named(s) == *x).unwrap()].clone())).unwrap()
    })
}

fn on_grid(p: &Polyhedron, lo: i64, hi: i64) -> Vec<Vec<Rat>> {
    grid(p.arity(), lo, hi).into_iter().map(|m| m.into_values().collect::<Vec<_>>()).filter(|pt| p.contains(pt)).collect()
}

/// Number of independent equalities and of inequalities after minimisation.
fn shape(p: &Polyhedron) -> (usize, usize) {
    let m = p.constraints().minimize();
    let eqs = m.constraints().iter().filter(|c| c.rel == Rel::Eq).count();
    (eqs, m.len() - eqs)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn satisfiable_agrees_with_sampling(cs in constraint_set(3, 5)) {
        let witnessed = grid(3, -3, 3).iter().any(|p| holds(&cs, p));
        if witnessed {
            prop_assert!(cs.satisfiable());
        }
    }

    #[test]
    fn elimination_matches_one_variable_extension(cs in constraint_set(3, 5)) {
        let c = v(2);
        let projected = cs.eliminate_vars(&BTreeSet::from([c.clone()]));
        prop_assert!(!projected.vars().contains(&c));
        for point in grid(2, -3, 3) {
            prop_assert_eq!(holds(&projected, &point), extends(&cs, &point, &c), "at {:?}", point);
        }
    }

    #[test]
    fn entailment_refutes_every_negation(cs in constraint_set(3, 4), a in constraint(3)) {
        if cs.entails(&a) {
            for d in negate_atomic(&a) {
                prop_assert!(!cs.with(d).satisfiable());
            }
            let sat_a = ConstraintSet::new([a.clone()]);
            for p in grid(3, -2, 2) {
                prop_assert!(!holds(&cs, &p) || holds(&sat_a, &p));
            }
        }
    }

    #[test]
    fn hull_contains_both_arguments(p in polyhedron(2), q in polyhedron(2)) {
        let h = p.convex_hull(&q).unwrap();
        prop_assert!(h.includes(&p).unwrap());
        prop_assert!(h.includes(&q).unwrap());
        // and midpoints between them
        let (ps, qs) = (on_grid(&p, -2, 2), on_grid(&q, -2, 2));
        for (x, y) in ps.iter().zip(qs.iter()).take(20) {
            let mid: Vec<Rat> = x.iter().zip(y).map(|(a, b)| (a + b) / rat(2)).collect();
            prop_assert!(h.contains(&mid));
        }
    }

    #[test]
    fn widening_chains_converge(seed in any::<u64>(), n in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = arg_dims(n);
        let point = |rng: &mut ChaCha8Rng| {
            let cs = dims.iter().map(|d| Constraint::eq(LinExpr::var(d.clone()), LinExpr::constant(rat(rng.gen_range(-9..=9)))));
            Polyhedron::new(dims.clone(), ConstraintSet::new(cs)).unwrap()
        };
        let mut w = point(&mut rng);
        for _ in 0..30 {
            let x = point(&mut rng);
            let next = w.widen(&w.convex_hull(&x).unwrap()).unwrap();
            prop_assert!(next.includes(&w).unwrap() && next.includes(&x).unwrap());
            let (before, after) = (shape(&w), shape(&next));
            // either the affine dimension grows, or it stays and the inequalities only go away
            if after.0 == before.0 {
                prop_assert!(after.1 <= before.1, "{:?} -> {:?}", before, after);
                prop_assert!(after.1 < before.1 || next.same_set(&w).unwrap());
            } else {
                prop_assert!(after.0 < before.0);
            }
            w = next;
        }
    }

    #[test]
    fn union_inclusion_agrees_with_sampling(q in polyhedron(2), ps in prop::collection::vec(polyhedron(2), 0..3)) {
        match q.union_gap(&ps).unwrap() {
            None => {
                for pt in on_grid(&q, -3, 3) {
                    prop_assert!(ps.iter().any(|p| p.contains(&pt)), "{:?} uncovered", pt);
                }
            }
            Some(gap) => {
                prop_assert!(gap.satisfiable());
                let g = Polyhedron::new(arg_dims(2), gap).unwrap();
                prop_assert!(q.includes(&g).unwrap());
                for p in &ps {
                    prop_assert!(g.meet(p).unwrap().is_empty(), "gap meets a member");
                }
            }
        }
    }

    #[test]
    fn projection_commutes_with_disjoint_meet(p in polyhedron(3), q in constraint_set(2, 2)) {
        let dims = arg_dims(3);
        let keep = &dims[..2];
        let qn = q.rename(&|x| dims[NAMES.iter().position(|s| Var::named(s) == *x).unwrap()].clone());
        let qp = Polyhedron::new(dims.clone(), qn.clone()).unwrap();
        let lhs = p.meet(&qp).unwrap().project(keep).unwrap();
        let rhs = p.project(keep).unwrap().meet(&Polyhedron::new(keep.to_vec(), qn).unwrap()).unwrap();
        prop_assert!(lhs.same_set(&rhs).unwrap());
    }
}

fn fuzz(seed: u64) -> Program {
    common::fuzz_program(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// A random connected path from the goal to the unit clause, if one is found.
fn random_path(lp: &LinearProgram, rng: &mut ChaCha8Rng) -> Option<Vec<chclin::ast::ClauseId>> {
    let goal = lp.program.clause(&lp.goal)?;
    let mut path = vec![lp.goal.clone()];
    let mut at = goal.body.first()?.pred.clone();
    for _ in 0..14 {
        let options: Vec<_> = lp.program.clauses_for(&at).collect();
        if options.is_empty() {
            return None;
        }
        let c = options[rng.gen_range(0..options.len())];
        path.push(c.id.clone());
        match c.body.first() {
            None => return Some(path),
            Some(b) => at = b.pred.clone(),
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn print_then_parse_is_alpha_equivalent(seed in any::<u64>()) {
        let p = fuzz(seed);
        let text = print_program(&p, PrintStyle::Exchange);
        let q = parse_program(&text).unwrap();
        prop_assert_eq!(common::alpha_key(&p), common::alpha_key(&q));
    }

    #[test]
    fn normalisation_is_idempotent_and_keeps_verdicts(seed in any::<u64>()) {
        let p = fuzz(seed);
        let n = normalize_program(&p);
        prop_assert_eq!(common::alpha_key(&normalize_program(&n)), common::alpha_key(&n));
        let b = EnumBudget::depth(5).unwrap();
        prop_assert_eq!(derivable(&p, &Query::False, b).unwrap(), derivable(&n, &Query::False, b).unwrap());
    }

    #[test]
    fn kdim_grows_monotonically(seed in any::<u64>(), k in 0u32..=2) {
        let p = fuzz(seed);
        let small: BTreeSet<String> = common::alpha_key(&kdim(&p, k).unwrap().0).into_iter().collect();
        let big: BTreeSet<String> = common::alpha_key(&kdim(&p, k + 1).unwrap().0).into_iter().collect();
        prop_assert!(small.is_subset(&big), "missing {:?}", small.difference(&big).collect::<Vec<_>>());
    }

    #[test]
    fn kdim_traces_correspond(seed in any::<u64>(), k in 0u32..=2) {
        let p = fuzz(seed);
        let (pk, prov) = kdim(&p, k).unwrap();
        let d = 3;
        let original = enumerate_feasible_traces(&p, &Query::False, EnumBudget::depth(d).unwrap()).unwrap();
        // copy clauses at most double the height
        let bounded = enumerate_feasible_traces(&pk, &pk.query, EnumBudget::depth(2 * d + 1).unwrap()).unwrap();
        prop_assume!(original.complete && bounded.complete);
        let mapped: BTreeSet<TraceTree> = bounded.trees.iter().map(|t| map_trace(t, &prov).unwrap()).collect();
        for m in &mapped {
            prop_assert!(tree_conjunction(&p, m).unwrap().0.satisfiable());
            prop_assert!(tree_dimension(m) <= k);
        }
        for t in original.trees.iter().filter(|t| tree_dimension(t) <= k) {
            prop_assert!(mapped.contains(t), "{} has no counterpart", t);
        }
    }

    #[test]
    fn linearisation_is_linear_and_stack_bounded(seed in any::<u64>(), k in 0u32..=2, dim_ordered in any::<bool>()) {
        let p = fuzz(seed);
        let (pk, _) = kdim(&p, k).unwrap();
        let index = index_bound(&p, k);
        let strategy = if dim_ordered { Order::DimOrdered } else { Order::Permute };
        let lp = linearise_pe(&pk, index, strategy).unwrap();
        prop_assert!(lp.program.clauses.iter().all(|c| c.body.len() <= 1));
        prop_assert!(lp.states.values().all(|s| s.0.len() <= index));
    }

    #[test]
    fn back_map_keeps_path_feasibility(seed in any::<u64>(), k in 0u32..=2) {
        let p = fuzz(seed);
        let (pk, _) = kdim(&p, k).unwrap();
        let lp = linearise_pe(&pk, index_bound(&p, k), Order::Permute).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..20 {
            if let Some(path) = random_path(&lp, &mut rng) {
                let t = back_map(&path, &lp).unwrap();
                let linear = path_conjunction(&lp.program, &path).unwrap().satisfiable();
                let tree = tree_conjunction(&pk, &t).unwrap().0.satisfiable();
                prop_assert_eq!(linear, tree, "path {:?}", path);
            }
        }
    }
}

//! Brute-force enumeration of bounded derivations, used to check the solver
//! from the outside. Nothing in the solving loop calls into this module.

use crate::ast::{normalize_program, Clause, ClauseId, Constraint, LinExpr, PredId, Program, Query, Var, VarGen};
use crate::dimension::TraceTree;
use crate::linarith::ConstraintSet;
use crate::linearise::LinearProgram;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// Limits of one enumeration. `max_depth` bounds tree height, `max_nodes`
/// the number of clause applications tried, `max_trees` the number of trees
/// returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumBudget {
    pub max_depth: usize,
    pub max_nodes: usize,
    pub max_trees: usize,
}

impl EnumBudget {
    pub fn new(max_depth: usize, max_nodes: usize, max_trees: usize) -> Result<Self> {
        if max_depth == 0 || max_nodes == 0 || max_trees == 0 {
            return Err(Error::Internal("enumeration bounds must be positive".into()));
        }
        Ok(EnumBudget { max_depth, max_nodes, max_trees })
    }

    /// Height bound `d` with 50 000 nodes and 10 000 trees.
    pub fn depth(d: usize) -> Result<Self> {
        Self::new(d, 50_000, 10_000)
    }
}

/// Feasible trees found, and whether the search covered the whole budget
/// without hitting a node or tree limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub trees: Vec<TraceTree>,
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivability {
    Yes,
    NoWithinBudget,
    BudgetExhausted,
}

impl Derivability {
    fn from_search(found: bool, complete: bool) -> Self {
        match (found, complete) {
            (true, _) => Derivability::Yes,
            (false, true) => Derivability::NoWithinBudget,
            (false, false) => Derivability::BudgetExhausted,
        }
    }
}

/// An open position of a partial tree: the predicate to derive (`None` for
/// `false`), its argument variables, and how many more levels may hang below
/// and including it.
#[derive(Debug, Clone)]
struct Hole {
    pred: Option<PredId>,
    vars: Vec<Var>,
    levels: usize,
}

struct TreeSearch<'a> {
    defs: BTreeMap<Option<PredId>, Vec<&'a Clause>>,
    budget: EnumBudget,
    gen: VarGen,
    nodes: usize,
    complete: bool,
    trees: Vec<TraceTree>,
}

fn link<'a>(xs: &'a [Var], ys: &'a [Var]) -> impl Iterator<Item = Constraint> + 'a {
    xs.iter().zip(ys).map(|(x, y)| Constraint::eq(LinExpr::var(x.clone()), LinExpr::var(y.clone())))
}

fn hole_vars(holes: &[Hole]) -> BTreeSet<Var> {
    holes.iter().flat_map(|h| h.vars.iter().cloned()).collect()
}

/// Keeps only the variables of open holes; `None` if the result is empty.
fn project_live(cs: ConstraintSet, holes: &[Hole]) -> Option<ConstraintSet> {
    let keep = hole_vars(holes);
    let drop: BTreeSet<Var> = cs.vars().into_iter().filter(|v| !keep.contains(v)).collect();
    let out = cs.eliminate_vars(&drop);
    if out.is_trivially_false() || !out.satisfiable() {
        None
    } else {
        Some(out)
    }
}

fn build_preorder(seq: &[(ClauseId, usize)], i: &mut usize) -> TraceTree {
    let (id, n) = seq[*i].clone();
    *i += 1;
    let children = (0..n).map(|_| build_preorder(seq, i)).collect();
    TraceTree::new(id, children)
}

impl TreeSearch<'_> {
    /// Returns false once a limit stops the search.
    fn go(&mut self, holes: Vec<Hole>, cs: ConstraintSet, seq: &mut Vec<(ClauseId, usize)>) -> bool {
        let Some((hole, rest)) = holes.split_first() else {
            self.trees.push(build_preorder(seq, &mut 0));
            if self.trees.len() >= self.budget.max_trees {
                self.complete = false;
                return false;
            }
            return true;
        };
        let candidates = self.defs.get(&hole.pred).cloned().unwrap_or_default();
        for c in candidates {
            if !c.body.is_empty() && hole.levels < 2 {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget.max_nodes {
                self.complete = false;
                return false;
            }
            let r = c.rename_apart(&mut self.gen);
            let head_vars = r.head.atom().and_then(|a| a.arg_vars()).unwrap_or_default();
            let mut next = cs.conjoin(&ConstraintSet::new(r.constraints.iter().cloned().chain(link(&hole.vars, &head_vars))));
            let mut new_holes: Vec<Hole> = r
                .body
                .iter()
                .map(|b| Hole { pred: Some(b.pred.clone()), vars: b.arg_vars().expect("normalised clause"), levels: hole.levels - 1 })
                .collect();
            new_holes.extend(rest.iter().cloned());
            next = match project_live(next, &new_holes) {
                Some(n) => n,
                None => continue,
            };
            seq.push((c.id.clone(), r.body.len()));
            let go_on = self.go(new_holes, next, seq);
            seq.pop();
            if !go_on {
                return false;
            }
        }
        true
    }
}

/// Every trace tree for `target` of height at most `b.max_depth` whose
/// constraints are satisfiable, in lexicographic order of the pre-order
/// clause-id sequence.
pub fn enumerate_feasible_traces(p: &Program, target: &Query, b: EnumBudget) -> Result<Enumeration> {
    let prog = normalize_program(p);
    let arities = prog.arities()?;
    let mut defs: BTreeMap<Option<PredId>, Vec<&Clause>> = BTreeMap::new();
    for c in &prog.clauses {
        defs.entry(c.head_pred().cloned()).or_default().push(c);
    }
    for cs in defs.values_mut() {
        cs.sort_by(|a, b| a.id.as_str().cmp(b.id.as_str()));
    }
    let mut gen = VarGen::new();
    let root = match target {
        Query::False => Hole { pred: None, vars: Vec::new(), levels: b.max_depth },
        Query::Pred(q) => {
            let n = arities.get(q).copied().unwrap_or(0);
            Hole { pred: Some(q.clone()), vars: gen.fresh_n(n), levels: b.max_depth }
        }
    };
    let mut search = TreeSearch { defs, budget: b, gen, nodes: 0, complete: true, trees: Vec::new() };
    search.go(vec![root], ConstraintSet::top(), &mut Vec::new());
    Ok(Enumeration { trees: search.trees, complete: search.complete })
}

pub fn derivable(p: &Program, target: &Query, b: EnumBudget) -> Result<Derivability> {
    let e = enumerate_feasible_traces(p, target, EnumBudget { max_trees: 1, ..b })?;
    Ok(Derivability::from_search(!e.trees.is_empty(), e.complete))
}

/// Feasible derivations `goal, t_i, ..., unit` of a linearised program whose
/// back-mapped trees have height at most `b.max_depth`. The height of each
/// pending goal is tracked through the step records, so the bound means the
/// same as for [`enumerate_feasible_traces`] on the bounded program.
/// Subproblems that were searched completely without success are remembered
/// and skipped when they recur, which keeps the search exhaustive.
pub fn enumerate_linear_paths(lp: &LinearProgram, b: EnumBudget) -> Result<(Vec<Vec<ClauseId>>, bool)> {
    let prog = &lp.program;
    let arities = prog.arities()?;
    let goal = prog.clause(&lp.goal).ok_or_else(|| Error::UnknownClause(lp.goal.to_string()))?;
    let Some(start) = goal.body.first() else {
        return Ok((Vec::new(), true));
    };
    let mut defs: BTreeMap<PredId, Vec<&Clause>> = BTreeMap::new();
    for c in &prog.clauses {
        if let Some(h) = c.head_pred() {
            defs.entry(h.clone()).or_default().push(c);
        }
    }
    for cs in defs.values_mut() {
        cs.sort_by(|a, b| a.id.as_str().cmp(b.id.as_str()));
    }

    struct PathSearch<'a> {
        lp: &'a LinearProgram,
        defs: BTreeMap<PredId, Vec<&'a Clause>>,
        budget: EnumBudget,
        gen: VarGen,
        nodes: usize,
        complete: bool,
        paths: Vec<Vec<ClauseId>>,
        // subproblems already searched to the end without finding a path
        dead: BTreeSet<String>,
    }

    impl PathSearch<'_> {
        /// `pred` with its pending heights and constraints, up to renaming of `vars`.
        fn key(pred: &PredId, vars: &[Var], depths: &[usize], cs: &ConstraintSet) -> String {
            let names: BTreeMap<&Var, Var> = vars.iter().enumerate().map(|(i, v)| (v, Var::named(&format!("K{i}")))).collect();
            let mut lines: Vec<String> = cs
                .minimize()
                .rename(&|v| names.get(v).cloned().unwrap_or_else(|| v.clone()))
                .constraints()
                .iter()
                .map(|c| c.to_string())
                .collect();
            lines.sort();
            format!("{pred}/{depths:?}/{}", lines.join(","))
        }

        fn go(&mut self, pred: &PredId, vars: Vec<Var>, depths: Vec<usize>, cs: ConstraintSet, path: &mut Vec<ClauseId>) -> bool {
            let key = Self::key(pred, &vars, &depths, &cs);
            if self.dead.contains(&key) {
                return true;
            }
            let found_before = self.paths.len();
            let go_on = self.expand(pred, vars, depths, cs, path);
            if go_on && self.paths.len() == found_before {
                self.dead.insert(key);
            }
            go_on
        }

        fn expand(&mut self, pred: &PredId, vars: Vec<Var>, depths: Vec<usize>, cs: ConstraintSet, path: &mut Vec<ClauseId>) -> bool {
            let candidates = self.defs.get(pred).cloned().unwrap_or_default();
            for c in candidates {
                let next_depths = if c.id == self.lp.unit {
                    if !depths.is_empty() {
                        continue;
                    }
                    Vec::new()
                } else {
                    let Some(step) = self.lp.steps.get(&c.id) else { continue };
                    let Some((&h, rest)) = depths.split_first() else { continue };
                    let mut pushed: Vec<usize> =
                        step.perm.iter().map(|&i| if step.unfolded[i].is_some() { h + 2 } else { h + 1 }).collect();
                    if pushed.iter().any(|&d| d > self.budget.max_depth) {
                        continue;
                    }
                    pushed.extend_from_slice(rest);
                    pushed
                };
                self.nodes += 1;
                if self.nodes > self.budget.max_nodes {
                    self.complete = false;
                    return false;
                }
                let r = c.rename_apart(&mut self.gen);
                let head_vars = r.head.atom().and_then(|a| a.arg_vars()).unwrap_or_default();
                let next = cs.conjoin(&ConstraintSet::new(r.constraints.iter().cloned().chain(link(&vars, &head_vars))));
                path.push(c.id.clone());
                let go_on = match r.body.first() {
                    None => {
                        if next.satisfiable() {
                            let mut full = vec![self.lp.goal.clone()];
                            full.extend(path.iter().cloned());
                            self.paths.push(full);
                            if self.paths.len() >= self.budget.max_trees {
                                self.complete = false;
                                false
                            } else {
                                true
                            }
                        } else {
                            true
                        }
                    }
                    Some(b) => {
                        let bvars = b.arg_vars().expect("normalised clause");
                        let keep: BTreeSet<Var> = bvars.iter().cloned().collect();
                        let drop: BTreeSet<Var> = next.vars().into_iter().filter(|v| !keep.contains(v)).collect();
                        let projected = next.eliminate_vars(&drop);
                        if projected.is_trivially_false() || !projected.satisfiable() {
                            true
                        } else {
                            self.go(&b.pred, bvars, next_depths, projected, path)
                        }
                    }
                };
                path.pop();
                if !go_on {
                    return false;
                }
            }
            true
        }
    }

    let mut gen = VarGen::new();
    let vars = gen.fresh_n(arities.get(&start.pred).copied().unwrap_or(0));
    let mut search = PathSearch { lp, defs, budget: b, gen, nodes: 0, complete: true, paths: Vec::new(), dead: BTreeSet::new() };
    let start_depths = lp.state_of(&start.pred).map(|s| vec![1; s.0.len()]).unwrap_or_default();
    let start_cs = ConstraintSet::new(link(&start.arg_vars().expect("normalised clause"), &vars).collect::<Vec<_>>());
    search.go(&start.pred, vars, start_depths, start_cs, &mut Vec::new());
    Ok((search.paths, search.complete))
}

/// Whether the goal of a linearised program is derivable within the height
/// bound of [`enumerate_linear_paths`].
pub fn linear_goal_derivable(lp: &LinearProgram, b: EnumBudget) -> Result<Derivability> {
    let (paths, complete) = enumerate_linear_paths(lp, EnumBudget { max_trees: 1, ..b })?;
    Ok(Derivability::from_search(!paths.is_empty(), complete))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_program;
    use crate::dimension::{kdim, map_trace, tree_dimension};
    use crate::driver::confirm_cex;
    use crate::linearise::{back_map, index_bound, linearise_pe, Strategy};

    const FIB: &str = "
        fib(A, B):- A>=0, A=<1, B=A.
        fib(A, B) :- A > 1, A2 = A - 2, fib(A2, B2), A1 = A - 1, fib(A1, B1), B = B1 + B2.
        false:- A>5, fib(A,B), B<A.
    ";

    fn fib() -> Program {
        parse_program(FIB).unwrap()
    }

    fn fib_target() -> Query {
        Query::Pred(PredId::new("fib"))
    }

    #[test]
    fn fib_depth_one_is_the_base_case() {
        let e = enumerate_feasible_traces(&fib(), &fib_target(), EnumBudget::depth(1).unwrap()).unwrap();
        assert!(e.complete);
        let shown: Vec<String> = e.trees.iter().map(|t| t.to_string()).collect();
        assert_eq!(shown, ["c1"]);
    }

    #[test]
    fn fib_depth_two_has_the_first_recursive_step() {
        let e = enumerate_feasible_traces(&fib(), &fib_target(), EnumBudget::depth(2).unwrap()).unwrap();
        let shown: Vec<String> = e.trees.iter().map(|t| t.to_string()).collect();
        assert_eq!(shown, ["c1", "c2(c1,c1)"]);
        // fib(2) = 1: A=2 gives A2=0, A1=1
        let (cs, _) = crate::driver::tree_conjunction(&fib(), &e.trees[1]).unwrap();
        assert!(cs.satisfiable());
    }

    #[test]
    fn fib_has_no_small_counterexample() {
        let b = EnumBudget::depth(6).unwrap();
        let e = enumerate_feasible_traces(&fib(), &Query::False, b).unwrap();
        assert!(e.complete && e.trees.is_empty());
        assert_eq!(derivable(&fib(), &Query::False, b).unwrap(), Derivability::NoWithinBudget);
    }

    #[test]
    fn trivial_counterexample() {
        let p = parse_program("false :- X=0.").unwrap();
        assert_eq!(derivable(&p, &Query::False, EnumBudget::depth(1).unwrap()).unwrap(), Derivability::Yes);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let p = parse_program("p(X) :- X=0. p(X) :- p(Y), X=Y+1. false :- p(X), X<0.").unwrap();
        let b = EnumBudget::new(50, 10, 5).unwrap();
        assert_eq!(derivable(&p, &Query::False, b).unwrap(), Derivability::BudgetExhausted);
        assert!(EnumBudget::new(0, 1, 1).is_err());
    }

    #[test]
    fn bounded_fib_agrees_with_its_linearisation() {
        let b = EnumBudget::depth(8).unwrap();
        let (k1, _) = kdim(&fib(), 1).unwrap();
        assert_eq!(derivable(&k1, &k1.query, b).unwrap(), Derivability::NoWithinBudget);
        let lp = linearise_pe(&k1, index_bound(&fib(), 1), Strategy::Permute).unwrap();
        assert_eq!(linear_goal_derivable(&lp, b).unwrap(), Derivability::NoWithinBudget);
    }

    #[test]
    fn linear_paths_map_back_to_bounded_traces() {
        let bug = parse_program(&FIB.replace("A>5", "A>=4")).unwrap();
        let (k2, prov) = kdim(&bug, 2).unwrap();
        let lp = linearise_pe(&k2, index_bound(&bug, 2), Strategy::Permute).unwrap();
        let b = EnumBudget::new(8, 50_000, 3).unwrap();
        let (paths, _) = enumerate_linear_paths(&lp, b).unwrap();
        assert!(!paths.is_empty());
        for path in paths {
            let t = back_map(&path, &lp).unwrap();
            assert!(t.height() <= 8);
            assert!(confirm_cex(&k2, &t).unwrap());
            let w = map_trace(&t, &prov).unwrap();
            assert!(tree_dimension(&w) <= 2);
            assert!(confirm_cex(&bug, &w).unwrap());
        }
    }

    #[test]
    fn deterministic() {
        let b = EnumBudget::depth(4).unwrap();
        let a = enumerate_feasible_traces(&fib(), &fib_target(), b).unwrap();
        assert_eq!(a, enumerate_feasible_traces(&fib(), &fib_target(), b).unwrap());
    }
}

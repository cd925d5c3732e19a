//! Linearisation by specialising a bounded goal-stack interpreter.
//!
//! The interpreter keeps a stack of pending atoms. Resolving the top atom
//! with a clause replaces it by the clause body in some order; a step is only
//! allowed while the stack stays within the index bound. Specialising the
//! interpreter to a fixed program yields one predicate per reachable stack
//! shape and one linear clause per resolution step.

use crate::ast::{
    max_body_atoms, normalize_program, Annotation, Atom, Clause, ClauseId, Head, LinExpr, PredId, Program, ProvKind, Query, Var, VarGen,
};
use crate::dimension::{kdim, Interpretation, ProvenanceMap, TraceTree};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// Which body orders the specialiser explores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Every permutation of every clause body.
    #[default]
    Permute,
    /// Copy clauses unfolded, then the single order by ascending dimension.
    DimOrdered,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "permute" => Ok(Strategy::Permute),
            "dim-ordered" => Ok(Strategy::DimOrdered),
            other => Err(format!("unknown strategy '{other}' (expected permute or dim-ordered)")),
        }
    }
}

/// A stack of pending atoms, top first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoalState(pub Vec<PredId>);

impl fmt::Display for GoalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        write!(f, "[{}]", names.join(","))
    }
}

/// How one generated clause came about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// Clause of the bounded program that was resolved.
    pub origin: ClauseId,
    /// `perm[i]` is the body index of the atom pushed at stack position `i`.
    pub perm: Vec<usize>,
    /// Copy clause unfolded into each body position (in body order).
    pub unfolded: Vec<Option<ClauseId>>,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub program: Program,
    pub states: BTreeMap<PredId, GoalState>,
    pub steps: BTreeMap<ClauseId, Step>,
    pub goal: ClauseId,
    pub unit: ClauseId,
    pub index: usize,
}

pub const GOAL_ID: &str = "goal";
pub const UNIT_ID: &str = "unit";

fn state_pred(i: usize) -> PredId {
    PredId::new(&format!("s{i}"))
}

impl LinearProgram {
    /// `s<i> = [p, q, ...]` lines, in state-number order.
    pub fn state_table(&self) -> String {
        let mut rows: Vec<(usize, String)> =
            self.states.iter().map(|(p, st)| (p.base[1..].parse::<usize>().unwrap_or(usize::MAX), format!("{p} = {st}"))).collect();
        rows.sort();
        rows.into_iter().map(|(_, s)| s + "\n").collect()
    }

    pub fn state_of(&self, p: &PredId) -> Option<&GoalState> {
        self.states.get(p)
    }
}

/// `(i-1)*k+1` for the largest body size `i` of `p`, or 1 when `i <= 1`.
pub fn index_bound(p: &Program, k: u32) -> usize {
    let i = max_body_atoms(p);
    if i <= 1 {
        1
    } else {
        (i - 1) * k as usize + 1
    }
}

/// Replaces the definition of every predicate interpreted by `s` with one fact
/// per disjunct.
pub fn substitute_model(pk: &Program, s: &Interpretation) -> Result<Program> {
    if s.is_empty() {
        return Ok(pk.clone());
    }
    let arities = pk.arities()?;
    let tag = match &pk.query {
        Query::Pred(q) => q.ann.dimension().map(|d| d.to_string()).unwrap_or_default(),
        Query::False => String::new(),
    };
    let mut clauses: Vec<Clause> = pk.clauses.iter().filter(|c| c.head_pred().is_none_or(|h| !s.contains(h))).cloned().collect();
    for (p, ds) in s.iter() {
        let n = arities.get(p).copied().or_else(|| ds.first().map(|d| d.arity())).unwrap_or(0);
        let vars: Vec<Var> = (0..n).map(Var::arg).collect();
        for (i, d) in ds.iter().enumerate() {
            if d.arity() != n {
                return Err(Error::Arity { pred: p.to_string(), expected: n, found: d.arity() });
            }
            let id = ClauseId::new(&format!("m{tag}.{}.{i}", crate::ast::print::pred_name(p, crate::ast::PrintStyle::Exchange)));
            let constraints = d.instantiate(&vars).constraints().to_vec();
            let c = Clause::new(id, Head::Atom(Atom::from_vars(p.clone(), &vars)), constraints, Vec::new())
                .with_provenance(None, ProvKind::ModelFact(p.clone()));
            clauses.push(c);
        }
    }
    Ok(Program { clauses, query: pk.query.clone() })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// One way of resolving a clause: the body after copy-clause unfolding, and
/// the stack order.
struct Variant {
    body: Vec<Atom>,
    unfolded: Vec<Option<ClauseId>>,
    perm: Vec<usize>,
}

fn ann_rank(p: &PredId) -> u32 {
    match p.ann {
        Annotation::None => 0,
        Annotation::Exactly(d) | Annotation::AtMost(d) => d,
    }
}

fn variants(c: &Clause, p: &Program, strategy: Strategy) -> Vec<Variant> {
    match strategy {
        Strategy::Permute => permutations(c.body.len())
            .into_iter()
            .map(|perm| Variant { body: c.body.clone(), unfolded: vec![None; c.body.len()], perm })
            .collect(),
        Strategy::DimOrdered => {
            let mut bodies: Vec<(Vec<Atom>, Vec<Option<ClauseId>>)> = vec![(Vec::new(), Vec::new())];
            for b in &c.body {
                let defs: Vec<&Clause> = p.clauses_for(&b.pred).collect();
                let copy_defined = matches!(b.pred.ann, Annotation::AtMost(_)) && defs.iter().all(|d| d.is_epsilon());
                let options: Vec<(Atom, Option<ClauseId>)> = if copy_defined {
                    defs.iter().map(|d| (Atom::new(d.body[0].pred.clone(), b.args.clone()), Some(d.id.clone()))).collect()
                } else {
                    vec![(b.clone(), None)]
                };
                let mut next = Vec::new();
                for (atoms, ids) in &bodies {
                    for (a, id) in &options {
                        let mut atoms = atoms.clone();
                        let mut ids = ids.clone();
                        atoms.push(a.clone());
                        ids.push(id.clone());
                        next.push((atoms, ids));
                    }
                }
                bodies = next;
            }
            bodies
                .into_iter()
                .map(|(body, unfolded)| {
                    let mut perm: Vec<usize> = (0..body.len()).collect();
                    perm.sort_by_key(|&i| ann_rank(&body[i].pred));
                    Variant { body, unfolded, perm }
                })
                .collect()
        }
    }
}

/// Specialises the bounded interpreter to `p`, starting from its query.
pub fn linearise_pe(p: &Program, index: usize, strategy: Strategy) -> Result<LinearProgram> {
    if index < 1 {
        return Err(Error::BadIndex(index));
    }
    let query = match &p.query {
        Query::Pred(q) => q.clone(),
        Query::False => return Err(Error::UnsupportedQuery),
    };
    let mut arities = p.arities()?;
    arities.entry(query.clone()).or_insert(0);
    let p = normalize_program(p);

    // predicates with at least one derivation, ignoring constraints; a state
    // holding any other predicate can never empty its stack
    let mut productive: BTreeSet<&PredId> = BTreeSet::new();
    loop {
        let before = productive.len();
        for c in &p.clauses {
            if let Some(h) = c.head_pred() {
                if c.body.iter().all(|b| productive.contains(&b.pred)) {
                    productive.insert(h);
                }
            }
        }
        if productive.len() == before {
            break;
        }
    }

    let mut ids: BTreeMap<GoalState, usize> = BTreeMap::new();
    let empty = GoalState(Vec::new());
    let start = GoalState(vec![query.clone()]);
    ids.insert(empty.clone(), 0);
    ids.insert(start.clone(), 1);
    let mut queue = VecDeque::from([start.clone()]);
    // (head state, body state, clause)
    let mut edges: Vec<(usize, usize, Clause, Step)> = Vec::new();
    while let Some(st) = queue.pop_front() {
        let Some((top, rest)) = st.0.split_first() else { continue };
        let here = ids[&st];
        for c in p.clauses_for(top) {
            if c.body.len() + rest.len() > index {
                continue;
            }
            for v in variants(c, &p, strategy) {
                let mut next: Vec<PredId> = v.perm.iter().map(|&i| v.body[i].pred.clone()).collect();
                next.extend(rest.iter().cloned());
                if next.iter().any(|q| !productive.contains(q)) {
                    continue;
                }
                let next = GoalState(next);
                let there = match ids.get(&next) {
                    Some(&i) => i,
                    None => {
                        let i = ids.len();
                        ids.insert(next.clone(), i);
                        queue.push_back(next.clone());
                        i
                    }
                };
                let mut gen = VarGen::new();
                let map: BTreeMap<Var, Var> = c.vars().into_iter().map(|x| (x, gen.fresh())).collect();
                let fresh = |x: &Var| map[x].clone();
                let r = c.rename(&fresh);
                let mut tail: Vec<LinExpr> = Vec::new();
                for q in rest {
                    tail.extend(gen.fresh_n(arities[q]).into_iter().map(LinExpr::var));
                }
                let mut head_args: Vec<LinExpr> = r.head.args().to_vec();
                head_args.extend(tail.iter().cloned());
                let body_atoms: Vec<Atom> = v.body.iter().map(|a| a.rename(&fresh)).collect();
                let mut body_args: Vec<LinExpr> = Vec::new();
                for &i in &v.perm {
                    body_args.extend(body_atoms[i].args.iter().cloned());
                }
                body_args.extend(tail);
                let clause = Clause::new(
                    ClauseId::new(""),
                    Head::Atom(Atom::new(state_pred(here), head_args)),
                    r.constraints.clone(),
                    vec![Atom::new(state_pred(there), body_args)],
                );
                let step = Step { origin: c.id.clone(), perm: v.perm.clone(), unfolded: v.unfolded.clone() };
                edges.push((here, there, clause, step));
            }
        }
    }

    // states from which the empty stack is reachable
    let mut live: BTreeSet<usize> = BTreeSet::from([0]);
    loop {
        let before = live.len();
        for (h, b, _, _) in &edges {
            if live.contains(b) {
                live.insert(*h);
            }
        }
        if live.len() == before {
            break;
        }
    }

    let mut clauses = Vec::new();
    let mut steps = BTreeMap::new();
    clauses.push(Clause::new(ClauseId::new(GOAL_ID), Head::False, Vec::new(), vec![Atom::new(state_pred(1), Vec::new())]));
    let mut states = BTreeMap::new();
    for (st, &i) in &ids {
        if live.contains(&i) || i == 1 {
            states.insert(state_pred(i), st.clone());
        }
    }
    let mut n = 0;
    for (h, b, mut clause, step) in edges {
        if !live.contains(&h) || !live.contains(&b) {
            continue;
        }
        n += 1;
        clause.id = ClauseId::new(&format!("t{n}"));
        steps.insert(clause.id.clone(), step);
        clauses.push(clause);
    }
    clauses.push(Clause::new(ClauseId::new(UNIT_ID), Head::Atom(Atom::new(state_pred(0), Vec::new())), Vec::new(), Vec::new()));
    // the start state takes no arguments, so the goal clause needs none either
    let program = normalize_program(&Program { clauses, query: Query::False });
    Ok(LinearProgram { program, states, steps, goal: ClauseId::new(GOAL_ID), unit: ClauseId::new(UNIT_ID), index })
}

/// The full linearisation for dimension bound `k` with partial model `s`:
/// bounded program, model substitution, index bound of the original program
/// and specialisation.
pub fn linearise(p: &Program, k: u32, s: &Interpretation, strategy: Strategy) -> Result<(LinearProgram, Program, ProvenanceMap)> {
    let (pk, _) = kdim(p, k)?;
    let substituted = substitute_model(&pk, s)?;
    let index = index_bound(p, k);
    let lp = linearise_pe(&substituted, index, strategy)?;
    let prov = ProvenanceMap::from_program(&substituted);
    Ok((lp, substituted, prov))
}

/// Rebuilds the trace tree of the bounded program from a derivation of the
/// linear program, given top-down as `goal, t_i, ..., unit`.
pub fn back_map(path: &[ClauseId], lp: &LinearProgram) -> Result<TraceTree> {
    let clause = |id: &ClauseId| lp.program.clause(id).ok_or_else(|| Error::UnknownClause(id.to_string()));
    match path.first() {
        Some(id) if *id == lp.goal => {}
        _ => return Err(Error::Disconnected("path must start with the goal clause".into())),
    }
    for w in path.windows(2) {
        let (a, b) = (clause(&w[0])?, clause(&w[1])?);
        let want = a.body.first().map(|x| &x.pred);
        if want != b.head_pred() {
            return Err(Error::Disconnected(format!("{} does not continue {}", b.id, a.id)));
        }
    }
    if path.last() != Some(&lp.unit) {
        return Err(Error::Disconnected("path must end with the unit clause".into()));
    }

    struct Node {
        label: ClauseId,
        children: Vec<Option<usize>>,
    }
    let mut nodes: Vec<Node> = Vec::new();
    // a hole is (node index, child slot); the root hole is (usize::MAX, 0)
    let mut stack: Vec<(usize, usize)> = vec![(usize::MAX, 0)];
    let mut root = None;
    for id in &path[1..path.len() - 1] {
        let step = lp.steps.get(id).ok_or_else(|| Error::Internal(format!("no step record for {id}")))?;
        let (parent, slot) = stack.pop().ok_or_else(|| Error::Internal(format!("stack underflow at {id}")))?;
        let me = nodes.len();
        nodes.push(Node { label: step.origin.clone(), children: vec![None; step.unfolded.len()] });
        let mut holes: Vec<(usize, usize)> = Vec::new();
        for (j, u) in step.unfolded.iter().enumerate() {
            match u {
                None => holes.push((me, j)),
                Some(eps) => {
                    let e = nodes.len();
                    nodes.push(Node { label: eps.clone(), children: vec![None] });
                    nodes[me].children[j] = Some(e);
                    holes.push((e, 0));
                }
            }
        }
        for &j in step.perm.iter().rev() {
            stack.push(holes[j]);
        }
        if parent == usize::MAX {
            root = Some(me);
        } else {
            nodes[parent].children[slot] = Some(me);
        }
    }
    if !stack.is_empty() {
        return Err(Error::Internal(format!("{} goals left after replay", stack.len())));
    }
    fn build(nodes: &[Node], i: usize) -> Result<TraceTree> {
        let children = nodes[i]
            .children
            .iter()
            .map(|c| c.ok_or_else(|| Error::Internal("unfilled hole".into())).and_then(|c| build(nodes, c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceTree::new(nodes[i].label.clone(), children))
    }
    build(&nodes, root.ok_or_else(|| Error::Internal("empty path".into()))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::parse_program;

    const FIB: &str = "
        fib(A, B):- A>=0, A=<1, B=A.
        fib(A, B) :- A > 1, A2 = A - 2, fib(A2, B2), A1 = A - 1, fib(A1, B1), B = B1 + B2.
        false:- A>5, fib(A,B), B<A.
    ";

    fn fib() -> Program {
        parse_program(FIB).unwrap()
    }

    #[test]
    fn index_bound_examples() {
        assert_eq!(index_bound(&fib(), 1), 2);
        assert_eq!(index_bound(&fib(), 0), 1);
        let five = parse_program("p(X) :- q(X1), q(X2), q(X3), q(X4), q(X5).").unwrap();
        assert_eq!(index_bound(&five, 2), 9);
        assert_eq!(index_bound(&parse_program("p(X) :- X=0.").unwrap(), 4), 1);
    }

    #[test]
    fn permutations_are_complete() {
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(2), vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn output_is_linear_and_bounded() {
        for k in 0..3 {
            let (pk, _) = kdim(&fib(), k).unwrap();
            for strategy in [Strategy::Permute, Strategy::DimOrdered] {
                let lp = linearise_pe(&pk, index_bound(&fib(), k), strategy).unwrap();
                assert!(lp.program.is_linear());
                assert!(lp.states.values().all(|s| s.0.len() <= lp.index));
            }
        }
    }

    #[test]
    fn empty_program() {
        let p = Program { clauses: Vec::new(), query: Query::Pred(PredId::new("false").at_most(0)) };
        let lp = linearise_pe(&p, 1, Strategy::Permute).unwrap();
        assert_eq!(lp.program.clauses.len(), 2);
        assert!(lp.steps.is_empty());
    }

    #[test]
    fn rejects_zero_index() {
        let (pk, _) = kdim(&fib(), 0).unwrap();
        assert!(matches!(linearise_pe(&pk, 0, Strategy::Permute), Err(Error::BadIndex(0))));
    }

    #[test]
    fn substitution_replaces_definitions() {
        let (pk, _) = kdim(&fib(), 1).unwrap();
        assert_eq!(substitute_model(&pk, &Interpretation::new()).unwrap(), pk);
        let mut s = Interpretation::new();
        let base = crate::polyhedra::parse_polyhedron(2, "A>=0, A=<1, B=A").unwrap();
        s.insert(PredId::new("fib").exactly(0), vec![base.clone()]);
        s.insert(PredId::new("fib").at_most(0), vec![base]);
        s.insert(PredId::new("false").exactly(0), vec![]);
        s.insert(PredId::new("false").at_most(0), vec![]);
        let sub = substitute_model(&pk, &s).unwrap();
        assert_eq!(sub.clauses.iter().filter(|c| c.is_model_fact()).count(), 2);
        assert!(sub.clauses_for(&PredId::new("false").exactly(0)).next().is_none());
        assert!(!sub.is_linear());
        // with every body predicate interpreted, only linear clauses remain
        let mut all = Interpretation::new();
        for c in &pk.clauses {
            for b in &c.body {
                let n = b.arity();
                all.insert(b.pred.clone(), vec![crate::polyhedra::Polyhedron::top(crate::polyhedra::arg_dims(n))]);
            }
        }
        assert!(substitute_model(&pk, &all).unwrap().is_linear());
    }

    #[test]
    fn back_map_single_step() {
        let p = parse_program("false :- X=0.").unwrap();
        let (pk, _) = kdim(&p, 0).unwrap();
        let lp = linearise_pe(&pk, 1, Strategy::Permute).unwrap();
        // goal -> s1 via the copy clause -> false(0) via c1 -> empty
        let ids: Vec<ClauseId> = lp.program.clauses.iter().map(|c| c.id.clone()).collect();
        assert_eq!(ids.len(), 4);
        let path = vec![ClauseId::new("goal"), ClauseId::new("t1"), ClauseId::new("t2"), ClauseId::new("unit")];
        let t = back_map(&path, &lp).unwrap();
        assert_eq!(t.to_string(), "eps.false.le0.eq0(c1@0)");
        let bad = vec![ClauseId::new("goal"), ClauseId::new("t2"), ClauseId::new("unit")];
        assert!(back_map(&bad, &lp).is_err());
    }

    #[test]
    fn back_map_unfolded_copy_clauses() {
        let (pk, _) = kdim(&fib(), 1).unwrap();
        let lp = linearise_pe(&pk, 2, Strategy::DimOrdered).unwrap();
        assert!(lp.steps.values().any(|s| s.unfolded.iter().any(Option::is_some)));
    }
}

//! Solver for linear clause systems: a polyhedral fixpoint, and a backward
//! search for a feasible derivation when the fixpoint cannot exclude the
//! query.

use crate::ast::{normalize_program, Clause, ClauseId, Head, PredId, Program, Query, Var, VarGen};
use crate::dimension::Interpretation;
use crate::linarith::ConstraintSet;
use crate::polyhedra::{arg_dims, Polyhedron};
use crate::{Error, Result};
use petgraph::graph::{DiGraph, NodeIndex};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    /// Exact joins at a widening point before widening starts.
    pub widen_delay: usize,
    /// Descending iterations after the ascending phase of each component.
    pub narrow_steps: usize,
    /// Maximum length of a searched derivation.
    pub depth_bound: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { widen_delay: 1, narrow_steps: 1, depth_bound: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverStatus {
    Safe(Interpretation),
    /// A derivation of the query, top-down.
    Unsafe(Vec<ClauseId>),
    /// A derivation allowed by the abstract model but not feasible, if one
    /// was found.
    Unknown(Vec<ClauseId>),
}

fn check_deadline(deadline: Option<Instant>) -> Result<()> {
    match deadline {
        Some(d) if Instant::now() >= d => Err(Error::Timeout),
        _ => Ok(()),
    }
}

struct Analysis<'a> {
    prog: &'a Program,
    arities: BTreeMap<PredId, usize>,
    values: BTreeMap<PredId, Polyhedron>,
}

impl Analysis<'_> {
    fn value(&self, p: &PredId) -> Polyhedron {
        self.values.get(p).cloned().unwrap_or_else(|| Polyhedron::bottom(arg_dims(self.arities[p])))
    }

    /// Image of one clause under the current values, over the head's positional dimensions.
    fn image(&self, c: &Clause) -> Polyhedron {
        let head_vars = c.head.atom().and_then(|a| a.arg_vars()).unwrap_or_default();
        let mut cs = ConstraintSet::new(c.constraints.clone());
        if let Some(b) = c.body.first() {
            let v = self.value(&b.pred);
            if v.is_empty() {
                return Polyhedron::bottom(arg_dims(head_vars.len()));
            }
            let body_vars = b.arg_vars().expect("normalised clause");
            cs = cs.conjoin(&v.instantiate(&body_vars));
        }
        let img = Polyhedron::from_vars(&head_vars, &cs);
        if img.is_empty() {
            Polyhedron::bottom(arg_dims(head_vars.len()))
        } else {
            img
        }
    }

    fn apply(&self, p: &PredId) -> Result<Polyhedron> {
        let mut acc = Polyhedron::bottom(arg_dims(self.arities[p]));
        for c in self.prog.clauses_for(p) {
            acc = acc.convex_hull(&self.image(c))?;
        }
        Ok(acc)
    }
}

/// Predicate dependency components, sources first, each with its widening
/// points (targets of back edges of a depth-first search inside the
/// component). Acyclic singleton components have no widening points.
/// Members are listed, and searched from, in order of first appearance in
/// the program text, so widening falls on the earliest generated state.
fn components(prog: &Program, preds: &[PredId]) -> Vec<(Vec<PredId>, BTreeSet<PredId>)> {
    let mut g: DiGraph<PredId, ()> = DiGraph::new();
    let idx: BTreeMap<PredId, NodeIndex> = preds.iter().map(|p| (p.clone(), g.add_node(p.clone()))).collect();
    let mut succ: BTreeMap<PredId, Vec<PredId>> = BTreeMap::new();
    for c in &prog.clauses {
        if let (Some(h), Some(b)) = (c.head_pred(), c.body.first()) {
            g.update_edge(idx[&b.pred], idx[h], ());
            let e = succ.entry(b.pred.clone()).or_default();
            if !e.contains(h) {
                e.push(h.clone());
            }
        }
    }
    let mut sccs = petgraph::algo::tarjan_scc(&g);
    sccs.reverse();
    // members in order of first appearance in the program text
    let mut seen: Vec<&PredId> = Vec::new();
    for p in prog.clauses.iter().flat_map(|c| c.head_pred().into_iter().chain(c.body.iter().map(|b| &b.pred))).chain(preds) {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    let order: BTreeMap<&PredId, usize> = seen.into_iter().enumerate().map(|(i, p)| (p, i)).collect();
    sccs.into_iter()
        .map(|scc| {
            let mut members: Vec<PredId> = scc.iter().map(|n| g[*n].clone()).collect();
            members.sort_by_key(|p| order[p]);
            let set: BTreeSet<PredId> = members.iter().cloned().collect();
            let mut heads = BTreeSet::new();
            let mut done = BTreeSet::new();
            fn dfs(
                p: &PredId,
                set: &BTreeSet<PredId>,
                succ: &BTreeMap<PredId, Vec<PredId>>,
                on_stack: &mut Vec<PredId>,
                done: &mut BTreeSet<PredId>,
                heads: &mut BTreeSet<PredId>,
            ) {
                on_stack.push(p.clone());
                for q in succ.get(p).into_iter().flatten().filter(|q| set.contains(*q)) {
                    if on_stack.contains(q) {
                        heads.insert(q.clone());
                    } else if !done.contains(q) {
                        dfs(q, set, succ, on_stack, done, heads);
                    }
                }
                on_stack.pop();
                done.insert(p.clone());
            }
            for m in &members {
                if !done.contains(m) {
                    dfs(m, &set, &succ, &mut Vec::new(), &mut done, &mut heads);
                }
            }
            (members, heads)
        })
        .collect()
}

/// A post-fixpoint of the immediate-consequence operator of a linear
/// program, one polyhedron per predicate. Predicates with an empty value are
/// recorded with no disjuncts.
pub fn analyze_fixpoint(p: &Program, cfg: &SolverConfig, deadline: Option<Instant>) -> Result<Interpretation> {
    if let Some(c) = p.clauses.iter().find(|c| !c.is_linear()) {
        return Err(Error::NonLinearClause(c.id.to_string()));
    }
    let prog = normalize_program(p);
    let mut arities = prog.arities()?;
    if let Query::Pred(q) = &prog.query {
        arities.entry(q.clone()).or_insert(0);
    }
    let preds: Vec<PredId> = arities.keys().cloned().collect();
    let mut an = Analysis { prog: &prog, arities, values: BTreeMap::new() };
    for (members, heads) in components(&prog, &preds) {
        let mut joins: BTreeMap<PredId, usize> = BTreeMap::new();
        loop {
            check_deadline(deadline)?;
            let mut changed = false;
            for m in &members {
                let old = an.value(m);
                let new = old.convex_hull(&an.apply(m)?)?;
                if old.includes(&new)? {
                    continue;
                }
                let n = joins.entry(m.clone()).or_insert(0);
                let next = if heads.contains(m) && *n >= cfg.widen_delay { old.widen(&new)? } else { new };
                *n += 1;
                an.values.insert(m.clone(), next);
                changed = true;
            }
            if !changed {
                break;
            }
        }
        for _ in 0..cfg.narrow_steps {
            check_deadline(deadline)?;
            let next: Vec<(PredId, Polyhedron)> =
                members.iter().map(|m| Ok((m.clone(), an.value(m).meet(&an.apply(m)?)?))).collect::<Result<_>>()?;
            for (m, v) in next {
                an.values.insert(m, v);
            }
        }
    }
    let mut out = Interpretation::new();
    for pr in &preds {
        let v = an.value(pr);
        out.insert(pr.clone(), if v.is_empty() { Vec::new() } else { vec![v] });
    }
    Ok(out)
}

fn start_clauses(p: &Program) -> Vec<&Clause> {
    match &p.query {
        Query::False => p.false_clauses().collect(),
        Query::Pred(q) => p.clauses_for(q).collect(),
    }
}

fn poly_of(m: &Interpretation, p: &PredId, n: usize) -> Polyhedron {
    m.get(p).first().cloned().unwrap_or_else(|| Polyhedron::bottom(arg_dims(n)))
}

/// One node of the backward search: the predicate still to be derived, and
/// the constraint the remaining derivation must meet, over its positional
/// dimensions.
struct Goal {
    pred: PredId,
    need: Polyhedron,
    path: Vec<ClauseId>,
}

/// Renames `c` apart and conjoins `need`, taken over the head arguments.
/// Returns the conjunction and the body atom's argument variables.
fn resolve(c: &Clause, need: Option<&Polyhedron>) -> (ConstraintSet, Option<Vec<Var>>) {
    let mut gen = VarGen::new();
    let r = c.rename_apart(&mut gen);
    let mut cs = ConstraintSet::new(r.constraints.clone());
    if let (Some(need), Some(h)) = (need, r.head.atom()) {
        cs = cs.conjoin(&need.instantiate(&h.arg_vars().expect("normalised clause")));
    }
    (cs, r.body.first().map(|b| b.arg_vars().expect("normalised clause")))
}

/// Breadth-first backward search for a rationally feasible derivation of the
/// query, restricted to clauses whose body predicate has a nonempty value in
/// `model`. Ties are broken by clause order.
pub fn find_feasible_path(p: &Program, model: &Interpretation, depth_bound: usize) -> Result<Option<Vec<ClauseId>>> {
    find_feasible_path_until(p, model, depth_bound, None)
}

pub fn find_feasible_path_until(
    p: &Program,
    model: &Interpretation,
    depth_bound: usize,
    deadline: Option<Instant>,
) -> Result<Option<Vec<ClauseId>>> {
    let prog = normalize_program(p);
    let arities = prog.arities()?;
    let mut queue: VecDeque<Goal> = VecDeque::new();
    let mut seen: BTreeMap<PredId, Vec<Polyhedron>> = BTreeMap::new();
    let mut push = |g: Goal, queue: &mut VecDeque<Goal>| -> Result<()> {
        let prior = seen.entry(g.pred.clone()).or_default();
        for old in prior.iter() {
            if old.includes(&g.need)? {
                return Ok(());
            }
        }
        prior.push(g.need.clone());
        queue.push_back(g);
        Ok(())
    };
    let mut step =
        |c: &Clause, need: Option<&Polyhedron>, path: Vec<ClauseId>, queue: &mut VecDeque<Goal>| -> Result<Option<Vec<ClauseId>>> {
            let (cs, body_vars) = resolve(c, need);
            let mut path = path;
            path.push(c.id.clone());
            match (c.body.first(), body_vars) {
                (None, _) => Ok(cs.satisfiable().then_some(path)),
                (Some(b), Some(vars)) => {
                    if path.len() >= depth_bound {
                        return Ok(None);
                    }
                    let n = arities[&b.pred];
                    let need = Polyhedron::from_vars(&vars, &cs).meet(&poly_of(model, &b.pred, n))?;
                    if !need.is_empty() {
                        push(Goal { pred: b.pred.clone(), need, path: path.clone() }, queue)?;
                    }
                    Ok(None)
                }
                (Some(_), None) => unreachable!("body variables exist for a body atom"),
            }
        };
    for c in start_clauses(&prog) {
        if let Some(path) = step(c, None, Vec::new(), &mut queue)? {
            return Ok(Some(path));
        }
    }
    while let Some(g) = queue.pop_front() {
        check_deadline(deadline)?;
        for c in prog.clauses_for(&g.pred) {
            if let Some(path) = step(c, Some(&g.need), g.path.clone(), &mut queue)? {
                return Ok(Some(path));
            }
        }
    }
    Ok(None)
}

/// Shortest derivation of the query over clauses whose body predicate has a
/// nonempty value in `model`, ignoring constraints.
pub fn abstract_path(p: &Program, model: &Interpretation) -> Option<Vec<ClauseId>> {
    let mut queue: VecDeque<(Option<PredId>, Vec<ClauseId>)> = VecDeque::new();
    let mut seen = BTreeSet::new();
    let live = |c: &Clause| c.body.first().is_none_or(|b| !model.get(&b.pred).is_empty());
    for c in start_clauses(p).into_iter().filter(|c| live(c)) {
        queue.push_back((c.body.first().map(|b| b.pred.clone()), vec![c.id.clone()]));
    }
    while let Some((pred, path)) = queue.pop_front() {
        let Some(pred) = pred else { return Some(path) };
        if !seen.insert(pred.clone()) {
            continue;
        }
        for c in p.clauses_for(&pred).filter(|c| live(c)) {
            let mut next = path.clone();
            next.push(c.id.clone());
            queue.push_back((c.body.first().map(|b| b.pred.clone()), next));
        }
    }
    None
}

/// Conjunction of the constraints along a top-down linear derivation, each
/// clause renamed apart and linked to its parent through the arguments.
pub fn path_conjunction(p: &Program, path: &[ClauseId]) -> Result<ConstraintSet> {
    let prog = normalize_program(p);
    let mut gen = VarGen::new();
    let mut acc = ConstraintSet::top();
    let mut pending: Option<(PredId, Vec<Var>)> = None;
    for id in path {
        let c = prog.clause(id).ok_or_else(|| Error::UnknownClause(id.to_string()))?;
        let r = c.rename_apart(&mut gen);
        match (&pending, &r.head) {
            (None, Head::False) => {}
            (None, Head::Atom(_)) if matches!(prog.query, Query::Pred(_)) => {}
            (Some((pred, vars)), Head::Atom(h)) if &h.pred == pred => {
                let hv = h.arg_vars().expect("normalised clause");
                for (a, b) in vars.iter().zip(hv) {
                    acc = acc.with(crate::ast::Constraint::eq(crate::ast::LinExpr::var(a.clone()), crate::ast::LinExpr::var(b)));
                }
            }
            _ => return Err(Error::Disconnected(format!("clause {id} does not continue the path"))),
        }
        acc = acc.conjoin(&ConstraintSet::new(r.constraints.clone()));
        pending = r.body.first().map(|b| (b.pred.clone(), b.arg_vars().expect("normalised clause")));
    }
    if pending.is_some() {
        return Err(Error::Disconnected("path ends with a pending atom".into()));
    }
    Ok(acc)
}

/// Solves a linear program: a checked model, a feasible derivation of the
/// query, or an abstract derivation that could not be confirmed.
pub fn solve_linear(p: &Program, cfg: &SolverConfig) -> Result<SolverStatus> {
    solve_linear_until(p, cfg, None)
}

pub fn solve_linear_until(p: &Program, cfg: &SolverConfig, deadline: Option<Instant>) -> Result<SolverStatus> {
    let model = analyze_fixpoint(p, cfg, deadline)?;
    let query_reached = match &p.query {
        Query::Pred(q) => !model.get(q).is_empty(),
        Query::False => {
            let prog = normalize_program(p);
            let reached = prog.false_clauses().any(|c| {
                let mut cs = ConstraintSet::new(c.constraints.clone());
                if let Some(b) = c.body.first() {
                    match model.get(&b.pred).first() {
                        None => return false,
                        Some(v) => cs = cs.conjoin(&v.instantiate(&b.arg_vars().expect("normalised clause"))),
                    }
                }
                cs.satisfiable()
            });
            reached
        }
    };
    if !query_reached {
        if !crate::driver::check_model(p, &model)? {
            return Err(Error::Internal("linear model failed the independent check".into()));
        }
        return Ok(SolverStatus::Safe(model));
    }
    match find_feasible_path_until(p, &model, cfg.depth_bound, deadline)? {
        Some(path) => {
            if !path_conjunction(p, &path)?.satisfiable() {
                return Err(Error::Internal("reported derivation is infeasible".into()));
            }
            Ok(SolverStatus::Unsafe(path))
        }
        None => Ok(SolverStatus::Unknown(abstract_path(p, &model).unwrap_or_default())),
    }
}

//! The refinement loop over dimension bounds, plus the independent model and
//! counterexample checks.

use crate::ast::{normalize_program, Annotation, Clause, ClauseId, Constraint, Head, LinExpr, PredId, Program, Query, Var, VarGen};
use crate::dimension::{lift, map_trace, restrict_interpretation, tree_dimension, Interpretation, TraceTree};
use crate::linarith::ConstraintSet;
use crate::linear_solver::{solve_linear_until, SolverConfig, SolverStatus};
use crate::linearise::{back_map, linearise, LinearProgram, Strategy};
use crate::polyhedra::{arg_dims, Polyhedron};
use crate::{Error, Result};
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

/// Whether `m` is a model of `p`: for every clause and every choice of one
/// disjunct per body atom, the projected body lies in the union of the head's
/// disjuncts, and is empty for `false` heads. A query predicate must be
/// empty.
pub fn check_model(p: &Program, m: &Interpretation) -> Result<bool> {
    let prog = normalize_program(p);
    let arities = prog.arities()?;
    for (pred, ds) in m.iter() {
        if let Some(&n) = arities.get(pred) {
            if let Some(d) = ds.iter().find(|d| d.arity() != n) {
                return Err(Error::Arity { pred: pred.to_string(), expected: n, found: d.arity() });
            }
        }
    }
    if let Query::Pred(q) = &prog.query {
        if m.get(q).iter().any(|d| !d.is_empty()) {
            return Ok(false);
        }
    }
    for c in &prog.clauses {
        if !clause_holds(c, m)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn clause_holds(c: &Clause, m: &Interpretation) -> Result<bool> {
    let base = ConstraintSet::new(c.constraints.clone());
    if !base.satisfiable() {
        return Ok(true);
    }
    let mut partial: Vec<ConstraintSet> = vec![base];
    for b in &c.body {
        let vars = b.arg_vars().expect("normalised clause");
        let mut next = Vec::new();
        for acc in &partial {
            for d in m.get(&b.pred) {
                let cs = acc.conjoin(&d.instantiate(&vars));
                if cs.satisfiable() {
                    next.push(cs);
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            return Ok(true);
        }
    }
    match &c.head {
        Head::False => Ok(partial.is_empty()),
        Head::Atom(h) => {
            let vars = h.arg_vars().expect("normalised clause");
            let target = m.get(&h.pred);
            for cs in partial {
                if !Polyhedron::from_vars(&vars, &cs).included_in_union(target)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Conjunction of the clause constraints along `t`, each node renamed apart
/// and linked to its parent through the atom arguments. Returns the
/// conjunction and the root head's argument variables.
pub fn tree_conjunction(p: &Program, t: &TraceTree) -> Result<(ConstraintSet, Vec<Var>)> {
    let prog = normalize_program(p);
    let mut gen = VarGen::new();
    let mut acc = Vec::new();
    let root = conjoin_node(&prog, t, &mut gen, &mut acc)?;
    Ok((ConstraintSet::new(acc), root))
}

fn conjoin_node(prog: &Program, t: &TraceTree, gen: &mut VarGen, acc: &mut Vec<Constraint>) -> Result<Vec<Var>> {
    let c = prog.clause(&t.root).ok_or_else(|| Error::UnknownClause(t.root.to_string()))?;
    if c.body.len() != t.children.len() {
        return Err(Error::Structure(format!("{} has {} body atoms but {} children", c.id, c.body.len(), t.children.len())));
    }
    let r = c.rename_apart(gen);
    acc.extend(r.constraints.iter().cloned());
    for (b, child) in r.body.iter().zip(&t.children) {
        let cc = prog.clause(&child.root).ok_or_else(|| Error::UnknownClause(child.root.to_string()))?;
        if cc.head_pred() != Some(&b.pred) {
            return Err(Error::Structure(format!("{} does not define {}", cc.id, b.pred)));
        }
        let head = conjoin_node(prog, child, gen, acc)?;
        for (x, y) in b.arg_vars().expect("normalised clause").into_iter().zip(head) {
            acc.push(Constraint::eq(LinExpr::var(x), LinExpr::var(y)));
        }
    }
    Ok(r.head.atom().map(|a| a.arg_vars().expect("normalised clause")).unwrap_or_default())
}

/// Whether `t` is a feasible derivation of the query of `p`.
pub fn confirm_cex(p: &Program, t: &TraceTree) -> Result<bool> {
    let c = p.clause(&t.root).ok_or_else(|| Error::UnknownClause(t.root.to_string()))?;
    let derives_query = match &p.query {
        Query::False => c.head == Head::False,
        Query::Pred(q) => c.head_pred() == Some(q),
    };
    if !derives_query {
        return Err(Error::Structure(format!("{} does not derive the query", t.root)));
    }
    Ok(tree_conjunction(p, t)?.0.satisfiable())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Safe { model: Interpretation, k: u32 },
    Unsafe { witness: TraceTree, k: u32 },
    Unknown { reason: String, k: u32 },
}

impl Outcome {
    pub fn k(&self) -> u32 {
        match self {
            Outcome::Safe { k, .. } | Outcome::Unsafe { k, .. } | Outcome::Unknown { k, .. } => *k,
        }
    }

    pub fn verdict(&self) -> &'static str {
        match self {
            Outcome::Safe { .. } => "safe",
            Outcome::Unsafe { .. } => "unsafe",
            Outcome::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Config {
    pub max_k: u32,
    pub strategy: Strategy,
    pub reuse: bool,
    pub solver: SolverConfig,
    pub timeout: Option<Duration>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_k: 5,
            strategy: Strategy::Permute,
            reuse: false,
            solver: SolverConfig::default(),
            timeout: Some(Duration::from_secs(300)),
        }
    }
}

/// What happened in one round of the loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// The linear program was safe; `lifted_ok` says whether the lifted model
    /// solved the original program.
    Safe {
        lifted_ok: bool,
    },
    /// A counterexample that used substituted facts; those were dropped.
    Refined {
        trace: TraceTree,
    },
    /// A counterexample of the original program.
    Unsafe {
        trace: TraceTree,
    },
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub k: u32,
    pub linear_clauses: usize,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub outcome: Outcome,
    pub iterations: Vec<Iteration>,
}

impl Report {
    /// Back-mapped counterexample trees, in the order they were found.
    pub fn traces(&self) -> Vec<&TraceTree> {
        self.iterations
            .iter()
            .filter_map(|it| match &it.event {
                Event::Refined { trace } | Event::Unsafe { trace } => Some(trace),
                _ => None,
            })
            .collect()
    }
}

/// Interpretation of the annotated predicates of `pk` read off a model of its
/// linearisation. Substituted predicates keep their facts, copy-defined
/// predicates take the union of their sources, and every other predicate
/// takes the hull of the stack states that have it on top.
pub fn annotated_model(lp: &LinearProgram, pk: &Program, r: &Interpretation) -> Result<Interpretation> {
    let arities = pk.arities()?;
    let mut out = Interpretation::new();
    let mut copy_defined = Vec::new();
    for (pred, &n) in &arities {
        let defs: Vec<&Clause> = pk.clauses_for(pred).collect();
        if !defs.is_empty() && defs.iter().all(|c| c.is_model_fact()) {
            let facts = defs
                .iter()
                .map(|c| {
                    Polyhedron::from_vars(
                        &c.head.atom().and_then(|a| a.arg_vars()).unwrap_or_default(),
                        &ConstraintSet::new(c.constraints.clone()),
                    )
                })
                .filter(|d| !d.is_empty());
            out.insert(pred.clone(), facts.collect());
            continue;
        }
        if matches!(pred.ann, Annotation::AtMost(_)) && !defs.is_empty() && defs.iter().all(|c| c.is_epsilon()) {
            copy_defined.push((pred.clone(), defs.iter().map(|c| c.body[0].pred.clone()).collect::<Vec<_>>()));
            continue;
        }
        let mut acc = Polyhedron::bottom(arg_dims(n));
        for (sp, st) in &lp.states {
            if st.0.first() != Some(pred) {
                continue;
            }
            if let Some(v) = r.get(sp).first() {
                acc = acc.convex_hull(&v.project(&arg_dims(n))?)?;
            }
        }
        out.insert(pred.clone(), if acc.is_empty() { Vec::new() } else { vec![acc] });
    }
    for (pred, sources) in copy_defined {
        let mut ds: Vec<Polyhedron> = Vec::new();
        for s in sources {
            for d in out.get(&s).to_vec() {
                if !ds.contains(&d) {
                    ds.push(d);
                }
            }
        }
        out.insert(pred, ds);
    }
    Ok(out)
}

/// Decides safety of `p` by solving its dimension-bounded programs for
/// `k = 0, 1, ...` through linearisation, reusing lower-dimension models
/// when `cfg.reuse` is set.
pub fn solve(p: &Program, cfg: &Config) -> Result<Report> {
    let deadline = cfg.timeout.map(|t| Instant::now() + t);
    let mut iterations = Vec::new();
    match solve_loop(p, cfg, deadline, &mut iterations) {
        Ok(outcome) => Ok(Report { outcome, iterations }),
        Err(Error::Timeout) => {
            let k = iterations.last().map(|it: &Iteration| it.k).unwrap_or(0);
            Ok(Report { outcome: Outcome::Unknown { reason: "timeout".into(), k }, iterations })
        }
        Err(e) => Err(e),
    }
}

fn solve_loop(p: &Program, cfg: &Config, deadline: Option<Instant>, iterations: &mut Vec<Iteration>) -> Result<Outcome> {
    let p = normalize_program(p);
    let mut k = 0u32;
    let mut s = Interpretation::new();
    let mut seen: BTreeSet<TraceTree> = BTreeSet::new();
    loop {
        if k > cfg.max_k {
            return Ok(Outcome::Unknown { reason: format!("no solution up to dimension {}", cfg.max_k), k: cfg.max_k });
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::Timeout);
        }
        let (lp, pk, prov) = linearise(&p, k, &s, cfg.strategy)?;
        let linear_clauses = lp.program.clauses.len();
        match solve_linear_until(&lp.program, &cfg.solver, deadline)? {
            SolverStatus::Safe(r) => {
                let annotated = annotated_model(&lp, &pk, &r)?;
                let mut lifted = lift(&annotated, &p, k)?;
                free_unqueried(&p, &mut lifted)?;
                let ok = check_model(&p, &lifted)?;
                iterations.push(Iteration { k, linear_clauses, event: Event::Safe { lifted_ok: ok } });
                if ok {
                    return Ok(Outcome::Safe { model: lifted, k });
                }
                k += 1;
                s = if cfg.reuse { annotated } else { Interpretation::new() };
            }
            SolverStatus::Unsafe(path) => {
                let t = back_map(&path, &lp)?;
                if !seen.insert(t.clone()) {
                    return Err(Error::Internal(format!("counterexample {t} found twice")));
                }
                let restricted = restrict_interpretation(&s, &t, &pk)?;
                if restricted != s {
                    iterations.push(Iteration { k, linear_clauses, event: Event::Refined { trace: t } });
                    s = restricted;
                    continue;
                }
                iterations.push(Iteration { k, linear_clauses, event: Event::Unsafe { trace: t.clone() } });
                let witness = map_trace(&t, &prov)?;
                if tree_dimension(&witness) > k {
                    return Err(Error::Internal(format!("witness {witness} exceeds dimension {k}")));
                }
                if !confirm_cex(&p, &witness)? {
                    return Err(Error::Internal(format!("witness {witness} is infeasible")));
                }
                return Ok(Outcome::Unsafe { witness, k });
            }
            SolverStatus::Unknown(path) => {
                iterations.push(Iteration { k, linear_clauses, event: Event::Unknown });
                let shown: Vec<&str> = path.iter().map(ClauseId::as_str).collect();
                return Ok(Outcome::Unknown { reason: format!("abstract counterexample not feasible: {}", shown.join(",")), k });
            }
        }
    }
}

/// Predicates from which no integrity constraint can be reached.
pub fn unqueried_predicates(p: &Program) -> BTreeSet<PredId> {
    let mut needed: BTreeSet<&PredId> = BTreeSet::new();
    let mut todo: Vec<&PredId> = p.false_clauses().flat_map(|c| c.body.iter().map(|b| &b.pred)).collect();
    while let Some(q) = todo.pop() {
        if needed.insert(q) {
            todo.extend(p.clauses_for(q).flat_map(|c| c.body.iter().map(|b| &b.pred)));
        }
    }
    p.predicates().into_iter().filter(|q| !needed.contains(q)).collect()
}

/// Interprets the predicates that cannot affect safety as true. The linear
/// program never mentions them, so the lifted model has nothing for them.
fn free_unqueried(p: &Program, m: &mut Interpretation) -> Result<()> {
    let arities = p.arities()?;
    for q in unqueried_predicates(p) {
        let n = arities[&q];
        m.insert(q, vec![Polyhedron::top(arg_dims(n))]);
    }
    Ok(())
}

/// Predicates of `p` paired with their arities, for rendering models.
pub fn model_arities(p: &Program) -> Result<std::collections::BTreeMap<PredId, usize>> {
    p.arities()
}

//! Disjunctive interpretations, lifting, restriction and trace mapping.

use super::kdim::ProvenanceMap;
use super::trace::TraceTree;
use crate::ast::{parse_program, Annotation, PredId, Program, ProvKind, Var};
use crate::linarith::ConstraintSet;
use crate::polyhedra::{arg_dims, Polyhedron};
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};

/// A finite disjunction of polyhedra per predicate, each over the positional
/// dimensions `A, B, ...`. Absent predicates are interpreted as false.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interpretation {
    facts: BTreeMap<PredId, Vec<Polyhedron>>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, p: &PredId) -> &[Polyhedron] {
        self.facts.get(p).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, p: &PredId) -> bool {
        self.facts.contains_key(p)
    }

    /// Records `p` (possibly with no disjuncts) and appends `disjuncts`.
    pub fn extend(&mut self, p: PredId, disjuncts: impl IntoIterator<Item = Polyhedron>) {
        self.facts.entry(p).or_default().extend(disjuncts);
    }

    pub fn insert(&mut self, p: PredId, disjuncts: Vec<Polyhedron>) {
        self.facts.insert(p, disjuncts);
    }

    pub fn remove(&mut self, p: &PredId) -> Option<Vec<Polyhedron>> {
        self.facts.remove(p)
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredId> {
        self.facts.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PredId, &Vec<Polyhedron>)> {
        self.facts.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    /// One line per disjunct, `p(A,B) :- c1, c2.`; a predicate without
    /// disjuncts is written `p(A,B) :- 1=0.`
    pub fn render(&self, arities: &BTreeMap<PredId, usize>) -> String {
        let mut out = String::new();
        for (p, ds) in &self.facts {
            let n = ds.first().map(Polyhedron::arity).or_else(|| arities.get(p).copied()).unwrap_or(0);
            let head = render_head(p, n);
            let live: Vec<&Polyhedron> = ds.iter().filter(|d| !d.is_empty()).collect();
            if live.is_empty() {
                out.push_str(&format!("{head} :- 1=0.\n"));
            }
            for d in live {
                out.push_str(&format!("{head} :- {}.\n", d.render_body()));
            }
        }
        out
    }

    /// Reads the format written by [`Interpretation::render`]. Annotated
    /// predicates use the `p_e0` / `p_le0` names.
    pub fn parse(text: &str) -> Result<Interpretation> {
        let prog = parse_program(text)?;
        let mut out = Interpretation::new();
        for c in &prog.clauses {
            if !c.body.is_empty() {
                return Err(Error::Syntax { line: 0, col: 0, msg: format!("model clause {} has body atoms", c.id) });
            }
            let Some(atom) = c.head.atom() else {
                let cs = ConstraintSet::new(c.constraints.clone());
                if cs.satisfiable() {
                    return Err(Error::Syntax { line: 0, col: 0, msg: "model entry for false must be 1=0".into() });
                }
                continue;
            };
            let vars: Vec<Var> = match atom.arg_vars() {
                Some(v) if v.iter().collect::<BTreeSet<_>>().len() == v.len() => v,
                _ => return Err(Error::Syntax { line: 0, col: 0, msg: format!("model head of {} needs distinct variables", c.id) }),
            };
            let cs = ConstraintSet::new(c.constraints.clone());
            let known: BTreeSet<Var> = vars.iter().cloned().collect();
            if let Some(v) = cs.vars().iter().find(|v| !known.contains(v)) {
                return Err(Error::UnknownVariable(v.to_string()));
            }
            let poly = Polyhedron::from_vars(&vars, &cs);
            if let Some(first) = out.get(&atom.pred).first() {
                if first.arity() != poly.arity() {
                    return Err(Error::Arity { pred: atom.pred.to_string(), expected: first.arity(), found: poly.arity() });
                }
            }
            if poly.is_empty() {
                out.extend(atom.pred.clone(), []);
            } else {
                out.extend(atom.pred.clone(), [poly]);
            }
        }
        Ok(out)
    }
}

fn render_head(p: &PredId, n: usize) -> String {
    let name = crate::ast::print::pred_name(p, crate::ast::PrintStyle::Exchange);
    if n == 0 {
        name
    } else {
        let args: Vec<String> = (0..n).map(crate::ast::positional_name).collect();
        format!("{name}({})", args.join(","))
    }
}

/// Combines the entries of every annotated variant `q(d)` and `q[d]`,
/// `0 <= d <= k`, into one disjunctive entry for `q`. Empty disjuncts and
/// syntactic duplicates are dropped.
pub fn lift(s: &Interpretation, p: &Program, k: u32) -> Result<Interpretation> {
    let arities = p.arities()?;
    let mut out = Interpretation::new();
    for q in p.predicates() {
        let n = arities[&q];
        let mut ds: Vec<Polyhedron> = Vec::new();
        for d in 0..=k {
            for ann in [Annotation::Exactly(d), Annotation::AtMost(d)] {
                for poly in s.get(&q.with_ann(ann)) {
                    if poly.arity() != n {
                        return Err(Error::Arity { pred: q.with_ann(ann).to_string(), expected: n, found: poly.arity() });
                    }
                    if !poly.is_empty() && !ds.contains(poly) {
                        ds.push(poly.clone());
                    }
                }
            }
        }
        out.insert(q, ds);
    }
    Ok(out)
}

/// Drops every entry whose predicate heads a clause used in `t`.
pub fn restrict_interpretation(s: &Interpretation, t: &TraceTree, prog: &Program) -> Result<Interpretation> {
    let mut heads = BTreeSet::new();
    for id in t.clause_ids() {
        let c = prog.clause(&id).ok_or_else(|| Error::UnknownClause(id.to_string()))?;
        if let Some(p) = c.head_pred() {
            heads.insert(p.clone());
        }
    }
    let mut out = s.clone();
    for p in heads {
        out.remove(&p);
    }
    Ok(out)
}

/// Maps a trace of the dimension-bounded program to the original program:
/// copy clauses are contracted and every other node takes its origin label.
pub fn map_trace(t: &TraceTree, prov: &ProvenanceMap) -> Result<TraceTree> {
    let pr = prov.get(&t.root).ok_or_else(|| Error::UnknownClause(t.root.to_string()))?;
    match &pr.kind {
        ProvKind::Epsilon => match t.children.as_slice() {
            [child] => map_trace(child, prov),
            _ => Err(Error::Structure(format!("copy clause {} must have one child", t.root))),
        },
        ProvKind::ModelFact(_) => Err(Error::ModelFactInTrace(t.root.to_string())),
        ProvKind::Linear | ProvKind::NonlinearCase => {
            let origin = pr.origin.clone().ok_or_else(|| Error::Structure(format!("{} has no origin", t.root)))?;
            let children = t.children.iter().map(|c| map_trace(c, prov)).collect::<Result<Vec<_>>>()?;
            Ok(TraceTree::new(origin, children))
        }
    }
}

/// Arity-checked polyhedron for interpretation entries.
pub fn entry(n: usize, cs: ConstraintSet) -> Result<Polyhedron> {
    Polyhedron::new(arg_dims(n), cs)
}

//! The at-most-k-dimension program.

use crate::ast::{normalize_program, Atom, Clause, ClauseId, Head, PredId, Program, ProvKind, Provenance, Query, Var, FALSE_BASE};
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Origin and kind of every generated clause.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProvenanceMap {
    pub by_clause: BTreeMap<ClauseId, Provenance>,
}

impl ProvenanceMap {
    pub fn from_program(p: &Program) -> Self {
        let by_clause = p.clauses.iter().filter_map(|c| c.provenance.clone().map(|pr| (c.id.clone(), pr))).collect();
        ProvenanceMap { by_clause }
    }

    pub fn get(&self, id: &ClauseId) -> Option<&Provenance> {
        self.by_clause.get(id)
    }
}

/// The predicate standing for `false` heads.
pub fn false_pred() -> PredId {
    PredId::new(FALSE_BASE)
}

fn head_atom(c: &Clause) -> Atom {
    match &c.head {
        Head::False => Atom::new(false_pred(), Vec::new()),
        Head::Atom(a) => a.clone(),
    }
}

fn annotate(a: &Atom, pred: PredId) -> Atom {
    Atom::new(pred, a.args.clone())
}

fn derived(c: &Clause, id: String, head: &Atom, ann_head: PredId, body: Vec<Atom>, kind: ProvKind) -> Clause {
    Clause::new(ClauseId::new(&id), Head::Atom(annotate(head, ann_head)), c.constraints.clone(), body)
        .with_provenance(Some(c.id.clone()), kind)
}

/// Builds the program whose derivations are exactly the derivations of `p`
/// with tree dimension at most `k`.
///
/// Every predicate `q` is split into `q(d)` (dimension exactly `d`) and
/// `q[d]` (dimension at most `d`); `false` heads become the predicate
/// `false(d)`, and the query of the result is `false[k]`. Generated ids do
/// not depend on `k`, so the program for `k` is a subset of the one for
/// `k+1`.
pub fn kdim(p: &Program, k: u32) -> Result<(Program, ProvenanceMap)> {
    if let Some(q) = p.predicates().into_iter().find(|q| q.is_annotated()) {
        return Err(Error::AnnotatedInput(q.to_string()));
    }
    if p.query != Query::False {
        return Err(Error::UnsupportedQuery);
    }
    let arities = p.arities()?;
    if arities.contains_key(&false_pred()) {
        return Err(Error::AnnotatedInput(FALSE_BASE.to_string()));
    }
    let p = normalize_program(p);
    let mut out = Vec::new();
    for c in &p.clauses {
        let h = head_atom(c);
        let r = c.body.len();
        match r {
            0 => out.push(derived(c, format!("{}@0", c.id), &h, h.pred.exactly(0), Vec::new(), ProvKind::Linear)),
            1 => {
                for d in 0..=k {
                    let body = vec![annotate(&c.body[0], c.body[0].pred.exactly(d))];
                    out.push(derived(c, format!("{}@{d}", c.id), &h, h.pred.exactly(d), body, ProvKind::Linear));
                }
            }
            _ => {
                for d in 1..=k {
                    for j in 0..r {
                        let body = c
                            .body
                            .iter()
                            .enumerate()
                            .map(|(i, b)| annotate(b, if i == j { b.pred.exactly(d) } else { b.pred.at_most(d - 1) }))
                            .collect();
                        let id = format!("{}@{d}.j{}", c.id, j + 1);
                        out.push(derived(c, id, &h, h.pred.exactly(d), body, ProvKind::NonlinearCase));
                    }
                    if r > 2 && d < 2 {
                        continue;
                    }
                    for a in 0..r {
                        for b in a + 1..r {
                            let body = c
                                .body
                                .iter()
                                .enumerate()
                                .map(|(i, x)| annotate(x, if i == a || i == b { x.pred.exactly(d - 1) } else { x.pred.at_most(d - 1) }))
                                .collect();
                            let id = format!("{}@{d}.J{}_{}", c.id, a + 1, b + 1);
                            out.push(derived(c, id, &h, h.pred.exactly(d), body, ProvKind::NonlinearCase));
                        }
                    }
                }
            }
        }
    }
    let mut preds = Vec::new();
    for c in &p.clauses {
        if c.head == Head::False && !preds.contains(&false_pred()) {
            preds.push(false_pred());
        }
    }
    preds.extend(p.predicates());
    let arities_with_false = {
        let mut a = arities;
        a.insert(false_pred(), 0);
        a
    };
    for q in &preds {
        let n = arities_with_false[q];
        let vars: Vec<Var> = (0..n).map(Var::arg).collect();
        for d in 0..=k {
            for e in 0..=d {
                let id = ClauseId::new(&format!("eps.{}.le{d}.eq{e}", q.base));
                let clause = Clause::new(
                    id,
                    Head::Atom(Atom::from_vars(q.at_most(d), &vars)),
                    Vec::new(),
                    vec![Atom::from_vars(q.exactly(e), &vars)],
                )
                .with_provenance(None, ProvKind::Epsilon);
                out.push(clause);
            }
        }
    }
    let prog = Program { clauses: out, query: Query::Pred(false_pred().at_most(k)) };
    let prov = ProvenanceMap::from_program(&prog);
    Ok((prog, prov))
}

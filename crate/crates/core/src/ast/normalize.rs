//! Flattening of atom arguments into pairwise-distinct variables.

use super::{Atom, Clause, Constraint, Head, LinExpr, Program, Var, VarGen};
use std::collections::BTreeSet;

/// Rewrites every clause so that each atom argument is a variable that occurs
/// in no other argument position of the clause. Displaced terms become
/// equalities `V = term`. Already-normal clauses are returned unchanged.
pub fn normalize_program(p: &Program) -> Program {
    Program { clauses: p.clauses.iter().map(normalize_clause).collect(), query: p.query.clone() }
}

fn normalize_clause(c: &Clause) -> Clause {
    let used = c.vars();
    let start = used.iter().filter_map(|v| if let Var::Fresh(i) = v { Some(i + 1) } else { None }).max().unwrap_or(0);
    let mut gen = VarGen::new();
    for _ in 0..start {
        gen.fresh();
    }
    let mut seen: BTreeSet<Var> = BTreeSet::new();
    let mut extra: Vec<Constraint> = Vec::new();
    let mut flatten = |a: &Atom| -> Atom {
        let args = a
            .args
            .iter()
            .map(|e| match e.as_var() {
                Some(v) if seen.insert(v.clone()) => e.clone(),
                _ => {
                    let v = gen.fresh();
                    seen.insert(v.clone());
                    extra.push(Constraint::eq(LinExpr::var(v.clone()), e.clone()));
                    LinExpr::var(v)
                }
            })
            .collect();
        Atom::new(a.pred.clone(), args)
    };
    let head = match &c.head {
        Head::False => Head::False,
        Head::Atom(a) => Head::Atom(flatten(a)),
    };
    let body: Vec<Atom> = c.body.iter().map(&mut flatten).collect();
    let mut constraints = extra;
    constraints.extend(c.constraints.iter().cloned());
    Clause { id: c.id.clone(), head, constraints, body, provenance: c.provenance.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{parse_program, print_program, PrintStyle};

    #[test]
    fn flattens_terms() {
        let p = normalize_program(&parse_program("p(X+1) :- X>0.").unwrap());
        assert!(p.is_normalized());
        assert_eq!(print_program(&p, PrintStyle::Human), "p(A) :- B=A-1, B>0.\n");
    }

    #[test]
    fn splits_repeated_variables() {
        let p = normalize_program(&parse_program("q(X,X) :- X=0.").unwrap());
        assert!(p.is_normalized());
        let c = &p.clauses[0];
        assert_eq!(c.constraints.len(), 2);
        assert_eq!(print_program(&p, PrintStyle::Human), "q(A,B) :- A=B, A=0.\n");
    }

    #[test]
    fn normal_clause_unchanged() {
        let p = parse_program("fib(A, B):- A>=0, A=<1, B=A.").unwrap();
        assert_eq!(normalize_program(&p), p);
    }

    #[test]
    fn idempotent_on_repeated_body_args() {
        let p = parse_program("p(X) :- q(X, X), r(2*X).").unwrap();
        let once = normalize_program(&p);
        assert_eq!(normalize_program(&once), once);
    }
}

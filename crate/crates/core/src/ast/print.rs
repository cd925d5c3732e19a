//! Text output for expressions, constraints, clauses and programs.

use super::{positional_name, Annotation, Atom, Clause, Constraint, Head, LinExpr, PredId, Program, Rat, Rel, Var};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// How annotated predicates are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrintStyle {
    /// `p(0)` / `p[1]`, for reading. Not accepted by the parser.
    #[default]
    Human,
    /// `p_e0` / `p_le1`, which the parser reads back.
    Exchange,
}

pub(crate) fn pred_name(p: &PredId, style: PrintStyle) -> String {
    match (style, p.ann) {
        (_, Annotation::None) | (PrintStyle::Human, _) => p.to_string(),
        (PrintStyle::Exchange, Annotation::Exactly(d)) => format!("{}_e{d}", p.base),
        (PrintStyle::Exchange, Annotation::AtMost(d)) => format!("{}_le{d}", p.base),
    }
}

fn rat_to_string(r: &Rat) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn terms_to_string(terms: &[(&Var, Rat)], constant: &Rat, names: &dyn Fn(&Var) -> String) -> String {
    let mut out = String::new();
    for (v, c) in terms {
        let mag = c.abs();
        if out.is_empty() {
            if c.is_negative() {
                out.push('-');
            }
        } else {
            out.push(if c.is_negative() { '-' } else { '+' });
        }
        if !mag.is_one() {
            out.push_str(&rat_to_string(&mag));
            out.push('*');
        }
        out.push_str(&names(v));
    }
    if out.is_empty() {
        return rat_to_string(constant);
    }
    if !constant.is_zero() {
        out.push(if constant.is_negative() { '-' } else { '+' });
        out.push_str(&rat_to_string(&constant.abs()));
    }
    out
}

pub(crate) fn expr_with_names(e: &LinExpr, names: &dyn Fn(&Var) -> String) -> String {
    let terms: Vec<(&Var, Rat)> = e.coeffs().iter().map(|(v, c)| (v, c.clone())).collect();
    terms_to_string(&terms, e.constant_term(), names)
}

pub fn expr_to_string(e: &LinExpr) -> String {
    expr_with_names(e, &|v| v.to_string())
}

pub(crate) fn constraint_with_names(c: &Constraint, names: &dyn Fn(&Var) -> String) -> String {
    let c = c.primitive();
    if c.expr.is_constant() {
        let op = match c.rel {
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        };
        return format!("{}{op}0", rat_to_string(c.expr.constant_term()));
    }
    let pos: Vec<(&Var, Rat)> = c.expr.coeffs().iter().filter(|(_, k)| k.is_positive()).map(|(v, k)| (v, k.clone())).collect();
    let neg: Vec<(&Var, Rat)> = c.expr.coeffs().iter().filter(|(_, k)| k.is_negative()).map(|(v, k)| (v, -k)).collect();
    let k = c.expr.constant_term();
    // `pos + k REL neg` rendered as `pos REL neg - k`, or flipped when only negative terms exist
    if pos.is_empty() {
        let op = match c.rel {
            Rel::Eq => "=",
            Rel::Ge => "=<",
            Rel::Gt => "<",
        };
        format!("{}{op}{}", terms_to_string(&neg, &Rat::zero(), names), rat_to_string(k))
    } else {
        let op = match c.rel {
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        };
        format!("{}{op}{}", terms_to_string(&pos, &Rat::zero(), names), terms_to_string(&neg, &-k.clone(), names))
    }
}

pub fn print_constraint(c: &Constraint) -> String {
    constraint_with_names(c, &|v| v.to_string())
}

fn atom_with_names(a: &Atom, style: PrintStyle, names: &dyn Fn(&Var) -> String) -> String {
    let name = pred_name(&a.pred, style);
    if a.args.is_empty() {
        return name;
    }
    let args: Vec<String> = a.args.iter().map(|e| expr_with_names(e, names)).collect();
    format!("{name}({})", args.join(","))
}

/// Canonical variable names for a clause: head arguments first, then body
/// atom arguments, then the remaining constraint variables, in order of first
/// occurrence.
pub(crate) fn canonical_names(c: &Clause) -> BTreeMap<Var, String> {
    let mut order: Vec<Var> = Vec::new();
    let visit = |e: &LinExpr, order: &mut Vec<Var>| {
        for v in e.vars() {
            if !order.contains(v) {
                order.push(v.clone());
            }
        }
    };
    for a in c.head.args() {
        visit(a, &mut order);
    }
    for b in &c.body {
        for a in &b.args {
            visit(a, &mut order);
        }
    }
    for k in &c.constraints {
        visit(&k.expr, &mut order);
    }
    order.into_iter().enumerate().map(|(i, v)| (v, positional_name(i))).collect()
}

pub fn print_clause(c: &Clause, style: PrintStyle) -> String {
    let names = canonical_names(c);
    let lookup = |v: &Var| names[v].clone();
    let head = match &c.head {
        Head::False => "false".to_string(),
        Head::Atom(a) => atom_with_names(a, style, &lookup),
    };
    let mut body: Vec<String> = c.constraints.iter().map(|k| constraint_with_names(k, &lookup)).collect();
    body.extend(c.body.iter().map(|b| atom_with_names(b, style, &lookup)));
    if body.is_empty() {
        format!("{head}.")
    } else {
        format!("{head} :- {}.", body.join(", "))
    }
}

/// One clause per line.
pub fn print_program(p: &Program, style: PrintStyle) -> String {
    let mut out = String::new();
    for c in &p.clauses {
        out.push_str(&print_clause(c, style));
        out.push('\n');
    }
    out
}

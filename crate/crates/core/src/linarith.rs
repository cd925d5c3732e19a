//! Exact linear rational arithmetic over conjunctions of atomic constraints.
//!
//! Satisfiability is decided by Fourier–Motzkin elimination while the system
//! stays small and by an exact simplex otherwise. Projection uses
//! Fourier–Motzkin elimination: equalities are substituted away first, strict
//! inequalities stay strict whenever a strict constraint takes part in a
//! combination, and redundant constraints are pruned after each step.

use crate::ast::{Constraint, LinExpr, Rat, Rel, Var};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A conjunction of atomic constraints, kept in a simplified form: syntactic
/// duplicates and parallel weaker bounds are dropped, opposed bounds that pin
/// a value become equalities, and a detected contradiction is stored as the
/// single constraint `1 = 0`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ConstraintSet {
    cs: Vec<Constraint>,
}

impl fmt::Debug for ConstraintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.cs.iter()).finish()
    }
}

impl ConstraintSet {
    pub fn new(cs: impl IntoIterator<Item = Constraint>) -> Self {
        match simplify(cs) {
            Some(cs) => ConstraintSet { cs },
            None => ConstraintSet::bottom(),
        }
    }

    pub fn top() -> Self {
        ConstraintSet { cs: Vec::new() }
    }

    pub fn bottom() -> Self {
        ConstraintSet { cs: vec![Constraint::falsum()] }
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.cs
    }

    pub fn len(&self) -> usize {
        self.cs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cs.is_empty()
    }

    /// Whether a contradiction was detected syntactically.
    pub fn is_trivially_false(&self) -> bool {
        self.cs.len() == 1 && self.cs[0].ground_truth() == Some(false)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.cs.iter().flat_map(|c| c.vars().cloned()).collect()
    }

    pub fn conjoin(&self, other: &ConstraintSet) -> ConstraintSet {
        ConstraintSet::new(self.cs.iter().chain(other.cs.iter()).cloned())
    }

    pub fn with(&self, c: Constraint) -> ConstraintSet {
        ConstraintSet::new(self.cs.iter().cloned().chain(std::iter::once(c)))
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> ConstraintSet {
        ConstraintSet::new(self.cs.iter().map(|c| c.rename(f)))
    }

    pub fn holds_at(&self, point: &BTreeMap<Var, Rat>) -> Option<bool> {
        for c in &self.cs {
            if !c.holds_at(point)? {
                return Some(false);
            }
        }
        Some(true)
    }

    pub fn satisfiable(&self) -> bool {
        satisfiable(self)
    }

    pub fn eliminate_vars(&self, vars: &BTreeSet<Var>) -> ConstraintSet {
        eliminate_vars(vars, self)
    }

    pub fn entails(&self, a: &Constraint) -> bool {
        entails(self, a)
    }

    /// An equivalent set in which every implied equality among the
    /// inequalities is explicit and no constraint follows from the others.
    pub fn minimize(&self) -> ConstraintSet {
        if !self.satisfiable() {
            return ConstraintSet::bottom();
        }
        let mut cs = Vec::new();
        for c in &self.cs {
            if c.rel == Rel::Ge && entails(self, &Constraint::new(c.expr.neg(), Rel::Ge)) {
                cs.push(Constraint::new(c.expr.clone(), Rel::Eq));
            } else {
                cs.push(c.clone());
            }
        }
        let mut cs = ConstraintSet::new(cs).cs;
        let mut i = cs.len();
        while i > 0 {
            i -= 1;
            let c = cs.remove(i);
            if !entails(&ConstraintSet { cs: cs.clone() }, &c) {
                cs.insert(i, c);
            }
        }
        ConstraintSet { cs }
    }

    /// Keeps exactly the variables in `keep`.
    pub fn project_onto(&self, keep: &BTreeSet<Var>) -> ConstraintSet {
        let drop: BTreeSet<Var> = self.vars().difference(keep).cloned().collect();
        self.eliminate_vars(&drop)
    }
}

impl FromIterator<Constraint> for ConstraintSet {
    fn from_iter<T: IntoIterator<Item = Constraint>>(iter: T) -> Self {
        ConstraintSet::new(iter)
    }
}

/// Scales the variable part to coprime integers. Equalities are oriented so
/// that their first coefficient is positive. Returns `None` for a ground
/// constraint that holds.
fn norm(c: &Constraint) -> Option<Constraint> {
    if let Some(t) = c.ground_truth() {
        return if t { None } else { Some(Constraint::falsum()) };
    }
    let mut lcm = BigInt::one();
    for k in c.expr.coeffs().values() {
        lcm = lcm.lcm(k.denom());
    }
    let mut g = BigInt::zero();
    for k in c.expr.coeffs().values() {
        g = g.gcd(&(k * Rat::from_integer(lcm.clone())).to_integer());
    }
    let mut factor = Rat::new(lcm, g);
    if c.rel == Rel::Eq && c.expr.coeffs().values().next().is_some_and(|k| k.is_negative()) {
        factor = -factor;
    }
    Some(Constraint::new(c.expr.scale(&factor), c.rel))
}

type Key = BTreeMap<Var, Rat>;

fn neg_key(k: &Key) -> Key {
    k.iter().map(|(v, c)| (v.clone(), -c)).collect()
}

fn make(key: &Key, constant: Rat, rel: Rel) -> Constraint {
    Constraint::new(LinExpr::from_terms(key.iter().map(|(v, c)| (v.clone(), c.clone())), constant), rel)
}

/// Syntactic simplification. `None` means a contradiction was found.
fn simplify(cs: impl IntoIterator<Item = Constraint>) -> Option<Vec<Constraint>> {
    let mut eqs: BTreeMap<Key, Rat> = BTreeMap::new();
    // key -> (constant, strict); the bound is `key.x + constant REL 0`, the tightest has the least constant
    let mut ineqs: BTreeMap<Key, (Rat, bool)> = BTreeMap::new();
    for c in cs {
        let Some(c) = norm(&c) else { continue };
        if c.expr.is_constant() {
            return None;
        }
        let key = c.expr.coeffs().clone();
        let k = c.expr.constant_term().clone();
        match c.rel {
            Rel::Eq => match eqs.get(&key) {
                Some(old) if *old != k => return None,
                _ => {
                    eqs.insert(key, k);
                }
            },
            Rel::Ge | Rel::Gt => {
                let strict = c.rel == Rel::Gt;
                match ineqs.get_mut(&key) {
                    Some((old, old_strict)) => {
                        if k < *old || (k == *old && strict && !*old_strict) {
                            *old = k;
                            *old_strict = strict;
                        }
                    }
                    None => {
                        ineqs.insert(key, (k, strict));
                    }
                }
            }
        }
    }
    // opposed bounds: key.x >= -c1 and key.x <= c2
    let keys: Vec<Key> = ineqs.keys().cloned().collect();
    for key in keys {
        let nk = neg_key(&key);
        let (Some((c1, s1)), Some((c2, s2))) = (ineqs.get(&key).cloned(), ineqs.get(&nk).cloned()) else { continue };
        let width = &c1 + &c2;
        if width.is_negative() || (width.is_zero() && (s1 || s2)) {
            return None;
        }
        if width.is_zero() {
            ineqs.remove(&key);
            ineqs.remove(&nk);
            let (ek, ec) = if key.values().next().is_some_and(|c| c.is_positive()) { (key, c1) } else { (nk, c2) };
            match eqs.get(&ek) {
                Some(old) if *old != ec => return None,
                _ => {
                    eqs.insert(ek, ec);
                }
            }
        }
    }
    // bounds parallel to an equality are either implied or contradictory
    for (key, ce) in &eqs {
        for (k2, sign) in [(key.clone(), Rat::one()), (neg_key(key), -Rat::one())] {
            if let Some((c, strict)) = ineqs.get(&k2).cloned() {
                // at the equality, key.x = -ce, so k2.x + c = -sign*ce + c
                let val = c - sign * ce;
                if val.is_negative() || (val.is_zero() && strict) {
                    return None;
                }
                ineqs.remove(&k2);
            }
        }
    }
    let mut out: Vec<Constraint> = eqs.iter().map(|(k, c)| make(k, c.clone(), Rel::Eq)).collect();
    out.extend(ineqs.iter().map(|(k, (c, s))| make(k, c.clone(), if *s { Rel::Gt } else { Rel::Ge })));
    Some(out)
}

/// Solves `eq` for `v`.
fn solve_for(eq: &Constraint, v: &Var) -> LinExpr {
    let c = eq.expr.coeff(v);
    let mut rest = eq.expr.clone();
    rest.add_term(v.clone(), -c.clone());
    rest.scale(&(-Rat::one() / c))
}

fn combine(p: &Constraint, n: &Constraint, v: &Var) -> Constraint {
    let cp = p.expr.coeff(v);
    let cn = -n.expr.coeff(v);
    let expr = p.expr.scale(&cn).add(&n.expr.scale(&cp));
    let rel = if p.rel == Rel::Gt || n.rel == Rel::Gt { Rel::Gt } else { Rel::Ge };
    Constraint::new(expr, rel)
}

/// Fourier–Motzkin elimination of `vars`. Constraints entailed by the others
/// are dropped after each step. `None` means unsatisfiable.
fn fm(cs: Vec<Constraint>, vars: &BTreeSet<Var>) -> Option<Vec<Constraint>> {
    let mut cs = simplify(cs)?;
    let mut todo: BTreeSet<Var> = vars.clone();
    loop {
        let present: BTreeSet<Var> = cs.iter().flat_map(|c| c.vars().cloned()).collect();
        todo.retain(|v| present.contains(v));
        if todo.is_empty() {
            return Some(cs);
        }
        // Gaussian step: pick the equality that mentions an eliminable variable
        let eq_pick = cs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.rel == Rel::Eq)
            .find_map(|(i, c)| c.vars().find(|v| todo.contains(*v)).map(|v| (i, v.clone())));
        if let Some((i, v)) = eq_pick {
            let eq = cs.remove(i);
            let sol = solve_for(&eq, &v);
            cs = simplify(cs.iter().map(|c| c.substitute(&v, &sol)))?;
            todo.remove(&v);
            continue;
        }
        // cheapest variable: fewest new constraints produced
        let v = todo
            .iter()
            .min_by_key(|v| {
                let pos = cs.iter().filter(|c| c.expr.coeff(v).is_positive()).count();
                let neg = cs.iter().filter(|c| c.expr.coeff(v).is_negative()).count();
                (pos * neg) as i64 - (pos + neg) as i64
            })
            .cloned()
            .expect("todo is nonempty");
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for c in cs {
            let k = c.expr.coeff(&v);
            if k.is_positive() {
                pos.push(c);
            } else if k.is_negative() {
                neg.push(c);
            } else {
                rest.push(c);
            }
        }
        for p in &pos {
            for n in &neg {
                rest.push(combine(p, n, &v));
            }
        }
        cs = remove_redundant(simplify(rest)?);
        todo.remove(&v);
    }
}

fn remove_redundant(mut cs: Vec<Constraint>) -> Vec<Constraint> {
    let mut i = cs.len();
    while i > 0 {
        i -= 1;
        if cs[i].rel == Rel::Eq {
            continue;
        }
        let c = cs.remove(i);
        let rest = ConstraintSet { cs: cs.clone() };
        if !entails(&rest, &c) {
            cs.insert(i, c);
        }
    }
    cs
}

pub fn satisfiable(c: &ConstraintSet) -> bool {
    if c.is_trivially_false() {
        return false;
    }
    let Some(cs) = simplify(c.cs.iter().cloned()) else { return false };
    match fm_feasible(cs.clone()) {
        Some(answer) => answer,
        None => crate::simplex::feasible(&cs),
    }
}

/// Systems that grow past this size under unpruned elimination go to the
/// simplex instead.
const FM_LIMIT: usize = 40;

/// Decides feasibility by eliminating every variable without pruning, giving
/// up with `None` once the system exceeds `FM_LIMIT` constraints.
pub(crate) fn fm_feasible(mut cs: Vec<Constraint>) -> Option<bool> {
    loop {
        if cs.len() > FM_LIMIT {
            return None;
        }
        if let Some((i, v)) =
            cs.iter().enumerate().filter(|(_, c)| c.rel == Rel::Eq).find_map(|(i, c)| c.vars().next().map(|v| (i, v.clone())))
        {
            let eq = cs.remove(i);
            let sol = solve_for(&eq, &v);
            match simplify(cs.iter().map(|c| c.substitute(&v, &sol))) {
                Some(next) => cs = next,
                None => return Some(false),
            }
            continue;
        }
        let vars: BTreeSet<Var> = cs.iter().flat_map(|c| c.vars().cloned()).collect();
        let Some(v) = vars
            .iter()
            .min_by_key(|v| {
                let pos = cs.iter().filter(|c| c.expr.coeff(v).is_positive()).count();
                let neg = cs.iter().filter(|c| c.expr.coeff(v).is_negative()).count();
                pos * neg
            })
            .cloned()
        else {
            return Some(true);
        };
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for c in cs {
            let k = c.expr.coeff(&v);
            if k.is_positive() {
                pos.push(c);
            } else if k.is_negative() {
                neg.push(c);
            } else {
                rest.push(c);
            }
        }
        if rest.len() + pos.len() * neg.len() > FM_LIMIT {
            return None;
        }
        for p in &pos {
            for n in &neg {
                rest.push(combine(p, n, &v));
            }
        }
        match simplify(rest) {
            Some(next) => cs = next,
            None => return Some(false),
        }
    }
}

/// Projection of `c` onto its variables outside `vars`.
pub fn eliminate_vars(vars: &BTreeSet<Var>, c: &ConstraintSet) -> ConstraintSet {
    if vars.is_empty() || c.is_trivially_false() {
        return c.clone();
    }
    match fm(c.cs.clone(), vars) {
        Some(cs) => ConstraintSet { cs },
        None => ConstraintSet::bottom(),
    }
}

/// The disjuncts of the negation of `a`.
pub fn negate_atomic(a: &Constraint) -> Vec<Constraint> {
    match a.rel {
        Rel::Ge => vec![Constraint::new(a.expr.neg(), Rel::Gt)],
        Rel::Gt => vec![Constraint::new(a.expr.neg(), Rel::Ge)],
        Rel::Eq => vec![Constraint::new(a.expr.clone(), Rel::Gt), Constraint::new(a.expr.neg(), Rel::Gt)],
    }
}

pub fn entails(c: &ConstraintSet, a: &Constraint) -> bool {
    negate_atomic(a).into_iter().all(|d| !satisfiable(&c.with(d)))
}

//! Convex polyhedra in constraint representation.

use crate::ast::{positional_name, Constraint, LinExpr, Rat, Rel, Var};
use crate::linarith::{negate_atomic, ConstraintSet};
use crate::{Error, Result};
use num_traits::One;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

/// A polyhedron over an ordered tuple of dimensions.
#[derive(Clone)]
pub struct Polyhedron {
    dims: Arc<[Var]>,
    cs: ConstraintSet,
    empty: OnceLock<bool>,
}

impl PartialEq for Polyhedron {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.cs == other.cs
    }
}

impl Eq for Polyhedron {}

impl fmt::Debug for Polyhedron {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}:{:?}", self.dims, self.cs)
    }
}

/// The positional dimensions `A, B, ...` used for predicate interpretations.
pub fn arg_dims(n: usize) -> Vec<Var> {
    (0..n).map(Var::arg).collect()
}

impl Polyhedron {
    pub fn new(dims: Vec<Var>, cs: ConstraintSet) -> Result<Self> {
        let known: BTreeSet<&Var> = dims.iter().collect();
        if let Some(v) = cs.vars().iter().find(|v| !known.contains(v)) {
            return Err(Error::UnknownVariable(v.to_string()));
        }
        Ok(Polyhedron { dims: dims.into(), cs, empty: OnceLock::new() })
    }

    fn raw(dims: Arc<[Var]>, cs: ConstraintSet) -> Self {
        Polyhedron { dims, cs, empty: OnceLock::new() }
    }

    pub fn top(dims: Vec<Var>) -> Self {
        Polyhedron::raw(dims.into(), ConstraintSet::top())
    }

    pub fn bottom(dims: Vec<Var>) -> Self {
        let p = Polyhedron::raw(dims.into(), ConstraintSet::bottom());
        let _ = p.empty.set(true);
        p
    }

    /// Polyhedron over `A, B, ...` built from constraints over `vars`, which
    /// are renamed positionally; other variables are projected away.
    pub fn from_vars(vars: &[Var], cs: &ConstraintSet) -> Self {
        let keep: BTreeSet<Var> = vars.iter().cloned().collect();
        let projected = cs.project_onto(&keep);
        let map: BTreeMap<Var, Var> = vars.iter().enumerate().map(|(i, v)| (v.clone(), Var::arg(i))).collect();
        Polyhedron::raw(arg_dims(vars.len()).into(), projected.rename(&|v| map[v].clone()))
    }

    pub fn dims(&self) -> &[Var] {
        &self.dims
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.cs
    }

    /// Constraints with the dimensions replaced positionally by `vars`.
    pub fn instantiate(&self, vars: &[Var]) -> ConstraintSet {
        assert_eq!(vars.len(), self.dims.len(), "instantiate: arity");
        let map: BTreeMap<Var, Var> = self.dims.iter().cloned().zip(vars.iter().cloned()).collect();
        self.cs.rename(&|v| map[v].clone())
    }

    fn check_dims(&self, other: &Polyhedron) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        *self.empty.get_or_init(|| !self.cs.satisfiable())
    }

    pub fn meet(&self, other: &Polyhedron) -> Result<Polyhedron> {
        self.check_dims(other)?;
        Ok(Polyhedron::raw(self.dims.clone(), self.cs.conjoin(&other.cs)))
    }

    pub fn meet_constraint(&self, c: Constraint) -> Polyhedron {
        Polyhedron::raw(self.dims.clone(), self.cs.with(c))
    }

    pub fn project(&self, keep: &[Var]) -> Result<Polyhedron> {
        let known: BTreeSet<&Var> = self.dims.iter().collect();
        if let Some(v) = keep.iter().find(|v| !known.contains(v)) {
            return Err(Error::UnknownVariable(v.to_string()));
        }
        if self.is_empty() {
            return Ok(Polyhedron::bottom(keep.to_vec()));
        }
        let gone: BTreeSet<Var> = self.dims.iter().filter(|d| !keep.contains(d)).cloned().collect();
        Ok(Polyhedron::raw(keep.to_vec().into(), self.cs.eliminate_vars(&gone)))
    }

    /// Whether `other` is a subset of `self`.
    pub fn includes(&self, other: &Polyhedron) -> Result<bool> {
        self.check_dims(other)?;
        if other.is_empty() {
            return Ok(true);
        }
        Ok(self.cs.constraints().iter().all(|a| other.cs.entails(a)))
    }

    pub fn same_set(&self, other: &Polyhedron) -> Result<bool> {
        Ok(self.includes(other)? && other.includes(self)?)
    }

    /// Closure of the convex hull.
    pub fn convex_hull(&self, other: &Polyhedron) -> Result<Polyhedron> {
        self.check_dims(other)?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        if other.is_empty() || self.includes(other)? {
            return Ok(self.clone());
        }
        if other.includes(self)? {
            return Ok(other.clone());
        }
        // x = y1 + y2 with y_i in lambda_i * P_i, lambda_1 + lambda_2 = 1, lambda_i >= 0
        let aux = |tag: &str, i: usize| Var::named(&format!("#{tag}{i}"));
        let mut lifted = Vec::new();
        let mut gone = BTreeSet::new();
        for (side, p) in [(1usize, self), (2, other)] {
            let lambda = aux("l", side);
            gone.insert(lambda.clone());
            let rename: BTreeMap<Var, Var> = self.dims.iter().enumerate().map(|(i, d)| (d.clone(), aux(&format!("y{side}_"), i))).collect();
            gone.extend(rename.values().cloned());
            for c in p.cs.constraints() {
                let mut e = c.expr.rename(&|v| rename[v].clone());
                let k = e.constant_term().clone();
                e.add_constant(&-k.clone());
                e.add_term(lambda.clone(), k);
                let rel = if c.rel == Rel::Eq { Rel::Eq } else { Rel::Ge };
                lifted.push(Constraint::new(e, rel));
            }
            lifted.push(Constraint::new(LinExpr::var(lambda), Rel::Ge));
        }
        lifted.push(Constraint::eq(LinExpr::var(aux("l", 1)).add(&LinExpr::var(aux("l", 2))), LinExpr::constant(Rat::one())));
        for (i, d) in self.dims.iter().enumerate() {
            let sum = LinExpr::var(aux("y1_", i)).add(&LinExpr::var(aux("y2_", i)));
            lifted.push(Constraint::eq(LinExpr::var(d.clone()), sum));
        }
        let hull = ConstraintSet::new(lifted).eliminate_vars(&gone);
        let out = Polyhedron::raw(self.dims.clone(), hull);
        let _ = out.empty.set(false);
        Ok(out)
    }

    /// Widening: the constraints of `self` that `other` entails, plus the
    /// equalities of `other` that `self` entails. Both sides are minimised first and equalities
    /// of `self` take part as pairs of opposed inequalities. Keeping the
    /// equalities of `other` leaves affine relations that the new iterate
    /// satisfies exactly; the affine dimension can only grow a bounded number
    /// of times, so chains still stabilise.
    pub fn widen(&self, other: &Polyhedron) -> Result<Polyhedron> {
        self.check_dims(other)?;
        if self.is_empty() {
            return Ok(other.clone());
        }
        let p = self.cs.minimize();
        let q = other.cs.minimize();
        let mut kept: Vec<Constraint> = split_equalities(p.constraints()).into_iter().filter(|a| q.entails(a)).collect();
        kept.extend(q.constraints().iter().filter(|a| a.rel == Rel::Eq && p.entails(a)).cloned());
        Ok(Polyhedron::raw(self.dims.clone(), ConstraintSet::new(kept).minimize()))
    }

    /// Whether `self` lies inside the union of `ps`.
    pub fn included_in_union(&self, ps: &[Polyhedron]) -> Result<bool> {
        Ok(self.union_gap(ps)?.is_none())
    }

    /// A satisfiable piece of `self` outside the union of `ps`, if any.
    pub fn union_gap(&self, ps: &[Polyhedron]) -> Result<Option<ConstraintSet>> {
        for p in ps {
            self.check_dims(p)?;
        }
        Ok(gap(&self.cs, ps))
    }

    /// `p(A,B) :- c1, c2` body text, dimensions named positionally.
    pub fn render_body(&self) -> String {
        if self.is_empty() {
            return "1=0".to_string();
        }
        if self.cs.is_empty() {
            return "true".to_string();
        }
        let names: BTreeMap<Var, String> = self.dims.iter().enumerate().map(|(i, d)| (d.clone(), positional_name(i))).collect();
        let parts: Vec<String> =
            self.cs.constraints().iter().map(|c| crate::ast::print::constraint_with_names(c, &|v| names[v].clone())).collect();
        parts.join(", ")
    }
}

fn split_equalities(cs: &[Constraint]) -> Vec<Constraint> {
    let mut out = Vec::new();
    for c in cs {
        if c.rel == Rel::Eq {
            out.push(Constraint::new(c.expr.clone(), Rel::Ge));
            out.push(Constraint::new(c.expr.neg(), Rel::Ge));
        } else {
            out.push(c.clone());
        }
    }
    out
}

fn gap(q: &ConstraintSet, ps: &[Polyhedron]) -> Option<ConstraintSet> {
    if !q.satisfiable() {
        return None;
    }
    let Some((first, rest)) = ps.split_first() else { return Some(q.clone()) };
    for a in first.cs.constraints() {
        for d in negate_atomic(a) {
            let piece = q.with(d);
            if let Some(w) = gap(&piece, rest) {
                return Some(w);
            }
        }
    }
    None
}

/// Test helper: a polyhedron over `A, B, ...` from constraint text.
pub fn parse_polyhedron(arity: usize, text: &str) -> Result<Polyhedron> {
    let args: Vec<String> = (0..arity).map(positional_name).collect();
    let head = if arity == 0 { "p".to_string() } else { format!("p({})", args.join(",")) };
    let prog = crate::ast::parse_program(&format!("{head} :- {text}."))?;
    let clause = &prog.clauses[0];
    let vars: Vec<Var> = clause.head.args().iter().map(|a| a.as_var().cloned().expect("variable argument")).collect();
    let cs = ConstraintSet::new(clause.constraints.clone());
    let map: BTreeMap<Var, Var> = vars.iter().enumerate().map(|(i, v)| (v.clone(), Var::arg(i))).collect();
    let mut renamed = Vec::new();
    for v in cs.vars() {
        if !map.contains_key(&v) {
            return Err(Error::UnknownVariable(v.to_string()));
        }
    }
    for c in cs.constraints() {
        renamed.push(c.rename(&|v| map[v].clone()));
    }
    Polyhedron::new(arg_dims(arity), ConstraintSet::new(renamed))
}

impl Polyhedron {
    /// Whether the point (indexed like the dimensions) lies in the polyhedron.
    pub fn contains(&self, point: &[Rat]) -> bool {
        let env: BTreeMap<Var, Rat> = self.dims.iter().cloned().zip(point.iter().cloned()).collect();
        self.cs.holds_at(&env).unwrap_or(false)
    }
}

//! Data model for constrained Horn clause programs over linear arithmetic.
//!
//! Clauses follow the usual CLP shape `p(X) :- C, p1(X1), ..., pk(Xk)`. Atom
//! arguments are stored as linear terms so that the parser can keep the
//! program exactly as written; [`normalize_program`] flattens them into
//! pairwise-distinct variables.

mod normalize;
mod parse;
pub(crate) mod print;

pub use normalize::normalize_program;
pub use parse::{parse_pred_name, parse_program};
pub use print::{print_clause, print_constraint, print_program, PrintStyle};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Exact rational scalar used for every coefficient.
pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// A variable.
///
/// `Named` variables come from program text, `Arg` variables are the
/// positional dimensions of interpretation entries, and `Fresh` variables are
/// produced when clauses are renamed apart.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Named(Arc<str>),
    Arg(u32),
    Fresh(u32),
}

impl Var {
    pub fn named(name: &str) -> Var {
        Var::Named(Arc::from(name))
    }

    pub fn arg(i: usize) -> Var {
        Var::Arg(i as u32)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Named(n) => write!(f, "{n}"),
            Var::Arg(i) => write!(f, "{}", positional_name(*i as usize)),
            Var::Fresh(i) => write!(f, "_G{i}"),
        }
    }
}

/// `A, B, ..., Z, A1, B1, ...`
pub fn positional_name(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    match i / 26 {
        0 => letter.to_string(),
        n => format!("{letter}{n}"),
    }
}

/// Source of fresh variables. Each generator hands out increasing indices.
#[derive(Debug, Default, Clone)]
pub struct VarGen {
    next: u32,
}

impl VarGen {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var::Fresh(self.next);
        self.next += 1;
        v
    }

    pub fn fresh_n(&mut self, n: usize) -> Vec<Var> {
        (0..n).map(|_| self.fresh()).collect()
    }
}

/// Linear expression `sum(coeff * var) + constant`. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinExpr {
    coeffs: BTreeMap<Var, Rat>,
    constant: Rat,
}

impl Default for LinExpr {
    fn default() -> Self {
        LinExpr::constant(Rat::zero())
    }
}

impl LinExpr {
    pub fn constant(c: Rat) -> Self {
        LinExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, Rat::one());
        LinExpr { coeffs, constant: Rat::zero() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Var, Rat)>, constant: Rat) -> Self {
        let mut e = LinExpr::constant(constant);
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    pub fn coeffs(&self) -> &BTreeMap<Var, Rat> {
        &self.coeffs
    }

    pub fn constant_term(&self) -> &Rat {
        &self.constant
    }

    pub fn coeff(&self, v: &Var) -> Rat {
        self.coeffs.get(v).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The variable if this expression is exactly `1*v + 0`.
    pub fn as_var(&self) -> Option<&Var> {
        if !self.constant.is_zero() || self.coeffs.len() != 1 {
            return None;
        }
        let (v, c) = self.coeffs.iter().next()?;
        c.is_one().then_some(v)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.coeffs.keys()
    }

    pub fn add_term(&mut self, v: Var, c: Rat) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(v) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_constant(&mut self, c: &Rat) {
        self.constant += c;
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.clone();
        for (v, c) in &other.coeffs {
            out.add_term(v.clone(), c.clone());
        }
        out.constant += &other.constant;
        out
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, k: &Rat) -> LinExpr {
        if k.is_zero() {
            return LinExpr::default();
        }
        LinExpr { coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(), constant: &self.constant * k }
    }

    pub fn neg(&self) -> LinExpr {
        self.scale(&-Rat::one())
    }

    /// Replace `v` by `e` (exact substitution).
    pub fn substitute(&self, v: &Var, e: &LinExpr) -> LinExpr {
        match self.coeffs.get(v) {
            None => self.clone(),
            Some(c) => {
                let c = c.clone();
                let mut rest = self.clone();
                rest.coeffs.remove(v);
                rest.add(&e.scale(&c))
            }
        }
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> LinExpr {
        let mut out = LinExpr::constant(self.constant.clone());
        for (v, c) in &self.coeffs {
            out.add_term(f(v), c.clone());
        }
        out
    }

    pub fn eval(&self, point: &BTreeMap<Var, Rat>) -> Option<Rat> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            acc += c * point.get(v)?;
        }
        Some(acc)
    }

    /// Rescale so every coefficient and the constant are coprime integers.
    /// The sign is preserved.
    pub fn primitive(&self) -> LinExpr {
        use num_integer::Integer;
        let mut lcm = BigInt::one();
        for c in self.coeffs.values().chain(std::iter::once(&self.constant)) {
            lcm = lcm.lcm(c.denom());
        }
        let scaled: Vec<BigInt> = self
            .coeffs
            .values()
            .chain(std::iter::once(&self.constant))
            .map(|c| (c * Rat::from_integer(lcm.clone())).to_integer())
            .collect();
        let mut g = BigInt::zero();
        for n in &scaled {
            g = g.gcd(n);
        }
        if g.is_zero() {
            return LinExpr::default();
        }
        let factor = Rat::new(lcm, g);
        self.scale(&factor)
    }
}

impl fmt::Debug for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print::expr_to_string(self))
    }
}

/// Relation of an atomic constraint, read as `expr REL 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Ge,
    Gt,
}

/// `expr = 0`, `expr >= 0` or `expr > 0`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl Constraint {
    pub fn new(expr: LinExpr, rel: Rel) -> Self {
        Constraint { expr, rel }
    }

    pub fn eq(lhs: LinExpr, rhs: LinExpr) -> Self {
        Constraint::new(lhs.sub(&rhs), Rel::Eq)
    }

    pub fn ge(lhs: LinExpr, rhs: LinExpr) -> Self {
        Constraint::new(lhs.sub(&rhs), Rel::Ge)
    }

    pub fn gt(lhs: LinExpr, rhs: LinExpr) -> Self {
        Constraint::new(lhs.sub(&rhs), Rel::Gt)
    }

    /// The unsatisfiable constraint `1 = 0`.
    pub fn falsum() -> Self {
        Constraint::new(LinExpr::constant(Rat::one()), Rel::Eq)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.expr.vars()
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> Constraint {
        Constraint::new(self.expr.rename(f), self.rel)
    }

    pub fn substitute(&self, v: &Var, e: &LinExpr) -> Constraint {
        Constraint::new(self.expr.substitute(v, e), self.rel)
    }

    /// Truth value of a variable-free constraint.
    pub fn ground_truth(&self) -> Option<bool> {
        if !self.expr.is_constant() {
            return None;
        }
        let c = self.expr.constant_term();
        Some(match self.rel {
            Rel::Eq => c.is_zero(),
            Rel::Ge => !c.is_negative(),
            Rel::Gt => c.is_positive(),
        })
    }

    pub fn holds_at(&self, point: &BTreeMap<Var, Rat>) -> Option<bool> {
        let v = self.expr.eval(point)?;
        Some(match self.rel {
            Rel::Eq => v.is_zero(),
            Rel::Ge => !v.is_negative(),
            Rel::Gt => v.is_positive(),
        })
    }

    /// Scaled to coprime integer coefficients.
    pub fn primitive(&self) -> Constraint {
        let mut e = self.expr.primitive();
        if self.rel == Rel::Eq {
            // orient equalities so the leading coefficient is positive
            if let Some((_, c)) = e.coeffs.iter().next() {
                if c.is_negative() {
                    e = e.neg();
                }
            }
        }
        Constraint::new(e, self.rel)
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print::print_constraint(self))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", print::print_constraint(self))
    }
}

/// Dimension annotation of a predicate produced by the dimension transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Annotation {
    None,
    Exactly(u32),
    AtMost(u32),
}

impl Annotation {
    pub fn dimension(&self) -> Option<u32> {
        match self {
            Annotation::None => None,
            Annotation::Exactly(d) | Annotation::AtMost(d) => Some(*d),
        }
    }
}

/// Predicate symbol, possibly carrying a dimension annotation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PredId {
    pub base: Arc<str>,
    pub ann: Annotation,
}

/// Base name used for the annotated copies of the `false` head.
pub const FALSE_BASE: &str = "false";

impl PredId {
    pub fn new(base: &str) -> Self {
        PredId { base: Arc::from(base), ann: Annotation::None }
    }

    pub fn annotated(base: &str, ann: Annotation) -> Self {
        PredId { base: Arc::from(base), ann }
    }

    pub fn with_ann(&self, ann: Annotation) -> Self {
        PredId { base: self.base.clone(), ann }
    }

    pub fn exactly(&self, d: u32) -> Self {
        self.with_ann(Annotation::Exactly(d))
    }

    pub fn at_most(&self, d: u32) -> Self {
        self.with_ann(Annotation::AtMost(d))
    }

    pub fn is_annotated(&self) -> bool {
        self.ann != Annotation::None
    }

    pub fn unannotated(&self) -> Self {
        self.with_ann(Annotation::None)
    }
}

impl fmt::Debug for PredId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Human-facing form: `p`, `p(0)` for exactly-0, `p[1]` for at-most-1.
impl fmt::Display for PredId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ann {
            Annotation::None => write!(f, "{}", self.base),
            Annotation::Exactly(d) => write!(f, "{}({d})", self.base),
            Annotation::AtMost(d) => write!(f, "{}[{d}]", self.base),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: PredId,
    pub args: Vec<LinExpr>,
}

impl Atom {
    pub fn new(pred: PredId, args: Vec<LinExpr>) -> Self {
        Atom { pred, args }
    }

    pub fn from_vars(pred: PredId, vars: &[Var]) -> Self {
        Atom { pred, args: vars.iter().cloned().map(LinExpr::var).collect() }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> Atom {
        Atom { pred: self.pred.clone(), args: self.args.iter().map(|a| a.rename(f)).collect() }
    }

    /// Argument variables, if every argument is a plain variable.
    pub fn arg_vars(&self) -> Option<Vec<Var>> {
        self.args.iter().map(|a| a.as_var().cloned()).collect()
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pred)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(print::expr_to_string).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Head {
    False,
    Atom(Atom),
}

impl Head {
    pub fn pred(&self) -> Option<&PredId> {
        match self {
            Head::False => None,
            Head::Atom(a) => Some(&a.pred),
        }
    }

    pub fn atom(&self) -> Option<&Atom> {
        match self {
            Head::False => None,
            Head::Atom(a) => Some(a),
        }
    }

    pub fn args(&self) -> &[LinExpr] {
        match self {
            Head::False => &[],
            Head::Atom(a) => &a.args,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseId(pub Arc<str>);

impl ClauseId {
    pub fn new(s: &str) -> Self {
        ClauseId(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How a generated clause came about.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProvKind {
    /// Copy of a clause with at most one body atom.
    Linear,
    /// One of the dimension cases of a clause with several body atoms.
    NonlinearCase,
    /// `p[d] :- p(e)` copy clause.
    Epsilon,
    /// Fact standing in for a disjunct of a model of the given predicate.
    ModelFact(PredId),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Provenance {
    pub origin: Option<ClauseId>,
    pub kind: ProvKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub id: ClauseId,
    pub head: Head,
    pub constraints: Vec<Constraint>,
    pub body: Vec<Atom>,
    pub provenance: Option<Provenance>,
}

impl Clause {
    pub fn new(id: ClauseId, head: Head, constraints: Vec<Constraint>, body: Vec<Atom>) -> Self {
        Clause { id, head, constraints, body, provenance: None }
    }

    pub fn with_provenance(mut self, origin: Option<ClauseId>, kind: ProvKind) -> Self {
        self.provenance = Some(Provenance { origin, kind });
        self
    }

    pub fn is_linear(&self) -> bool {
        self.body.len() <= 1
    }

    pub fn head_pred(&self) -> Option<&PredId> {
        self.head.pred()
    }

    pub fn kind(&self) -> Option<&ProvKind> {
        self.provenance.as_ref().map(|p| &p.kind)
    }

    pub fn is_model_fact(&self) -> bool {
        matches!(self.kind(), Some(ProvKind::ModelFact(_)))
    }

    pub fn is_epsilon(&self) -> bool {
        matches!(self.kind(), Some(ProvKind::Epsilon))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for a in self.head.args() {
            out.extend(a.vars().cloned());
        }
        for c in &self.constraints {
            out.extend(c.vars().cloned());
        }
        for b in &self.body {
            for a in &b.args {
                out.extend(a.vars().cloned());
            }
        }
        out
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> Clause {
        Clause {
            id: self.id.clone(),
            head: match &self.head {
                Head::False => Head::False,
                Head::Atom(a) => Head::Atom(a.rename(f)),
            },
            constraints: self.constraints.iter().map(|c| c.rename(f)).collect(),
            body: self.body.iter().map(|b| b.rename(f)).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// Copy of the clause whose variables are all fresh.
    pub fn rename_apart(&self, gen: &mut VarGen) -> Clause {
        let map: BTreeMap<Var, Var> = self.vars().into_iter().map(|v| (v, gen.fresh())).collect();
        self.rename(&|v| map[v].clone())
    }
}

/// What "the program is unsafe" means: a False-headed clause is derivable, or
/// a designated (zero-arity) predicate is derivable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Query {
    False,
    Pred(PredId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub query: Query,
}

impl Default for Program {
    fn default() -> Self {
        Program { clauses: Vec::new(), query: Query::False }
    }
}

impl Program {
    pub fn new(clauses: Vec<Clause>) -> Self {
        Program { clauses, query: Query::False }
    }

    pub fn is_linear(&self) -> bool {
        self.clauses.iter().all(Clause::is_linear)
    }

    pub fn clause(&self, id: &ClauseId) -> Option<&Clause> {
        self.clauses.iter().find(|c| &c.id == id)
    }

    pub fn clause_index(&self) -> BTreeMap<ClauseId, usize> {
        self.clauses.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect()
    }

    pub fn clauses_for<'a>(&'a self, pred: &'a PredId) -> impl Iterator<Item = &'a Clause> + 'a {
        self.clauses.iter().filter(move |c| c.head_pred() == Some(pred))
    }

    pub fn false_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| c.head == Head::False)
    }

    /// Predicates in order of first occurrence.
    pub fn predicates(&self) -> Vec<PredId> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for c in &self.clauses {
            let atoms = c.head.atom().into_iter().chain(c.body.iter());
            for a in atoms {
                if seen.insert(a.pred.clone()) {
                    out.push(a.pred.clone());
                }
            }
        }
        out
    }

    /// Arity of every predicate. Fails on inconsistent use.
    pub fn arities(&self) -> Result<BTreeMap<PredId, usize>, crate::Error> {
        let mut out: BTreeMap<PredId, usize> = BTreeMap::new();
        if let Query::Pred(q) = &self.query {
            out.insert(q.clone(), 0);
        }
        for c in &self.clauses {
            for a in c.head.atom().into_iter().chain(c.body.iter()) {
                match out.get(&a.pred) {
                    Some(&n) if n != a.arity() => {
                        return Err(crate::Error::Arity { pred: a.pred.to_string(), expected: n, found: a.arity() })
                    }
                    _ => {
                        out.insert(a.pred.clone(), a.arity());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Whether every atom argument is a variable and no variable fills two argument positions of a clause.
    pub fn is_normalized(&self) -> bool {
        self.clauses.iter().all(|c| {
            let mut seen = BTreeSet::new();
            c.head.args().iter().chain(c.body.iter().flat_map(|b| b.args.iter())).all(|a| match a.as_var() {
                Some(v) => seen.insert(v.clone()),
                None => false,
            })
        })
    }

    pub fn has_annotations(&self) -> bool {
        self.predicates().iter().any(PredId::is_annotated)
    }
}

/// Maximum number of body atoms over all clauses (0 for an empty program).
pub fn max_body_atoms(p: &Program) -> usize {
    p.clauses.iter().map(|c| c.body.len()).max().unwrap_or(0)
}

//! Exact two-phase simplex over the rationals, used to decide feasibility of
//! constraint conjunctions with strict inequalities.

use crate::ast::{Constraint, Rat, Rel, Var};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

struct Tableau {
    rows: Vec<Vec<Rat>>,
    rhs: Vec<Rat>,
    basis: Vec<usize>,
}

enum Run {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut [Rat], obj_val: &mut Rat) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for x in self.rows[r].iter_mut() {
                if !x.is_zero() {
                    *x /= &p;
                }
            }
            self.rhs[r] /= &p;
        }
        let (pr, prhs) = (self.rows[r].clone(), self.rhs[r].clone());
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (x, y) in self.rows[i].iter_mut().zip(&pr) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            self.rhs[i] -= &f * &prhs;
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for (x, y) in obj.iter_mut().zip(&pr) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
            *obj_val += &f * &prhs;
        }
        self.basis[r] = c;
    }

    /// Maximises `obj_val + obj.x` over columns below `ncols`, by Bland's rule.
    fn run(&mut self, ncols: usize, obj: &mut [Rat], obj_val: &mut Rat) -> Run {
        loop {
            let Some(c) = (0..ncols).find(|&j| obj[j].is_positive()) else { return Run::Optimal };
            let mut best: Option<(usize, Rat)> = None;
            for r in 0..self.rows.len() {
                if !self.rows[r][c].is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / &self.rows[r][c];
                let better = match &best {
                    None => true,
                    Some((b, br)) => ratio < *br || (ratio == *br && self.basis[r] < self.basis[*b]),
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            let Some((r, _)) = best else { return Run::Unbounded };
            self.pivot(r, c, obj, obj_val);
        }
    }
}

/// Whether the conjunction has a rational solution.
pub(crate) fn feasible(cs: &[Constraint]) -> bool {
    let mut index: BTreeMap<&Var, usize> = BTreeMap::new();
    for c in cs {
        for v in c.expr.coeffs().keys() {
            let n = index.len();
            index.entry(v).or_insert(n);
        }
    }
    let n = index.len();
    let strict = cs.iter().any(|c| c.rel == Rel::Gt);
    // columns: x+ and x- per variable, then t (if strict), then one slack per inequality
    let t_col = 2 * n;
    let first_slack = if strict { t_col + 1 } else { t_col };
    let ineqs = cs.iter().filter(|c| c.rel != Rel::Eq).count() + usize::from(strict);
    let nstruct = first_slack + ineqs;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut slack = first_slack;
    let mut push = |coeffs: Vec<(usize, Rat)>, has_slack: bool, b: Rat, rows: &mut Vec<Vec<Rat>>, rhs: &mut Vec<Rat>| {
        let mut row = vec![Rat::zero(); nstruct];
        for (j, k) in coeffs {
            row[j] += k;
        }
        if has_slack {
            row[slack] = -Rat::one();
            slack += 1;
        }
        rows.push(row);
        rhs.push(b);
    };
    for c in cs {
        // expr >= 0 becomes sum a.x (- t) - s = -constant
        let mut coeffs = Vec::new();
        for (v, k) in c.expr.coeffs() {
            let j = index[v];
            coeffs.push((2 * j, k.clone()));
            coeffs.push((2 * j + 1, -k.clone()));
        }
        if c.rel == Rel::Gt {
            coeffs.push((t_col, -Rat::one()));
        }
        push(coeffs, c.rel != Rel::Eq, -c.expr.constant_term().clone(), &mut rows, &mut rhs);
    }
    if strict {
        // t <= 1, as -t - s = -1
        push(vec![(t_col, -Rat::one())], true, -Rat::one(), &mut rows, &mut rhs);
    }
    for (row, b) in rows.iter_mut().zip(rhs.iter_mut()) {
        if b.is_negative() {
            for x in row.iter_mut() {
                *x = -x.clone();
            }
            *b = -b.clone();
        }
    }
    let m = rows.len();
    let total = nstruct + m;
    for (i, row) in rows.iter_mut().enumerate() {
        row.resize(total, Rat::zero());
        row[nstruct + i] = Rat::one();
    }
    let mut t = Tableau { rows, rhs, basis: (nstruct..total).collect() };
    // phase one: maximise minus the sum of the artificials
    let mut obj = vec![Rat::zero(); total];
    let mut val = Rat::zero();
    for (row, b) in t.rows.iter().zip(&t.rhs) {
        for (o, x) in obj.iter_mut().zip(&row[..nstruct]) {
            *o += x;
        }
        val -= b;
    }
    t.run(nstruct, &mut obj, &mut val);
    if val.is_negative() {
        return false;
    }
    if !strict {
        return true;
    }
    // drive remaining artificials out of the basis, dropping redundant rows
    let mut r = 0;
    while r < t.rows.len() {
        if t.basis[r] >= nstruct {
            match (0..nstruct).find(|&j| !t.rows[r][j].is_zero()) {
                Some(c) => t.pivot(r, c, &mut obj, &mut val),
                None => {
                    t.rows.remove(r);
                    t.rhs.remove(r);
                    t.basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    // phase two: maximise t
    let mut obj = vec![Rat::zero(); total];
    obj[t_col] = Rat::one();
    let mut val = Rat::zero();
    for r in 0..t.rows.len() {
        let b = t.basis[r];
        if !obj[b].is_zero() {
            let f = obj[b].clone();
            for (x, y) in obj.iter_mut().zip(&t.rows[r]) {
                *x -= &f * y;
            }
            val += &f * &t.rhs[r];
        }
    }
    match t.run(nstruct, &mut obj, &mut val) {
        Run::Unbounded => unreachable!("t is bounded above"),
        Run::Optimal => val.is_positive(),
    }
}

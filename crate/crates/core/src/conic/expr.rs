//! Sparse affine expressions in the decision variables, and matrices of them.

use crate::Mat;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// `Σ coeff_i · x_{idx_i} + constant`, kept sorted by variable index with
/// duplicates merged.
#[derive(Clone, Debug, Default)]
pub struct LinExpr {
    pub(crate) terms: Vec<(usize, f64)>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn variable(idx: usize) -> Self {
        LinExpr {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(idx: usize, coeff: f64) -> Self {
        LinExpr {
            terms: vec![(idx, coeff)],
            constant: 0.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// Add `coeff * x_idx` in place.
    pub fn push(&mut self, idx: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((idx, coeff));
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn scaled(&self, s: f64) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|&(i, c)| (i, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    /// Sort by index, merge duplicates, drop negligible coefficients.
    pub fn compact(&mut self) {
        self.terms.sort_unstable_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c.abs() > 1e-300);
        self.terms = out;
    }

    /// Evaluate at a primal point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(i, c)| c * x[i])
            .sum::<f64>()
            + self.constant
    }

    pub fn sum<'a>(exprs: impl IntoIterator<Item = &'a LinExpr>) -> LinExpr {
        let mut acc = LinExpr::zero();
        for e in exprs {
            acc += e.clone();
        }
        acc
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + rhs.neg()
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, s: f64) -> LinExpr {
        self.scaled(s)
    }
}

/// A dense matrix of affine expressions (column-major).
#[derive(Clone, Debug)]
pub struct MatExpr {
    nrows: usize,
    ncols: usize,
    entries: Vec<LinExpr>,
}

impl MatExpr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        MatExpr {
            nrows,
            ncols,
            entries: vec![LinExpr::zero(); nrows * ncols],
        }
    }

    pub fn from_const(m: &Mat) -> Self {
        let mut out = MatExpr::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out.entries[j * m.nrows() + i] = LinExpr::constant(m[(i, j)]);
            }
        }
        out
    }

    /// `expr · I_d`.
    pub fn scaled_identity(expr: &LinExpr, d: usize) -> Self {
        let mut out = MatExpr::zeros(d, d);
        for i in 0..d {
            *out.entry_mut(i, i) = expr.clone();
        }
        out
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[j * self.nrows + i]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.entries[j * self.nrows + i]
    }

    pub fn transpose(&self) -> MatExpr {
        let mut out = MatExpr::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                *out.entry_mut(j, i) = self.entry(i, j).clone();
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> MatExpr {
        MatExpr {
            nrows: self.nrows,
            ncols: self.ncols,
            entries: self.entries.iter().map(|e| e.scaled(s)).collect(),
        }
    }

    pub fn add(&self, rhs: &MatExpr) -> MatExpr {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        MatExpr {
            nrows: self.nrows,
            ncols: self.ncols,
            entries: self
                .entries
                .iter()
                .zip(rhs.entries.iter())
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn add_const(&self, rhs: &Mat) -> MatExpr {
        self.add(&MatExpr::from_const(rhs))
    }

    /// `A · self` for a numeric `A`.
    pub fn left_mul(&self, a: &Mat) -> MatExpr {
        assert_eq!(a.ncols(), self.nrows);
        let mut out = MatExpr::zeros(a.nrows(), self.ncols);
        for j in 0..self.ncols {
            for i in 0..a.nrows() {
                let mut e = LinExpr::zero();
                for k in 0..self.nrows {
                    let c = a[(i, k)];
                    if c != 0.0 {
                        e += self.entry(k, j).scaled(c);
                    }
                }
                e.compact();
                *out.entry_mut(i, j) = e;
            }
        }
        out
    }

    /// `self · B` for a numeric `B`.
    pub fn right_mul(&self, b: &Mat) -> MatExpr {
        assert_eq!(self.ncols, b.nrows());
        let mut out = MatExpr::zeros(self.nrows, b.ncols());
        for j in 0..b.ncols() {
            for i in 0..self.nrows {
                let mut e = LinExpr::zero();
                for k in 0..self.ncols {
                    let c = b[(k, j)];
                    if c != 0.0 {
                        e += self.entry(i, k).scaled(c);
                    }
                }
                e.compact();
                *out.entry_mut(i, j) = e;
            }
        }
        out
    }

    /// Stack four blocks `[[a, b], [c, d]]`.
    pub fn block2x2(a: &MatExpr, b: &MatExpr, c: &MatExpr, d: &MatExpr) -> MatExpr {
        assert_eq!(a.nrows, b.nrows);
        assert_eq!(c.nrows, d.nrows);
        assert_eq!(a.ncols, c.ncols);
        assert_eq!(b.ncols, d.ncols);
        let nr = a.nrows + c.nrows;
        let nc = a.ncols + b.ncols;
        let mut out = MatExpr::zeros(nr, nc);
        for j in 0..a.ncols {
            for i in 0..a.nrows {
                *out.entry_mut(i, j) = a.entry(i, j).clone();
            }
            for i in 0..c.nrows {
                *out.entry_mut(a.nrows + i, j) = c.entry(i, j).clone();
            }
        }
        for j in 0..b.ncols {
            for i in 0..b.nrows {
                *out.entry_mut(i, a.ncols + j) = b.entry(i, j).clone();
            }
            for i in 0..d.nrows {
                *out.entry_mut(a.nrows + i, a.ncols + j) = d.entry(i, j).clone();
            }
        }
        out
    }

    /// The symmetric arrow block `[[diag, off],[offᵀ, corner]]`.
    pub fn symmetric_arrow(diag: &MatExpr, off: &MatExpr, corner: &MatExpr) -> MatExpr {
        MatExpr::block2x2(diag, off, &off.transpose(), corner)
    }

    /// Stack a list of blocks vertically.
    pub fn vstack(blocks: &[MatExpr]) -> MatExpr {
        assert!(!blocks.is_empty());
        let nc = blocks[0].ncols;
        let nr: usize = blocks.iter().map(|b| b.nrows).sum();
        let mut out = MatExpr::zeros(nr, nc);
        let mut row0 = 0;
        for b in blocks {
            assert_eq!(b.ncols, nc);
            for j in 0..nc {
                for i in 0..b.nrows {
                    *out.entry_mut(row0 + i, j) = b.entry(i, j).clone();
                }
            }
            row0 += b.nrows;
        }
        out
    }

    /// Evaluate all entries at a primal point.
    pub fn eval(&self, x: &[f64]) -> Mat {
        Mat::from_fn(self.nrows, self.ncols, |i, j| self.entry(i, j).eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_merges_terms() {
        let mut e = LinExpr::term(3, 1.0) + LinExpr::term(1, 2.0) + LinExpr::term(3, -0.5);
        e.compact();
        assert_eq!(e.terms, vec![(1, 2.0), (3, 0.5)]);
    }

    #[test]
    fn eval_matches_by_hand() {
        let e = LinExpr::term(0, 2.0) + LinExpr::term(2, -1.0) + LinExpr::constant(3.0);
        assert_eq!(e.eval(&[1.0, 9.0, 4.0]), 2.0 - 4.0 + 3.0);
    }

    #[test]
    fn matrix_products() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let x = MatExpr::from_const(&Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let prod = x.left_mul(&a).eval(&[]);
        assert_eq!(prod, a);
        let prod2 = x.right_mul(&a).eval(&[]);
        assert_eq!(prod2, a);
    }
}

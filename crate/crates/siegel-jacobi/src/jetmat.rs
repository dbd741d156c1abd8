//! Matrices with jet entries, for pushing whole matrix formulas through a
//! Taylor expansion in one go.
//!
//! Inversion and determinants use Gaussian elimination with pivoting on the
//! base-point value, so they require the matrix to be invertible *at the base
//! point*; the expansion then follows automatically.

use crate::jet::{Jet, JetContext};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Clone)]
pub struct JetMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<Jet>,
}

impl JetMatrix {
    pub fn zero(ctx: &Arc<JetContext>, nrows: usize, ncols: usize) -> JetMatrix {
        JetMatrix { nrows, ncols, data: vec![Jet::zero(ctx); nrows * ncols] }
    }

    pub fn identity(ctx: &Arc<JetContext>, n: usize) -> JetMatrix {
        let mut m = JetMatrix::zero(ctx, n, n);
        for i in 0..n {
            m.data[i * n + i] = Jet::one(ctx);
        }
        m
    }

    pub fn from_fn<F: FnMut(usize, usize) -> Jet>(
        nrows: usize,
        ncols: usize,
        mut f: F,
    ) -> JetMatrix {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        JetMatrix { nrows, ncols, data }
    }

    /// Constant matrix lifted into a jet context.
    pub fn from_complex(ctx: &Arc<JetContext>, m: &DMatrix<Complex64>) -> JetMatrix {
        JetMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Jet::constant(ctx, m[(i, j)]))
    }

    pub fn from_real(ctx: &Arc<JetContext>, m: &DMatrix<f64>) -> JetMatrix {
        JetMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            Jet::constant(ctx, Complex64::new(m[(i, j)], 0.0))
        })
    }

    /// Base-point values of all entries.
    pub fn value(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j).value())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn ctx(&self) -> &Arc<JetContext> {
        self.data[0].ctx()
    }

    pub fn get(&self, i: usize, j: usize) -> &Jet {
        assert!(i < self.nrows && j < self.ncols);
        &self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Jet) {
        assert!(i < self.nrows && j < self.ncols);
        self.data[i * self.ncols + j] = v;
    }

    pub fn block(&self, i0: usize, j0: usize, nrows: usize, ncols: usize) -> JetMatrix {
        assert!(i0 + nrows <= self.nrows && j0 + ncols <= self.ncols);
        JetMatrix::from_fn(nrows, ncols, |i, j| self.get(i0 + i, j0 + j).clone())
    }

    pub fn transpose(&self) -> JetMatrix {
        JetMatrix::from_fn(self.ncols, self.nrows, |i, j| self.get(j, i).clone())
    }

    pub fn conj(&self) -> JetMatrix {
        JetMatrix::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j).conj())
    }

    pub fn add(&self, other: &JetMatrix) -> JetMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        JetMatrix::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &JetMatrix) -> JetMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        JetMatrix::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn neg(&self) -> JetMatrix {
        self.scale(Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, s: Complex64) -> JetMatrix {
        JetMatrix::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j).scale(s))
    }

    pub fn scale_jet(&self, s: &Jet) -> JetMatrix {
        JetMatrix::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j) * s)
    }

    pub fn mul(&self, other: &JetMatrix) -> JetMatrix {
        assert_eq!(self.ncols, other.nrows, "matrix dimensions do not match");
        // Careful with zero-size factors (they show up when m = 0): only
        // reach for a context if some accumulator actually needs one.
        let ctx = self.data.first().or_else(|| other.data.first()).map(|j| j.ctx());
        JetMatrix::from_fn(self.nrows, other.ncols, |i, j| {
            let mut acc = Jet::zero(ctx.expect("product of empty matrices has no context"));
            for k in 0..self.ncols {
                acc = &acc + &(self.get(i, k) * other.get(k, j));
            }
            acc
        })
    }

    pub fn trace(&self) -> Jet {
        assert_eq!(self.nrows, self.ncols);
        let mut acc = Jet::zero(self.ctx());
        for i in 0..self.nrows {
            acc = &acc + self.get(i, i);
        }
        acc
    }

    /// Determinant by elimination with partial pivoting on base-point
    /// magnitude.  Requires the base-point matrix to be nonsingular.
    pub fn det(&self) -> Jet {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut a = self.clone();
        let mut det = Jet::one(self.ctx());
        let mut sign = 1.0;
        for col in 0..n {
            let mut piv = col;
            let mut best = a.get(col, col).value().norm();
            for r in col + 1..n {
                let cand = a.get(r, col).value().norm();
                if cand > best {
                    best = cand;
                    piv = r;
                }
            }
            assert!(best > 1e-250, "determinant pivot vanishes at the base point");
            if piv != col {
                for c in 0..n {
                    let tmp = a.get(col, c).clone();
                    a.set(col, c, a.get(piv, c).clone());
                    a.set(piv, c, tmp);
                }
                sign = -sign;
            }
            let pivot = a.get(col, col).clone();
            det = &det * &pivot;
            let pinv = pivot.inverse();
            for r in col + 1..n {
                let factor = a.get(r, col) * &pinv;
                for c in col..n {
                    let v = a.get(r, c) - &(&factor * a.get(col, c));
                    a.set(r, c, v);
                }
            }
        }
        det.scale_re(sign)
    }

    /// Inverse by Gauss-Jordan elimination, pivoting on base-point magnitude.
    pub fn inverse(&self) -> JetMatrix {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut a = self.clone();
        let mut b = JetMatrix::identity(self.ctx(), n);
        for col in 0..n {
            let mut piv = col;
            let mut best = a.get(col, col).value().norm();
            for r in col + 1..n {
                let cand = a.get(r, col).value().norm();
                if cand > best {
                    best = cand;
                    piv = r;
                }
            }
            assert!(best > 1e-250, "matrix is singular at the base point");
            if piv != col {
                for c in 0..n {
                    let tmp = a.get(col, c).clone();
                    a.set(col, c, a.get(piv, c).clone());
                    a.set(piv, c, tmp);
                    let tmp = b.get(col, c).clone();
                    b.set(col, c, b.get(piv, c).clone());
                    b.set(piv, c, tmp);
                }
            }
            let pinv = a.get(col, col).inverse();
            for c in 0..n {
                let v = a.get(col, c) * &pinv;
                a.set(col, c, v);
                let v = b.get(col, c) * &pinv;
                b.set(col, c, v);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col).clone();
                if factor.max_abs() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let v = a.get(r, c) - &(&factor * a.get(col, c));
                    a.set(r, c, v);
                    let v = b.get(r, c) - &(&factor * b.get(col, c));
                    b.set(r, c, v);
                }
            }
        }
        b
    }

    fn coeff_norm_bound(&self) -> f64 {
        // Induced row-sum norm with each entry measured in the l1 coefficient
        // norm, which is submultiplicative for truncated expansions.
        let mut best: f64 = 0.0;
        for i in 0..self.nrows {
            let mut row = 0.0;
            for j in 0..self.ncols {
                row += self.get(i, j).coeffs().iter().map(|z| z.norm()).sum::<f64>();
            }
            best = best.max(row);
        }
        best
    }

    /// Matrix exponential truncated to the jet order.
    ///
    /// When every entry vanishes at the base point the series terminates on
    /// its own after `order` terms.  Otherwise scaling and squaring keeps the
    /// Taylor series convergent.
    pub fn exp_truncated(&self) -> JetMatrix {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let ctx = self.ctx().clone();
        let all_const_zero =
            (0..n).all(|i| (0..n).all(|j| self.get(i, j).value().norm() == 0.0));
        if all_const_zero {
            let mut acc = JetMatrix::identity(&ctx, n);
            let mut term = JetMatrix::identity(&ctx, n);
            for j in 1..=ctx.order() {
                term = term.mul(self).scale(Complex64::new(1.0 / j as f64, 0.0));
                acc = acc.add(&term);
            }
            return acc;
        }
        let bound = self.coeff_norm_bound();
        let mut s = 0u32;
        while bound / f64::powi(2.0, s as i32) > 0.5 {
            s += 1;
        }
        let scaled = self.scale(Complex64::new(f64::powi(2.0, s as i32).recip(), 0.0));
        let mut acc = JetMatrix::identity(&ctx, n);
        let mut term = JetMatrix::identity(&ctx, n);
        for j in 1..=40 {
            term = term.mul(&scaled).scale(Complex64::new(1.0 / j as f64, 0.0));
            acc = acc.add(&term);
            let sz: f64 = term.coeff_norm_bound();
            if sz < 1e-19 {
                break;
            }
        }
        for _ in 0..s {
            acc = acc.mul(&acc);
        }
        acc
    }

    /// Largest coefficient magnitude over all entries.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|j| j.max_abs()).fold(0.0, f64::max)
    }
}

impl std::fmt::Debug for JetMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "JetMatrix {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                writeln!(f, "  ({i},{j}): {:?}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(ctx: &Arc<JetContext>) -> JetMatrix {
        let x = Jet::variable(ctx, 0);
        let y = Jet::variable(ctx, 1);
        let mut m = JetMatrix::identity(ctx, 2).scale(c(2.0, 0.3));
        m.set(0, 1, &x + &y.scale(c(0.0, 0.5)));
        m.set(1, 0, x.powi(2).scale_re(0.7));
        m
    }

    #[test]
    fn inverse_multiplies_to_identity() {
        let ctx = JetContext::new(&["x", "y"], 4);
        let m = sample(&ctx);
        let p = m.mul(&m.inverse());
        let err = p.sub(&JetMatrix::identity(&ctx, 2)).max_abs();
        assert!(err < 1e-13, "residual {err}");
    }

    #[test]
    fn det_matches_cofactor_formula_for_2x2() {
        let ctx = JetContext::new(&["x", "y"], 4);
        let m = sample(&ctx);
        let want = &(m.get(0, 0) * m.get(1, 1)) - &(m.get(0, 1) * m.get(1, 0));
        let err = (&m.det() - &want).max_abs();
        assert!(err < 1e-13, "residual {err}");
    }

    #[test]
    fn exp_inverse_is_exp_of_negation() {
        let ctx = JetContext::new(&["x", "y"], 3);
        let x = Jet::variable(&ctx, 0);
        let y = Jet::variable(&ctx, 1);
        let mut m = JetMatrix::zero(&ctx, 2, 2);
        m.set(0, 0, Jet::constant(&ctx, c(0.2, 0.0)));
        m.set(0, 1, &Jet::constant(&ctx, c(1.1, -0.4)) + &x);
        m.set(1, 0, y.scale_re(0.6));
        m.set(1, 1, Jet::constant(&ctx, c(-0.3, 0.2)));
        let p = m.exp_truncated().mul(&m.neg().exp_truncated());
        let err = p.sub(&JetMatrix::identity(&ctx, 2)).max_abs();
        assert!(err < 1e-10, "residual {err}");
    }

    #[test]
    fn nilpotent_exp_terminates_exactly() {
        let ctx = JetContext::new(&["t"], 4);
        let t = Jet::variable(&ctx, 0);
        let mut m = JetMatrix::zero(&ctx, 2, 2);
        m.set(0, 1, t.clone());
        let e = m.exp_truncated();
        // exp([[0, t], [0, 0]]) = [[1, t], [0, 1]].
        assert!((e.get(0, 1) - &t).max_abs() < 1e-15);
        assert!((e.get(0, 0) - &Jet::one(&ctx)).max_abs() < 1e-15);
    }
}

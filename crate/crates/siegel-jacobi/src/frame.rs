//! Real coordinate systems for the two models.
//!
//! The upper half space model carries a symmetric complex matrix `Omega =
//! X + iY` with `Y` positive definite, together with a complex `m x n` block
//! `Z = U + iV`.  The disk model carries a symmetric `W` with `I - conj(W) W`
//! positive definite and a complex block `eta`.
//!
//! Coordinate order is fixed everywhere: the upper triangle of the real part
//! row-major, then the upper triangle of the imaginary part, then the real
//! part of the block row-major, then its imaginary part.  A symmetric pair
//! `(i,j)`/`(j,i)` is one coordinate, indexed with `i <= j`.

use crate::jet::{Jet, JetContext};
use crate::jetmat::JetMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Model {
    /// Upper half space coordinates (x, y, u, v).
    Half,
    /// Bounded disk coordinates (Re w, Im w, Re eta, Im eta).
    Disk,
}

#[derive(Clone, Debug)]
pub struct CoordFrame {
    model: Model,
    n: usize,
    m: usize,
    names: Vec<String>,
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push((i, j));
        }
    }
    out
}

impl CoordFrame {
    pub fn new(model: Model, n: usize, m: usize) -> CoordFrame {
        assert!(n >= 1);
        let (a, b, c, d) = match model {
            Model::Half => ("x", "y", "u", "v"),
            Model::Disk => ("wa", "wb", "ea", "eb"),
        };
        let mut names = Vec::new();
        for &(i, j) in &upper_pairs(n) {
            names.push(format!("{a}{}{}", i + 1, j + 1));
        }
        for &(i, j) in &upper_pairs(n) {
            names.push(format!("{b}{}{}", i + 1, j + 1));
        }
        for k in 0..m {
            for l in 0..n {
                names.push(format!("{c}{}{}", k + 1, l + 1));
            }
        }
        for k in 0..m {
            for l in 0..n {
                names.push(format!("{d}{}{}", k + 1, l + 1));
            }
        }
        CoordFrame { model, n, m, names }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ncoords(&self) -> usize {
        self.n * (self.n + 1) + 2 * self.m * self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ctx(&self, order: usize) -> Arc<JetContext> {
        JetContext::new(&self.names, order)
    }

    fn sym_offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j < self.n);
        // Position of (i,j) in the row-major upper triangle.
        i * self.n - i * (i + 1) / 2 + j
    }

    /// Coordinate index of Re of the symmetric matrix entry (i,j).
    pub fn sym_re(&self, i: usize, j: usize) -> usize {
        self.sym_offset(i, j)
    }

    /// Coordinate index of Im of the symmetric matrix entry (i,j).
    pub fn sym_im(&self, i: usize, j: usize) -> usize {
        self.n * (self.n + 1) / 2 + self.sym_offset(i, j)
    }

    /// Coordinate index of Re of the block entry (k,l), `k < m`, `l < n`.
    pub fn blk_re(&self, k: usize, l: usize) -> usize {
        assert!(k < self.m && l < self.n);
        self.n * (self.n + 1) + k * self.n + l
    }

    /// Coordinate index of Im of the block entry (k,l).
    pub fn blk_im(&self, k: usize, l: usize) -> usize {
        assert!(k < self.m && l < self.n);
        self.n * (self.n + 1) + self.m * self.n + k * self.n + l
    }

    /// The distinguished base point: `iI` (half model) or the origin (disk).
    pub fn base_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.ncoords()];
        if self.model == Model::Half {
            for i in 0..self.n {
                p[self.sym_im(i, i)] = 1.0;
            }
        }
        p
    }

    /// Coordinate germs at a point: each entry is `p_i + x_i`.
    pub fn point_jets(&self, ctx: &Arc<JetContext>, p: &[f64]) -> Vec<Jet> {
        assert_eq!(p.len(), self.ncoords());
        assert_eq!(ctx.nvars(), self.ncoords());
        (0..p.len())
            .map(|i| Jet::variable_about(ctx, i, Complex64::new(p[i], 0.0)))
            .collect()
    }

    /// The symmetric matrix (Omega or W) assembled from coordinate jets.
    pub fn sym_matrix(&self, coords: &[Jet]) -> JetMatrix {
        JetMatrix::from_fn(self.n, self.n, |i, j| {
            let re = &coords[self.sym_re(i, j)];
            let im = &coords[self.sym_im(i, j)];
            re + &im.scale(Complex64::new(0.0, 1.0))
        })
    }

    /// The block matrix (Z or eta) assembled from coordinate jets.
    pub fn blk_matrix(&self, coords: &[Jet]) -> JetMatrix {
        JetMatrix::from_fn(self.m, self.n, |k, l| {
            let re = &coords[self.blk_re(k, l)];
            let im = &coords[self.blk_im(k, l)];
            re + &im.scale(Complex64::new(0.0, 1.0))
        })
    }

    /// Numeric (symmetric, block) matrices at a point.
    pub fn matrices(&self, p: &[f64]) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        assert_eq!(p.len(), self.ncoords());
        let sym = DMatrix::from_fn(self.n, self.n, |i, j| {
            Complex64::new(p[self.sym_re(i, j)], p[self.sym_im(i, j)])
        });
        let blk = DMatrix::from_fn(self.m, self.n, |k, l| {
            Complex64::new(p[self.blk_re(k, l)], p[self.blk_im(k, l)])
        });
        (sym, blk)
    }

    /// Coordinates of a (symmetric, block) matrix pair.  The symmetric input
    /// is averaged across the diagonal to absorb roundoff.
    pub fn coords_of(&self, sym: &DMatrix<Complex64>, blk: &DMatrix<Complex64>) -> Vec<f64> {
        assert_eq!(sym.nrows(), self.n);
        assert_eq!(blk.nrows(), self.m);
        assert_eq!(blk.ncols(), self.n);
        let mut p = vec![0.0; self.ncoords()];
        for i in 0..self.n {
            for j in i..self.n {
                let avg = (sym[(i, j)] + sym[(j, i)]) * 0.5;
                p[self.sym_re(i, j)] = avg.re;
                p[self.sym_im(i, j)] = avg.im;
            }
        }
        for k in 0..self.m {
            for l in 0..self.n {
                p[self.blk_re(k, l)] = blk[(k, l)].re;
                p[self.blk_im(k, l)] = blk[(k, l)].im;
            }
        }
        p
    }

    /// Coordinate jets of a jet-valued (symmetric, block) matrix pair, the
    /// inverse of [`CoordFrame::sym_matrix`]/[`CoordFrame::blk_matrix`] up to
    /// symmetrization.
    pub fn coords_of_jets(&self, sym: &JetMatrix, blk: &JetMatrix) -> Vec<Jet> {
        let mut out = Vec::with_capacity(self.ncoords());
        for _ in 0..self.ncoords() {
            out.push(Jet::zero(sym.ctx()));
        }
        for i in 0..self.n {
            for j in i..self.n {
                let avg = (sym.get(i, j) + sym.get(j, i)).scale(Complex64::new(0.5, 0.0));
                out[self.sym_re(i, j)] = avg.re();
                out[self.sym_im(i, j)] = avg.im();
            }
        }
        for k in 0..self.m {
            for l in 0..self.n {
                let e = blk.get(k, l);
                out[self.blk_re(k, l)] = e.re();
                out[self.blk_im(k, l)] = e.im();
            }
        }
        out
    }
}

//! The invariant Riemannian metrics on the half-space and disk models, the
//! invariant volume density, metric pullback, and a Laplace-Beltrami
//! assembler.
//!
//! A metric is stored as an *evaluator*: point -> Gram matrix in the frame
//! coordinates.  Derivatives of the metric (needed by Laplace-Beltrami and
//! by pullbacks) come from running the same evaluator over jet-valued
//! points, so there is no symbolic tensor calculus anywhere.
//!
//! The quadratic forms are transcribed as matrix trace expressions in
//! `dOmega`, `dZ` (resp. `dW`, `deta`) and their conjugates, then converted
//! to real Gram matrices by polarization over the coordinate directions.
//! A symmetric pair (i,j)/(j,i) is one coordinate, so the direction matrix
//! for an off-diagonal coordinate is `E_ij + E_ji`.

use crate::error::{SjError, SjResult};
use crate::frame::{CoordFrame, Model};
use crate::jet::{Jet, JetContext};
use crate::jetmat::JetMatrix;
use crate::testfn::Expr;
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    /// The invariant metric of the frame's model.
    Invariant,
    /// Identity Gram matrix at every point (test oracle).
    Euclidean,
}

#[derive(Clone, Debug)]
pub struct MetricTensor {
    frame: CoordFrame,
    a: f64,
    b: f64,
    kind: Kind,
}

/// `A tr(Y^{-1} dOmega Y^{-1} dOmega-bar)` on the half space without block.
pub fn metric_h(n: usize, a: f64) -> MetricTensor {
    assert!(a > 0.0);
    MetricTensor { frame: CoordFrame::new(Model::Half, n, 0), a, b: 1.0, kind: Kind::Invariant }
}

/// The half-space metric with block coupling:
/// `A tr(Y^{-1} dOmega Y^{-1} dOmega-bar)`
/// `+ B { tr(Y^{-1} tV V Y^{-1} dOmega Y^{-1} dOmega-bar) + tr(Y^{-1} t(dZ) dZ-bar)`
/// `     - tr(V Y^{-1} dOmega Y^{-1} t(dZ-bar)) - tr(V Y^{-1} dOmega-bar Y^{-1} t(dZ)) }`.
pub fn metric_hc(n: usize, m: usize, a: f64, b: f64) -> MetricTensor {
    assert!(a > 0.0 && b > 0.0);
    MetricTensor { frame: CoordFrame::new(Model::Half, n, m), a, b, kind: Kind::Invariant }
}

/// The disk-model metric: `4A tr((I-WW-bar)^{-1} dW (I-W-bar W)^{-1} dW-bar)`
/// plus nine `4B`-weighted eta-coupling traces.
pub fn metric_d(n: usize, m: usize, a: f64, b: f64) -> MetricTensor {
    assert!(a > 0.0 && b > 0.0);
    MetricTensor { frame: CoordFrame::new(Model::Disk, n, m), a, b, kind: Kind::Invariant }
}

/// Identity Gram matrix in the given frame; oracle for flat Laplacians.
pub fn euclidean(frame: CoordFrame) -> MetricTensor {
    MetricTensor { frame, a: 1.0, b: 1.0, kind: Kind::Euclidean }
}

/// Closed-form Gram matrix of the scalar disk metric (`n = m = 1`,
/// `A = B = 1`) at `W = w`, `eta`, written on the real coordinates
/// `(wa, wb, ea, eb)`.  This is an independent hand-derived formula, kept
/// public so both the unit tests and the verification harness can
/// cross-check the jet-built metric against it coefficient by coefficient.
pub fn disk_scalar_gram(w: Complex64, eta: Complex64) -> DMatrix<f64> {
    let rho = w.norm_sqr();
    let d = 1.0 - rho;
    let beta = ((1.0 + rho) * eta.norm_sqr()
        - (w.conj() * eta * eta + w * eta.conj() * eta.conj()).re)
        / (d * d * d);
    let gww = 4.0 * (1.0 / (d * d) + beta);
    let gee = 4.0 / d;
    let alpha = (eta * w.conj() - eta.conj()) / (d * d);
    let mut g = DMatrix::zeros(4, 4);
    g[(0, 0)] = gww;
    g[(1, 1)] = gww;
    g[(2, 2)] = gee;
    g[(3, 3)] = gee;
    // 2 Re(alpha dW d-eta-bar) + c.c. spelled out on real coordinates.
    let (ar, ai) = (alpha.re, alpha.im);
    for (i, j, v) in
        [(0usize, 2usize, 4.0 * ar), (1, 3, 4.0 * ar), (1, 2, -4.0 * ai), (0, 3, 4.0 * ai)]
    {
        g[(i, j)] = v;
        g[(j, i)] = v;
    }
    g
}

/// Position-dependent matrices shared by all polarization directions.
enum Prepared {
    Flat,
    Half {
        yi: JetMatrix,
        /// `A Y^{-1} + B Y^{-1} tV V Y^{-1}`; just `A Y^{-1}` when m = 0.
        om_pref: JetMatrix,
        /// `V Y^{-1}` (m > 0 only).
        vyi: Option<JetMatrix>,
    },
    Disk {
        c1: JetMatrix,
        c2: JetMatrix,
        /// `4A c1 + 4B (eta-coupling combination)`; just `4A c1` when m = 0.
        om_pref: JetMatrix,
        /// `(eta W-bar - eta-bar) c1` (m > 0 only).
        a2: Option<JetMatrix>,
        /// `(eta-bar W - eta) c2` (m > 0 only).
        a3: Option<JetMatrix>,
    },
}

impl MetricTensor {
    pub fn frame(&self) -> &CoordFrame {
        &self.frame
    }

    pub fn params(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn prepare(&self, sym: &JetMatrix, blk: &JetMatrix) -> Prepared {
        if self.kind == Kind::Euclidean {
            return Prepared::Flat;
        }
        let m = self.frame.m();
        match self.frame.model() {
            Model::Half => {
                let half_i = Complex64::new(0.0, -0.5); // 1/(2i)
                let y = sym.sub(&sym.conj()).scale(half_i);
                let yi = y.inverse();
                if m == 0 {
                    let om_pref = yi.scale(cx(self.a));
                    return Prepared::Half { yi, om_pref, vyi: None };
                }
                let v = blk.sub(&blk.conj()).scale(half_i);
                let vyi = v.mul(&yi);
                // Y^{-1} tV V Y^{-1} = t(V Y^{-1}) (V Y^{-1}) since Y is symmetric.
                let p = vyi.transpose().mul(&vyi);
                let om_pref = yi.scale(cx(self.a)).add(&p.scale(cx(self.b)));
                Prepared::Half { yi, om_pref, vyi: Some(vyi) }
            }
            Model::Disk => {
                let n = self.frame.n();
                let id = JetMatrix::identity(sym.ctx(), n);
                let w = sym.clone();
                let wb = w.conj();
                let c1 = id.sub(&w.mul(&wb)).inverse();
                let c2 = id.sub(&wb.mul(&w)).inverse();
                if m == 0 {
                    let om_pref = c1.scale(cx(4.0 * self.a));
                    return Prepared::Disk { c1, c2, om_pref, a2: None, a3: None };
                }
                let e = blk.clone();
                let eb = e.conj();
                let te = e.transpose();
                let teb = eb.transpose();
                let iw = id.sub(&w);
                let iwb = id.sub(&wb);
                let iw_inv = iw.inverse();
                let iwb_inv = iwb.inverse();
                // The six dW (..) dW-bar traces share the tail `dW c2 dW-bar`;
                // collect their prefixes with signs into one matrix.
                let p4 = c1.mul(&te).mul(&e).mul(&c2).mul(&wb);
                let p5 = w.mul(&c2).mul(&teb).mul(&eb).mul(&c1);
                let p6 = c1.mul(&te).mul(&eb).mul(&c1);
                let p7 = iwb_inv.mul(&teb).mul(&e).mul(&wb).mul(&c1);
                let p8 = iwb_inv
                    .mul(&iw)
                    .mul(&c2)
                    .mul(&teb)
                    .mul(&e)
                    .mul(&c2)
                    .mul(&iwb)
                    .mul(&iw_inv);
                let p9 = c1.mul(&iw).mul(&iwb_inv).mul(&teb).mul(&e).mul(&iw_inv);
                let combo = p6.add(&p7).add(&p8).sub(&p4).sub(&p5).sub(&p9);
                let om_pref = c1.scale(cx(4.0 * self.a)).add(&combo.scale(cx(4.0 * self.b)));
                let a2 = e.mul(&wb).sub(&eb).mul(&c1);
                let a3 = eb.mul(&w).sub(&e).mul(&c2);
                Prepared::Disk { c1, c2, om_pref, a2: Some(a2), a3: Some(a3) }
            }
        }
    }

    /// The quadratic form on one real tangent direction `t`, as a jet over
    /// the position.  `dsym`/`dblk` are the constant direction matrices.
    fn quad(&self, prep: &Prepared, dsym: &JetMatrix, dblk: &JetMatrix, t: &[f64]) -> Jet {
        match prep {
            Prepared::Flat => {
                // Identity Gram matrix: Q(t) = |t|^2, constant in position.
                let ctx = dsym.ctx();
                Jet::constant(ctx, cx(t.iter().map(|v| v * v).sum()))
            }
            Prepared::Half { yi, om_pref, vyi } => {
                let domb = dsym.conj();
                let mut q = om_pref.mul(dsym).mul(yi).mul(&domb).trace();
                if let Some(vyi) = vyi {
                    let dzb = dblk.conj();
                    q = &q + &yi.mul(&dblk.transpose()).mul(&dzb).trace().scale(cx(self.b));
                    let cross1 = vyi.mul(dsym).mul(yi).mul(&dzb.transpose()).trace();
                    let cross2 = vyi.mul(&domb).mul(yi).mul(&dblk.transpose()).trace();
                    q = &q - &(&cross1 + &cross2).scale(cx(self.b));
                }
                q
            }
            Prepared::Disk { c1, c2, om_pref, a2, a3 } => {
                let dwb = dsym.conj();
                let mut q = om_pref.mul(dsym).mul(c2).mul(&dwb).trace();
                if let (Some(a2), Some(a3)) = (a2, a3) {
                    let de = dblk;
                    let deb = dblk.conj();
                    let b4 = cx(4.0 * self.b);
                    q = &q + &c1.mul(&de.transpose()).mul(&deb).trace().scale(b4);
                    q = &q + &a2.mul(dsym).mul(c2).mul(&deb.transpose()).trace().scale(b4);
                    q = &q + &a3.mul(&dwb).mul(c1).mul(&de.transpose()).trace().scale(b4);
                }
                q
            }
        }
    }

    /// Gram matrix with jet entries, given jet-valued position matrices.
    pub fn gram_at_jets(&self, sym: &JetMatrix, blk: &JetMatrix) -> JetMatrix {
        let ctx = sym.ctx().clone();
        let nc = self.frame.ncoords();
        let prep = self.prepare(sym, blk);
        let dir = |t: &[f64]| -> (JetMatrix, JetMatrix) {
            let (ds, db) = self.frame.matrices(t);
            (JetMatrix::from_complex(&ctx, &ds), JetMatrix::from_complex(&ctx, &db))
        };
        let mut qa = Vec::with_capacity(nc);
        let mut dirs = Vec::with_capacity(nc);
        for a in 0..nc {
            let mut t = vec![0.0; nc];
            t[a] = 1.0;
            let (ds, db) = dir(&t);
            qa.push(self.quad(&prep, &ds, &db, &t));
            dirs.push(t);
        }
        let mut g = JetMatrix::zero(&ctx, nc, nc);
        for a in 0..nc {
            g.set(a, a, qa[a].re());
            for b in a + 1..nc {
                let mut t = vec![0.0; nc];
                t[a] = 1.0;
                t[b] = 1.0;
                let (ds, db) = dir(&t);
                let qab = self.quad(&prep, &ds, &db, &t);
                let gab = (&(&qab - &qa[a]) - &qa[b]).scale(cx(0.5));
                debug_assert!(
                    gab.value().im.abs() <= 1e-10 * (1.0 + gab.value().re.abs()),
                    "metric entry has an imaginary part: {:?}",
                    gab.value()
                );
                let gab = gab.re();
                g.set(a, b, gab.clone());
                g.set(b, a, gab);
            }
        }
        let _ = dirs;
        g
    }

    /// Gram matrix with jet entries at a coordinate point.
    pub fn gram_jets(&self, ctx: &Arc<JetContext>, p: &[f64]) -> JetMatrix {
        let jets = self.frame.point_jets(ctx, p);
        let sym = self.frame.sym_matrix(&jets);
        let blk = self.frame.blk_matrix(&jets);
        self.gram_at_jets(&sym, &blk)
    }

    /// Plain numeric Gram matrix at a point.
    pub fn gram(&self, p: &[f64]) -> DMatrix<f64> {
        let ctx = JetContext::anonymous(1, 0);
        let (sym, blk) = self.frame.matrices(p);
        let symj = JetMatrix::from_complex(&ctx, &sym);
        let blkj = JetMatrix::from_complex(&ctx, &blk);
        let g = self.gram_at_jets(&symj, &blkj);
        let nc = self.frame.ncoords();
        DMatrix::from_fn(nc, nc, |i, j| g.get(i, j).value().re)
    }

    pub fn min_eigenvalue(&self, p: &[f64]) -> f64 {
        let g = self.gram(p);
        let eig = nalgebra::SymmetricEigen::new(g);
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `sqrt(det Gram)` at a point.
    pub fn volume_density(&self, p: &[f64]) -> f64 {
        self.gram(p).determinant().sqrt()
    }

    /// Pull the metric back through `map` along a point of the source frame.
    /// `map` sends source (sym, blk) jet matrices to matrices in this
    /// metric's frame convention; the result is the Gram matrix of the
    /// pulled-back form on the source coordinates, `tJ G(map(p)) J`.
    pub fn pullback_from<F>(&self, src: &CoordFrame, p: &[f64], map: F) -> SjResult<DMatrix<f64>>
    where
        F: FnOnce(&JetMatrix, &JetMatrix) -> (JetMatrix, JetMatrix),
    {
        let ctx = src.ctx(1);
        let jets = src.point_jets(&ctx, p);
        let sym = src.sym_matrix(&jets);
        let blk = src.blk_matrix(&jets);
        let (isym, iblk) = map(&sym, &blk);
        let icoords = self.frame.coords_of_jets(&isym, &iblk);
        let nc_src = src.ncoords();
        let nc_dst = self.frame.ncoords();
        let mut jac = DMatrix::zeros(nc_dst, nc_src);
        let mut img = vec![0.0; nc_dst];
        for (a, cj) in icoords.iter().enumerate() {
            img[a] = cj.value().re;
            for b in 0..nc_src {
                jac[(a, b)] = cj.coeffs()[1 + b].re;
            }
        }
        let sv = jac.clone().svd(false, false).singular_values;
        let (smax, smin) = (
            sv.iter().cloned().fold(0.0, f64::max),
            sv.iter().cloned().fold(f64::INFINITY, f64::min),
        );
        if smin <= 1e-12 * smax.max(1.0) {
            return Err(SjError::Singular("pullback linearization is singular".into()));
        }
        let gimg = self.gram(&img);
        Ok(jac.transpose() * gimg * jac)
    }

    /// Pullback through a self-map of this metric's own frame.
    pub fn pullback<F>(&self, p: &[f64], map: F) -> SjResult<DMatrix<f64>>
    where
        F: FnOnce(&JetMatrix, &JetMatrix) -> (JetMatrix, JetMatrix),
    {
        let frame = self.frame.clone();
        self.pullback_from(&frame, p, map)
    }

    /// `(1/sqrt(det g)) sum_i d_i (sqrt(det g) g^{ij} d_j f)` with exact jet
    /// derivatives: order-two jets carry the metric entries to first order
    /// and the test function to second order, which is all the formula uses.
    pub fn laplace_beltrami(&self, f: &Expr, p: &[f64]) -> SjResult<f64> {
        let nc = self.frame.ncoords();
        let ctx = self.frame.ctx(2);
        let g = self.gram_jets(&ctx, p);
        let g0 = DMatrix::from_fn(nc, nc, |i, j| g.get(i, j).value().re);
        let eig = nalgebra::SymmetricEigen::new(g0);
        let emax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let emin = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if emin <= 0.0 || emax / emin > 1e10 {
            return Err(SjError::Singular(format!(
                "metric ill-conditioned at point: eigenvalue range [{emin:.3e}, {emax:.3e}]"
            )));
        }
        let det = g.det();
        let sqrtg = det.sqrt();
        let ginv = g.inverse();
        let jets = self.frame.point_jets(&ctx, p);
        let fj = f.eval_jets(&jets);
        let df: Vec<Jet> = (0..nc).map(|j| fj.deriv(j)).collect();
        let mut acc = 0.0;
        for i in 0..nc {
            let mut inner = Jet::zero(&ctx);
            for j in 0..nc {
                inner = &inner + &(ginv.get(i, j) * &df[j]);
            }
            inner = &inner * &sqrtg;
            acc += inner.deriv(i).value().re;
        }
        Ok(acc / sqrtg.value().re)
    }
}

/// The invariant volume density `det(Y)^{-(n+1)}` on the half space.
pub fn volume_h(n: usize, omega: &DMatrix<Complex64>) -> f64 {
    assert_eq!(omega.nrows(), n);
    let y = omega.map(|z| z.im);
    y.determinant().powi(-(n as i32 + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{
        act_d_jets, act_h_jets, cayley_jets, random_d_point, random_h_point, random_jacobi,
        random_sp, to_star, JacobiElement,
    };
    use crate::tol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn h_coords(frame: &CoordFrame, p: &crate::group::HPoint) -> Vec<f64> {
        frame.coords_of(p.omega(), p.z())
    }

    fn d_coords(frame: &CoordFrame, p: &crate::group::DPoint) -> Vec<f64> {
        frame.coords_of(p.w(), p.eta())
    }

    fn rel_defect(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        (a - b).iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / scale
    }

    #[test]
    fn scalar_half_metric_hand_values() {
        let g = metric_h(1, 1.0);
        // At i: hyperbolic y^{-2}(dx^2+dy^2) with y=1.
        let at_i = g.gram(&[0.0, 1.0]);
        assert!(rel_defect(&at_i, &DMatrix::identity(2, 2)) < 1e-14);
        // At x+2i the same form scales by 1/4; x drops out entirely.
        let at_2i = g.gram(&[0.7, 2.0]);
        assert!(rel_defect(&at_2i, &(DMatrix::identity(2, 2) * 0.25)) < 1e-14);
    }

    #[test]
    fn half_metric_with_block_is_identity_at_base() {
        let g = metric_hc(1, 1, 1.0, 1.0);
        let base = g.frame().base_point();
        assert!(rel_defect(&g.gram(&base), &DMatrix::identity(4, 4)) < 1e-14);
    }

    #[test]
    fn base_point_blocks_carry_the_expected_weights() {
        // At (iI, 0): V = 0, Y = I.  The sym block gets A (diagonal
        // coordinate) or 2A (off-diagonal pair), the block part gets B.
        let (a, b) = (1.3, 0.7);
        let g = metric_hc(2, 1, a, b);
        let frame = g.frame().clone();
        let gram = g.gram(&frame.base_point());
        let mut want = DMatrix::zeros(frame.ncoords(), frame.ncoords());
        for i in 0..2 {
            for j in i..2 {
                let w = if i == j { a } else { 2.0 * a };
                want[(frame.sym_re(i, j), frame.sym_re(i, j))] = w;
                want[(frame.sym_im(i, j), frame.sym_im(i, j))] = w;
            }
        }
        for l in 0..2 {
            want[(frame.blk_re(0, l), frame.blk_re(0, l))] = b;
            want[(frame.blk_im(0, l), frame.blk_im(0, l))] = b;
        }
        assert!(rel_defect(&gram, &want) < 1e-13);
    }

    #[test]
    fn disk_metric_at_origin_has_coefficient_four() {
        let g = metric_d(1, 1, 1.0, 1.0);
        let gram = g.gram(&g.frame().base_point());
        assert!(rel_defect(&gram, &(DMatrix::identity(4, 4) * 4.0)) < 1e-14);
    }

    #[test]
    fn disk_metric_matches_printed_scalar_specialization() {
        // Against the closed-form n=m=1 display, written out in the real
        // coordinates (wa, wb, ea, eb).
        let g = metric_d(1, 1, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        for _ in 0..50 {
            let r = 0.85 * rng.gen::<f64>();
            let th = std::f64::consts::TAU * rng.gen::<f64>();
            let w = Complex64::new(r * th.cos(), r * th.sin());
            let eta = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 2.0;
            let want = disk_scalar_gram(w, eta);
            let p = vec![w.re, w.im, eta.re, eta.im];
            let got = g.gram(&p);
            assert!(
                rel_defect(&got, &want) < tol::DISK_COEFF_MATCH,
                "disk metric mismatch at W={w}, eta={eta}: defect {}",
                rel_defect(&got, &want)
            );
        }
    }

    #[test]
    fn metrics_are_positive_definite_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in 1..=3usize {
            let g = metric_h(n, 1.0);
            for _ in 0..10 {
                let p = random_h_point(&mut rng, n, 0, 0.8);
                assert!(g.min_eigenvalue(&h_coords(g.frame(), &p)) > 0.0);
            }
        }
        let g = metric_hc(2, 2, 0.9, 1.7);
        for _ in 0..10 {
            let p = random_h_point(&mut rng, 2, 2, 0.8);
            assert!(g.min_eigenvalue(&h_coords(g.frame(), &p)) > 0.0);
        }
        let g = metric_d(2, 2, 0.9, 1.7);
        for _ in 0..10 {
            let p = random_d_point(&mut rng, 2, 2, 0.8);
            assert!(g.min_eigenvalue(&d_coords(g.frame(), &p)) > 0.0);
        }
    }

    #[test]
    fn pullback_through_identity_returns_gram() {
        let g = metric_hc(1, 1, 1.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_h_point(&mut rng, 1, 1, 0.7);
        let coords = h_coords(g.frame(), &p);
        let pb = g.pullback(&coords, |s, b| (s.clone(), b.clone())).unwrap();
        assert!(rel_defect(&pb, &g.gram(&coords)) < 1e-14);
    }

    #[test]
    fn half_metric_is_invariant_under_symplectic_action() {
        let g = metric_h(2, 1.4);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let gp = JacobiElement::from_sp(random_sp(&mut rng, 2, 0.5), 0);
            let p = random_h_point(&mut rng, 2, 0, 0.7);
            let coords = h_coords(g.frame(), &p);
            let pb = g.pullback(&coords, |s, b| act_h_jets(&gp, s, b)).unwrap();
            let d = rel_defect(&pb, &g.gram(&coords));
            assert!(d < tol::METRIC_INVARIANCE, "defect {d}");
        }
    }

    #[test]
    fn block_metric_is_invariant_under_jacobi_action() {
        let g = metric_hc(2, 1, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let gp = random_jacobi(&mut rng, 2, 1, 0.4);
            let p = random_h_point(&mut rng, 2, 1, 0.6);
            let coords = h_coords(g.frame(), &p);
            let pb = g.pullback(&coords, |s, b| act_h_jets(&gp, s, b)).unwrap();
            let d = rel_defect(&pb, &g.gram(&coords));
            assert!(d < tol::METRIC_INVARIANCE, "defect {d}");
        }
    }

    #[test]
    fn disk_metric_is_invariant_under_star_action() {
        let g = metric_d(1, 1, 1.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..5 {
            let gs = to_star(&random_jacobi(&mut rng, 1, 1, 0.4));
            let p = random_d_point(&mut rng, 1, 1, 0.5);
            let coords = d_coords(g.frame(), &p);
            let pb = g.pullback(&coords, |s, b| act_d_jets(&gs, s, b)).unwrap();
            let d = rel_defect(&pb, &g.gram(&coords));
            assert!(d < tol::METRIC_INVARIANCE, "defect {d}");
        }
    }

    #[test]
    fn half_metric_pulls_back_to_disk_metric_through_cayley() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for (n, m) in [(1usize, 1usize), (2, 1)] {
            let gh = metric_hc(n, m, 1.0, 1.0);
            let gd = metric_d(n, m, 1.0, 1.0);
            for _ in 0..10 {
                let p = random_d_point(&mut rng, n, m, 0.5);
                let coords = d_coords(gd.frame(), &p);
                let pb = gh
                    .pullback_from(gd.frame(), &coords, |s, b| cayley_jets(s, b))
                    .unwrap();
                let d = rel_defect(&pb, &gd.gram(&coords));
                assert!(d < tol::METRIC_INVARIANCE, "n={n} m={m} defect {d}");
            }
        }
    }

    #[test]
    fn volume_density_is_proportional_to_invariant_volume() {
        let g = metric_h(2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let mut ratios = Vec::new();
        for _ in 0..20 {
            let p = random_h_point(&mut rng, 2, 0, 0.8);
            let coords = h_coords(g.frame(), &p);
            ratios.push(g.volume_density(&coords) / volume_h(2, p.omega()));
        }
        let first = ratios[0];
        for r in &ratios {
            assert!((r - first).abs() < 1e-9 * first.abs(), "ratio drifted: {r} vs {first}");
        }
    }

    #[test]
    fn flat_laplacian_of_x_squared_is_two() {
        let frame = CoordFrame::new(Model::Half, 1, 0);
        let g = euclidean(frame);
        let f = Expr::coord(0).pow(2);
        let v = g.laplace_beltrami(&f, &[0.3, 1.2]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_laplacian_matches_hand_formula() {
        // For y^{-2}(dx^2+dy^2) the operator is y^2 (dxx + dyy).
        let g = metric_h(1, 1.0);
        let f = Expr::coord(0).pow(2);
        let at_i = g.laplace_beltrami(&f, &[0.0, 1.0]).unwrap();
        assert!((at_i - 2.0).abs() < 1e-12);
        let y = 1.7;
        let generic = g.laplace_beltrami(&f, &[0.4, y]).unwrap();
        assert!((generic - 2.0 * y * y).abs() < 1e-10);
    }
}

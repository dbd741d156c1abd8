//! Differential operators as jet transformers.
//!
//! An operator here is a little AST over derivatives, coordinate-function
//! coefficients, sums, scalings, and compositions.  Applying one to a jet
//! germ is exact, so operator identities can be checked numerically to
//! machine precision without any symbolic normal ordering.  Matrices of
//! operators multiply exactly as the printed displays are written: entry
//! (i,k) of `A B` is `sum_j A_ij . B_jk` with the right factor applied
//! first, and transposition rearranges entries without touching the
//! composition order inside them (that is the convention under which the
//! matrix-transpose identities for commuting entries hold).

use crate::frame::{CoordFrame, Model};
use crate::jet::{Jet, JetContext};
use crate::jetmat::JetMatrix;
use crate::metric::MetricTensor;
use crate::testfn::Expr;
use num_complex::Complex64;
use std::sync::{Arc, Mutex};

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const I_UNIT: Complex64 = Complex64::new(0.0, 1.0);

/// A matrix-valued coordinate-function coefficient, evaluated as jets at a
/// point.  Evaluation caches the last (context, point) pair: operator trees
/// reuse the same coefficient many times within one application.
pub struct MatCoeff {
    name: String,
    eval: Box<dyn Fn(&CoordFrame, &[f64], &Arc<JetContext>) -> JetMatrix + Send + Sync>,
    cache: Mutex<Option<(usize, Vec<u64>, JetMatrix)>>,
}

impl MatCoeff {
    pub fn new<F>(name: &str, eval: F) -> Arc<MatCoeff>
    where
        F: Fn(&CoordFrame, &[f64], &Arc<JetContext>) -> JetMatrix + Send + Sync + 'static,
    {
        Arc::new(MatCoeff { name: name.into(), eval: Box::new(eval), cache: Mutex::new(None) })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn value(&self, frame: &CoordFrame, p: &[f64], ctx: &Arc<JetContext>) -> JetMatrix {
        let key_ctx = Arc::as_ptr(ctx) as usize;
        let key_p: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        {
            let guard = self.cache.lock().unwrap();
            if let Some((c, kp, m)) = guard.as_ref() {
                if *c == key_ctx && *kp == key_p {
                    return m.clone();
                }
            }
        }
        let m = (self.eval)(frame, p, ctx);
        *self.cache.lock().unwrap() = Some((key_ctx, key_p, m.clone()));
        m
    }
}

impl std::fmt::Debug for MatCoeff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MatCoeff({})", self.name)
    }
}

/// A linear differential operator with coordinate-function coefficients.
#[derive(Clone, Debug)]
pub enum LinOp {
    Id,
    /// d/d(coordinate v).
    Deriv(usize),
    /// Multiplication by entry (i,j) of a matrix coefficient.
    Coeff { mat: Arc<MatCoeff>, i: usize, j: usize },
    Scale(Complex64, Box<LinOp>),
    Add(Vec<LinOp>),
    /// Composition as written left-to-right; the rightmost acts first.
    Compose(Vec<LinOp>),
}

impl LinOp {
    pub fn zero() -> LinOp {
        LinOp::Add(Vec::new())
    }

    pub fn scaled(self, s: f64) -> LinOp {
        LinOp::Scale(cx(s), Box::new(self))
    }

    /// Maximum derivative order this operator consumes; jets fed to
    /// [`LinOp::apply`] must be at least this deep.
    pub fn degree(&self) -> usize {
        match self {
            LinOp::Id => 0,
            LinOp::Deriv(_) => 1,
            LinOp::Coeff { .. } => 0,
            LinOp::Scale(_, inner) => inner.degree(),
            LinOp::Add(list) => list.iter().map(|o| o.degree()).max().unwrap_or(0),
            LinOp::Compose(list) => list.iter().map(|o| o.degree()).sum(),
        }
    }

    /// Apply to the germ of a function at `p` (a jet in the frame's chart).
    pub fn apply(&self, f: &Jet, frame: &CoordFrame, p: &[f64]) -> Jet {
        match self {
            LinOp::Id => f.clone(),
            LinOp::Deriv(v) => f.deriv(*v),
            LinOp::Coeff { mat, i, j } => {
                let m = mat.value(frame, p, f.ctx());
                m.get(*i, *j) * f
            }
            LinOp::Scale(s, inner) => inner.apply(f, frame, p).scale(*s),
            LinOp::Add(list) => {
                let mut acc = Jet::zero(f.ctx());
                for op in list {
                    acc = &acc + &op.apply(f, frame, p);
                }
                acc
            }
            LinOp::Compose(list) => {
                let mut acc = f.clone();
                for op in list.iter().rev() {
                    acc = op.apply(&acc, frame, p);
                }
                acc
            }
        }
    }
}

/// Evaluate `op f` at `p`, sizing the jet from the operator degree.
pub fn apply_at(op: &LinOp, f: &Expr, frame: &CoordFrame, p: &[f64]) -> Complex64 {
    let ctx = frame.ctx(op.degree());
    let jets = frame.point_jets(&ctx, p);
    op.apply(&f.eval_jets(&jets), frame, p).value()
}

/// A rectangular matrix of operators sharing one chart.
#[derive(Clone, Debug)]
pub struct OpMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<LinOp>,
}

impl OpMatrix {
    pub fn from_fn<F: FnMut(usize, usize) -> LinOp>(rows: usize, cols: usize, mut f: F) -> OpMatrix {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        OpMatrix { rows, cols, entries }
    }

    /// Matrix of multiplication operators by the entries of a coefficient.
    pub fn from_coeff(mat: &Arc<MatCoeff>, rows: usize, cols: usize) -> OpMatrix {
        OpMatrix::from_fn(rows, cols, |i, j| LinOp::Coeff { mat: mat.clone(), i, j })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &LinOp {
        assert!(i < self.rows && j < self.cols);
        &self.entries[i * self.cols + j]
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|o| o.degree()).max().unwrap_or(0)
    }

    /// Product as written: entry (i,k) is `sum_j self_ij . other_jk`, the
    /// right factor acting first.
    pub fn mul(&self, other: &OpMatrix) -> OpMatrix {
        assert_eq!(self.cols, other.rows, "operator matrix dimensions do not match");
        OpMatrix::from_fn(self.rows, other.cols, |i, k| {
            LinOp::Add(
                (0..self.cols)
                    .map(|j| LinOp::Compose(vec![self.get(i, j).clone(), other.get(j, k).clone()]))
                    .collect(),
            )
        })
    }

    pub fn add(&self, other: &OpMatrix) -> OpMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        OpMatrix::from_fn(self.rows, self.cols, |i, j| {
            LinOp::Add(vec![self.get(i, j).clone(), other.get(i, j).clone()])
        })
    }

    /// Entry rearrangement only; compositions inside entries keep their
    /// order.
    pub fn transpose(&self) -> OpMatrix {
        OpMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn trace(&self) -> LinOp {
        assert_eq!(self.rows, self.cols);
        LinOp::Add((0..self.rows).map(|i| self.get(i, i).clone()).collect())
    }

    pub fn scale(&self, s: f64) -> OpMatrix {
        OpMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).clone().scaled(s))
    }

    /// Right-compose every entry with a scalar operator (used for terms
    /// like `Lambda sigma(A)` where the scalar acts first).
    pub fn compose_scalar(&self, s: &LinOp) -> OpMatrix {
        OpMatrix::from_fn(self.rows, self.cols, |i, j| {
            LinOp::Compose(vec![self.get(i, j).clone(), s.clone()])
        })
    }
}

/// `C . A` with a matrix coefficient on the left.
pub fn coeff_left(c: &Arc<MatCoeff>, rows: usize, cols: usize, a: &OpMatrix) -> OpMatrix {
    OpMatrix::from_coeff(c, rows, cols).mul(a)
}

/// Determinant of an operator matrix by the Leibniz sum; each permutation
/// contributes the ordered composition of its entries (row order).
pub fn det_op(m: &OpMatrix) -> LinOp {
    assert_eq!(m.rows(), m.cols());
    let n = m.rows();
    assert!(n <= 4, "operator determinants are desk-scale only");
    let mut perm: Vec<usize> = (0..n).collect();
    let mut terms = Vec::new();
    fn visit(
        m: &OpMatrix,
        perm: &mut Vec<usize>,
        k: usize,
        terms: &mut Vec<LinOp>,
    ) {
        let n = perm.len();
        if k == n {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if perm[i] > perm[j] {
                        inv += 1;
                    }
                }
            }
            let sign = if inv % 2 == 0 { 1.0 } else { -1.0 };
            let chain: Vec<LinOp> = (0..n).map(|i| m.get(i, perm[i]).clone()).collect();
            terms.push(LinOp::Compose(chain).scaled(sign));
            return;
        }
        for i in k..n {
            perm.swap(k, i);
            visit(m, perm, k + 1, terms);
            perm.swap(k, i);
        }
    }
    visit(m, &mut perm, 0, &mut terms);
    LinOp::Add(terms)
}

/// The eight Wirtinger derivative matrices.  The symmetric-matrix variants
/// carry the (1+delta_ij)/2 weight: the off-diagonal positions (i,j) and
/// (j,i) share one coordinate, and the half weight makes the matrix chain
/// rule come out right.  The block variants are plain n x m layouts with
/// entry (nu,k) = d/dz_{k,nu}.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wirt {
    DOmega,
    DOmegaBar,
    DZ,
    DZBar,
    DW,
    DWBar,
    DEta,
    DEtaBar,
}

impl Wirt {
    fn model(self) -> Model {
        match self {
            Wirt::DOmega | Wirt::DOmegaBar | Wirt::DZ | Wirt::DZBar => Model::Half,
            _ => Model::Disk,
        }
    }

    fn is_sym(self) -> bool {
        matches!(self, Wirt::DOmega | Wirt::DOmegaBar | Wirt::DW | Wirt::DWBar)
    }

    fn is_bar(self) -> bool {
        matches!(self, Wirt::DOmegaBar | Wirt::DZBar | Wirt::DWBar | Wirt::DEtaBar)
    }
}

pub fn wirtinger(frame: &CoordFrame, which: Wirt) -> OpMatrix {
    assert_eq!(frame.model(), which.model(), "derivative does not belong to this chart");
    let n = frame.n();
    let m = frame.m();
    // d/dw = (d/d Re - i d/d Im)/2; the conjugate flips the sign of i.
    let im_c = if which.is_bar() { I_UNIT } else { -I_UNIT };
    if which.is_sym() {
        OpMatrix::from_fn(n, n, |i, j| {
            let w = if i == j { 1.0 } else { 0.5 };
            LinOp::Add(vec![
                LinOp::Deriv(frame.sym_re(i, j)).scaled(w * 0.5),
                LinOp::Scale(im_c * cx(w * 0.5), Box::new(LinOp::Deriv(frame.sym_im(i, j)))),
            ])
        })
    } else {
        assert!(m > 0, "block derivative on a blockless chart");
        OpMatrix::from_fn(n, m, |nu, k| {
            LinOp::Add(vec![
                LinOp::Deriv(frame.blk_re(k, nu)).scaled(0.5),
                LinOp::Scale(im_c * cx(0.5), Box::new(LinOp::Deriv(frame.blk_im(k, nu)))),
            ])
        })
    }
}

// ---------------------------------------------------------------------------
// Coefficient matrices used throughout.

fn half_imag_sym(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("Y", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let om = frame.sym_matrix(&jets);
        om.sub(&om.conj()).scale(Complex64::new(0.0, -0.5))
    })
}

fn half_omega_diff(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("Omega-minus-conj", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let om = frame.sym_matrix(&jets);
        om.sub(&om.conj())
    })
}

fn half_omega_diff_inv(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("(Omega-minus-conj)^-1", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let om = frame.sym_matrix(&jets);
        om.sub(&om.conj()).inverse()
    })
}

fn half_imag_blk(m: usize) -> Arc<MatCoeff> {
    MatCoeff::new("V", move |frame, p, ctx| {
        assert_eq!(frame.m(), m);
        let jets = frame.point_jets(ctx, p);
        let z = frame.blk_matrix(&jets);
        z.sub(&z.conj()).scale(Complex64::new(0.0, -0.5))
    })
}

fn half_imag_blk_t(m: usize) -> Arc<MatCoeff> {
    MatCoeff::new("tV", move |frame, p, ctx| {
        assert_eq!(frame.m(), m);
        let jets = frame.point_jets(ctx, p);
        let z = frame.blk_matrix(&jets);
        z.sub(&z.conj()).scale(Complex64::new(0.0, -0.5)).transpose()
    })
}

fn half_v_yinv_tv(n: usize, m: usize) -> Arc<MatCoeff> {
    MatCoeff::new("V Y^-1 tV", move |frame, p, ctx| {
        assert_eq!((frame.n(), frame.m()), (n, m));
        let jets = frame.point_jets(ctx, p);
        let om = frame.sym_matrix(&jets);
        let y = om.sub(&om.conj()).scale(Complex64::new(0.0, -0.5));
        let z = frame.blk_matrix(&jets);
        let v = z.sub(&z.conj()).scale(Complex64::new(0.0, -0.5));
        v.mul(&y.inverse()).mul(&v.transpose())
    })
}

fn half_det_y(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("det Y", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let om = frame.sym_matrix(&jets);
        let y = om.sub(&om.conj()).scale(Complex64::new(0.0, -0.5));
        JetMatrix::from_fn(1, 1, |_, _| y.det())
    })
}

fn disk_one_minus_wwb(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("I - W Wbar", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let w = frame.sym_matrix(&jets);
        JetMatrix::identity(ctx, n).sub(&w.mul(&w.conj()))
    })
}

fn disk_one_minus_wbw(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("I - Wbar W", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let w = frame.sym_matrix(&jets);
        JetMatrix::identity(ctx, n).sub(&w.conj().mul(&w))
    })
}

fn disk_det_one_minus_wwb(n: usize) -> Arc<MatCoeff> {
    MatCoeff::new("det(I - W Wbar)", move |frame, p, ctx| {
        assert_eq!(frame.n(), n);
        let jets = frame.point_jets(ctx, p);
        let w = frame.sym_matrix(&jets);
        let c = JetMatrix::identity(ctx, n).sub(&w.mul(&w.conj()));
        JetMatrix::from_fn(1, 1, |_, _| c.det())
    })
}

// ---------------------------------------------------------------------------
// The Maass generators.

pub struct MaassSymbols {
    pub n: usize,
    pub k: OpMatrix,
    pub lambda: OpMatrix,
    /// A^(1) ... A^(n).
    pub a: Vec<OpMatrix>,
    /// H_j = tr(A^(j)).
    pub h: Vec<LinOp>,
}

/// Build K = (Omega - conj Omega) d/dOmega, Lambda = (Omega - conj Omega)
/// d/dOmega-bar, and the recursively defined A^(j), H_j = tr A^(j):
///
///   A^(1) = Lambda K + ((n+1)/2) K
///   A^(j) = A^(1) A^(j-1) - ((n+1)/2) Lambda A^(j-1)
///           + (1/2) Lambda sigma(A^(j-1))
///           + (1/2) (Om - conj Om) t{ (Om - conj Om)^{-1} t( tLambda tA^(j-1) ) }
///
/// where sigma is the matrix trace.  The operators ignore block
/// coordinates, so they can be applied on any half-model chart of size n.
pub fn maass_generators(n: usize) -> MaassSymbols {
    assert!((1..=3).contains(&n), "generator degrees reach 2n; keep n small");
    let frame = CoordFrame::new(Model::Half, n, 0);
    let diff = half_omega_diff(n);
    let diff_inv = half_omega_diff_inv(n);
    let k = coeff_left(&diff, n, n, &wirtinger(&frame, Wirt::DOmega));
    let lambda = coeff_left(&diff, n, n, &wirtinger(&frame, Wirt::DOmegaBar));
    let half_np1 = (n as f64 + 1.0) / 2.0;
    let a1 = lambda.mul(&k).add(&k.scale(half_np1));
    let mut a = vec![a1.clone()];
    for _ in 2..=n {
        let prev = a.last().unwrap();
        let t1 = a1.mul(prev);
        let t2 = lambda.mul(prev).scale(-half_np1);
        let t3 = lambda.compose_scalar(&prev.trace()).scale(0.5);
        let inner = lambda.transpose().mul(&prev.transpose());
        let t4 = coeff_left(&diff, n, n, &coeff_left(&diff_inv, n, n, &inner.transpose()).transpose())
            .scale(0.5);
        a.push(t1.add(&t2).add(&t3).add(&t4));
    }
    let h = a.iter().map(|aj| aj.trace()).collect();
    MaassSymbols { n, k, lambda, a, h }
}

// ---------------------------------------------------------------------------
// The named invariant operators.

/// `(4/A) tr( Y t(Y d/dOmega-bar) d/dOmega )`.
pub fn delta_h(n: usize, a: f64) -> LinOp {
    let frame = CoordFrame::new(Model::Half, n, 0);
    let y = half_imag_sym(n);
    let dom = wirtinger(&frame, Wirt::DOmega);
    let domb = wirtinger(&frame, Wirt::DOmegaBar);
    let chain = coeff_left(&y, n, n, &coeff_left(&y, n, n, &domb).transpose()).mul(&dom);
    chain.trace().scaled(4.0 / a)
}

/// `tr( Y d/dZ t(d/dZ-bar) )`.
pub fn m1(n: usize, m: usize) -> LinOp {
    let frame = CoordFrame::new(Model::Half, n, m);
    let y = half_imag_sym(n);
    let dz = wirtinger(&frame, Wirt::DZ);
    let dzb = wirtinger(&frame, Wirt::DZBar);
    coeff_left(&y, n, n, &dz).mul(&dzb.transpose()).trace()
}

/// Coefficient of the z-z block of [`m2`], flattened over pairs
/// `a = k n + mu`, `b = l n + nu` (the derivative pair `dz_{k mu}
/// dz-bar_{l nu}`):
///
///   ( (V Y^-1 tV)_{kl} Y_{mu nu} + V_{l mu} V_{k nu} ) / 2.
///
/// The symmetrization matters: the shorter coefficient
/// `(V Y^-1 tV)_{kl} Y_{mu nu}` alone (the single-trace form
/// `tr(V Y^-1 tV t(Y dZb) dZ)`) agrees with this one exactly when n = 1
/// but is *not* the metric Laplacian's coefficient for n >= 2 — see
/// [`m2_single_trace_zz`], which is kept as a regression control.
fn half_zz_coeff(n: usize, m: usize) -> Arc<MatCoeff> {
    MatCoeff::new("zz-block coefficient", move |frame, p, ctx| {
        assert_eq!((frame.n(), frame.m()), (n, m));
        let jets = frame.point_jets(ctx, p);
        let om = frame.sym_matrix(&jets);
        let y = om.sub(&om.conj()).scale(Complex64::new(0.0, -0.5));
        let z = frame.blk_matrix(&jets);
        let v = z.sub(&z.conj()).scale(Complex64::new(0.0, -0.5));
        let c = v.mul(&y.inverse()).mul(&v.transpose());
        JetMatrix::from_fn(m * n, m * n, |ab, cd| {
            let (k, mu) = (ab / n, ab % n);
            let (l, nu) = (cd / n, cd % n);
            (&(c.get(k, l) * y.get(mu, nu)) + &(v.get(l, mu) * v.get(k, nu)))
                .scale(cx(0.5))
        })
    })
}

/// `sum_{k,mu,l,nu} coeff_{(k mu)(l nu)} dz_{k mu} dz-bar_{l nu}` with the
/// coefficient multiplied on after both derivatives (pure second order).
fn zz_quadratic(frame: &CoordFrame, w: &Arc<MatCoeff>) -> LinOp {
    let n = frame.n();
    let m = frame.m();
    let dz = wirtinger(frame, Wirt::DZ);
    let dzb = wirtinger(frame, Wirt::DZBar);
    let mut terms = Vec::with_capacity((m * n) * (m * n));
    for k in 0..m {
        for mu in 0..n {
            for l in 0..m {
                for nu in 0..n {
                    terms.push(LinOp::Compose(vec![
                        LinOp::Coeff { mat: w.clone(), i: k * n + mu, j: l * n + nu },
                        dzb.get(nu, l).clone(),
                        dz.get(mu, k).clone(),
                    ]));
                }
            }
        }
    }
    LinOp::Add(terms)
}

fn m2_parts(n: usize, m: usize) -> (LinOp, LinOp, LinOp, LinOp) {
    let frame = CoordFrame::new(Model::Half, n, m);
    let y = half_imag_sym(n);
    let v = half_imag_blk(m);
    let tv = half_imag_blk_t(m);
    let dom = wirtinger(&frame, Wirt::DOmega);
    let domb = wirtinger(&frame, Wirt::DOmegaBar);
    let dz = wirtinger(&frame, Wirt::DZ);
    let dzb = wirtinger(&frame, Wirt::DZBar);
    let ty_domb = coeff_left(&y, n, n, &domb).transpose();
    let ty_dzb = coeff_left(&y, n, n, &dzb).transpose();
    (
        coeff_left(&y, n, n, &ty_domb).mul(&dom).trace(),
        zz_quadratic(&frame, &half_zz_coeff(n, m)),
        coeff_left(&v, m, n, &ty_domb).mul(&dz).trace(),
        coeff_left(&tv, n, m, &ty_dzb).mul(&dom).trace(),
    )
}

/// The invariant second-order operator pairing with [`m1`] in the
/// Laplacian:
///
///   tr(Y t(Y dOmb) dOm)  +  (symmetrized z-z block, [`half_zz_coeff`])
///   + tr(V t(Y dOmb) dZ) + tr(tV t(Y dZb) dOm).
pub fn m2(n: usize, m: usize) -> LinOp {
    let (t1, t2, t3, t4) = m2_parts(n, m);
    LinOp::Add(vec![t1, t2, t3, t4])
}

/// Variant of [`m2`] with the z-z block written as the single trace
/// `tr(V Y^-1 tV t(Y dZb) dZ)`.  Identical to [`m2`] when n = 1; for
/// n >= 2 it is neither invariant nor the metric Laplacian's companion.
/// Kept so tests can document that the difference is real.
pub fn m2_single_trace_zz(n: usize, m: usize) -> LinOp {
    let frame = CoordFrame::new(Model::Half, n, m);
    let y = half_imag_sym(n);
    let vyitv = half_v_yinv_tv(n, m);
    let dz = wirtinger(&frame, Wirt::DZ);
    let dzb = wirtinger(&frame, Wirt::DZBar);
    let ty_dzb = coeff_left(&y, n, n, &dzb).transpose();
    let (t1, _, t3, t4) = m2_parts(n, m);
    let t2 = coeff_left(&vyitv, m, m, &ty_dzb).mul(&dz).trace();
    LinOp::Add(vec![t1, t2, t3, t4])
}

/// Deliberately wrong variant of [`m2`] that drops the last trace; used as
/// a sensitivity control for the invariance harness.
pub fn m2_broken(n: usize, m: usize) -> LinOp {
    let (t1, t2, t3, _) = m2_parts(n, m);
    LinOp::Add(vec![t1, t2, t3])
}

/// `(4/A) M2 + (4/B) M1`, the Laplacian of the half-model metric.
pub fn delta_hc(n: usize, m: usize, a: f64, b: f64) -> LinOp {
    LinOp::Add(vec![m2(n, m).scaled(4.0 / a), m1(n, m).scaled(4.0 / b)])
}

/// `det(Y) det( d/dZ t(d/dZ-bar) )`, an invariant operator of degree 2n.
pub fn k_operator(n: usize, m: usize) -> LinOp {
    let frame = CoordFrame::new(Model::Half, n, m);
    let dz = wirtinger(&frame, Wirt::DZ);
    let dzb = wirtinger(&frame, Wirt::DZBar);
    let dety = half_det_y(n);
    LinOp::Compose(vec![
        LinOp::Coeff { mat: dety, i: 0, j: 0 },
        det_op(&dz.mul(&dzb.transpose())),
    ])
}

/// `det(I - W Wbar) det( d/deta t(d/deta-bar) )`, the disk partner of
/// [`k_operator`].
pub fn k_operator_disk(n: usize, m: usize) -> LinOp {
    let frame = CoordFrame::new(Model::Disk, n, m);
    let de = wirtinger(&frame, Wirt::DEta);
    let deb = wirtinger(&frame, Wirt::DEtaBar);
    let det = disk_det_one_minus_wwb(n);
    LinOp::Compose(vec![
        LinOp::Coeff { mat: det, i: 0, j: 0 },
        det_op(&de.mul(&deb.transpose())),
    ])
}

/// The matrix operator `t(d/dZ-bar) Y d/dZ` with entries
/// `T_kl = sum_ij y_ij d^2/(dz-bar_ki dz_lj)`.
pub fn t_operator(n: usize, m: usize) -> OpMatrix {
    let frame = CoordFrame::new(Model::Half, n, m);
    let y = half_imag_sym(n);
    let dz = wirtinger(&frame, Wirt::DZ);
    let dzb = wirtinger(&frame, Wirt::DZBar);
    dzb.transpose().mul(&OpMatrix::from_coeff(&y, n, n)).mul(&dz)
}

/// The disk partner `t(d/deta-bar) (I - Wbar W) d/deta`.
pub fn t_operator_disk(n: usize, m: usize) -> OpMatrix {
    let frame = CoordFrame::new(Model::Disk, n, m);
    let c = disk_one_minus_wbw(n);
    let de = wirtinger(&frame, Wirt::DEta);
    let deb = wirtinger(&frame, Wirt::DEtaBar);
    deb.transpose().mul(&OpMatrix::from_coeff(&c, n, n)).mul(&de)
}

/// `sigma( (I - Wbar W) d/deta t(d/deta-bar) )` (sigma = matrix trace).
pub fn s1(n: usize, m: usize) -> LinOp {
    let frame = CoordFrame::new(Model::Disk, n, m);
    let c = disk_one_minus_wbw(n);
    let de = wirtinger(&frame, Wirt::DEta);
    let deb = wirtinger(&frame, Wirt::DEtaBar);
    coeff_left(&c, n, n, &de).mul(&deb.transpose()).trace()
}

/// The seven-trace disk operator paired with [`s1`] in the disk Laplacian.
pub fn s2(n: usize, m: usize) -> LinOp {
    let frame = CoordFrame::new(Model::Disk, n, m);
    let c1 = disk_one_minus_wwb(n);
    let c2 = disk_one_minus_wbw(n);
    let dw = wirtinger(&frame, Wirt::DW);
    let dwb = wirtinger(&frame, Wirt::DWBar);
    let de = wirtinger(&frame, Wirt::DEta);
    let deb = wirtinger(&frame, Wirt::DEtaBar);
    // tr( (I-WWb) t((I-WWb) dWb) dW ).
    let t1 = coeff_left(&c1, n, n, &coeff_left(&c1, n, n, &dwb).transpose()).mul(&dw).trace();
    // tr( t(eta - etab W) t(dEtab) (I-Wb W) dW ).
    let t2c = MatCoeff::new("t(eta - etab W)", move |frame, p, ctx| {
        let jets = frame.point_jets(ctx, p);
        let w = frame.sym_matrix(&jets);
        let e = frame.blk_matrix(&jets);
        e.sub(&e.conj().mul(&w)).transpose()
    });
    let t2 = coeff_left(&t2c, n, m, &deb.transpose()).mul(&OpMatrix::from_coeff(&c2, n, n)).mul(&dw).trace();
    // tr( (etab - eta Wb) t((I-WWb) dWb) dEta ).
    let t3c = MatCoeff::new("etab - eta Wb", move |frame, p, ctx| {
        let jets = frame.point_jets(ctx, p);
        let w = frame.sym_matrix(&jets);
        let e = frame.blk_matrix(&jets);
        e.conj().sub(&e.mul(&w.conj()))
    });
    let t3 = coeff_left(&t3c, m, n, &coeff_left(&c1, n, n, &dwb).transpose()).mul(&de).trace();
    // The four eta-eta traces share the tail t(dEtab) (I-Wb W) dEta; their
    // coefficient prefixes combine into one m x m matrix:
    //   - eta Wb (I-WWb)^-1 t(eta)  - etab W (I-Wb W)^-1 t(etab)
    //   + etab (I-WWb)^-1 t(eta)    + eta Wb W (I-Wb W)^-1 t(etab).
    let t4c = MatCoeff::new("eta-eta prefix sum", move |frame, p, ctx| {
        let jets = frame.point_jets(ctx, p);
        let w = frame.sym_matrix(&jets);
        let wb = w.conj();
        let e = frame.blk_matrix(&jets);
        let eb = e.conj();
        let nn = frame.n();
        let c1i = JetMatrix::identity(ctx, nn).sub(&w.mul(&wb)).inverse();
        let c2i = JetMatrix::identity(ctx, nn).sub(&wb.mul(&w)).inverse();
        let te = e.transpose();
        let teb = eb.transpose();
        let p4 = e.mul(&wb).mul(&c1i).mul(&te);
        let p5 = eb.mul(&w).mul(&c2i).mul(&teb);
        let p6 = eb.mul(&c1i).mul(&te);
        let p7 = e.mul(&wb).mul(&w).mul(&c2i).mul(&teb);
        p6.add(&p7).sub(&p4).sub(&p5)
    });
    let tail = deb.transpose().mul(&OpMatrix::from_coeff(&c2, n, n)).mul(&de);
    let t4 = coeff_left(&t4c, m, m, &tail).trace();
    LinOp::Add(vec![t1, t2, t3, t4])
}

/// The traced form `(1/A) S2 + (1/B) S1` of the disk Laplacian.
///
/// This display agrees with the Laplacian of the disk metric only while W
/// is a scalar (n = 1, any m).  For n >= 2 its eta-eta coefficient is not
/// the metric's own — the same failure mode [`m2_single_trace_zz`] has on
/// the other model, where the single trace quietly drops the symmetrized
/// part of the coefficient.  Kept verbatim so tests can pin down exactly
/// where it deviates; use [`delta_d`] for the actual Laplacian.
pub fn delta_d_traced(n: usize, m: usize, a: f64, b: f64) -> LinOp {
    LinOp::Add(vec![s2(n, m).scaled(1.0 / a), s1(n, m).scaled(1.0 / b)])
}

/// The Laplacian of the disk metric, built from the metric itself via
/// [`kahler_laplacian`].  Coincides with [`delta_d_traced`] for n = 1.
pub fn delta_d(n: usize, m: usize, a: f64, b: f64) -> LinOp {
    kahler_laplacian(&crate::metric::metric_d(n, m, a, b))
}

// ---------------------------------------------------------------------------
// Laplacian straight from a metric.

/// Canonical Laplacian of a Kahler metric, as a pure second-order operator.
///
/// For a Kahler metric the Laplace-Beltrami operator has no first-order
/// part when written against the complex pairing: it is
/// `sum_{a,b} K_ab d/dzeta_a d/dzeta-bar_b` with `K = 4 (Gxx + i Gyx)^{-1}`
/// read off the real-coordinate Gram blocks (`Gxx` pairs the two real
/// parts, `Gyx` an imaginary part with a real part; `zeta_a = x_a + i y_a`
/// runs over the independent upper-triangle symmetric entries, then the
/// rectangular block entries).  The inverse is taken over jets, so the
/// result composes exactly like any other operator here, it is just slower
/// than a closed form.
///
/// Both model metrics are Kahler, which is why their Laplacians carry no
/// first-order terms; the tests check this construction against the traced
/// closed forms wherever those are correct.
pub fn kahler_laplacian(metric: &MetricTensor) -> LinOp {
    let frame = metric.frame();
    let s = frame.n() * (frame.n() + 1) / 2;
    let mn = frame.m() * frame.n();
    let ncc = s + mn;
    // Real-coordinate indices of Re(zeta_a) and Im(zeta_a) in the frame's
    // ordering (sym-re block, sym-im block, blk-re block, blk-im block).
    let x_of = move |a: usize| if a < s { a } else { 2 * s + (a - s) };
    let y_of = move |a: usize| if a < s { s + a } else { 2 * s + mn + (a - s) };
    let met = metric.clone();
    let k = MatCoeff::new("kahler-inverse", move |_fr, p, ctx| {
        let g = met.gram_jets(ctx, p);
        let h = JetMatrix::from_fn(ncc, ncc, |a, b| {
            let gyx = g.get(y_of(a), x_of(b)).scale(I_UNIT);
            g.get(x_of(a), x_of(b)) + &gyx
        });
        h.inverse().scale(cx(4.0))
    });
    let mut terms = Vec::with_capacity(ncc * ncc);
    for a in 0..ncc {
        for b in 0..ncc {
            let dza = LinOp::Add(vec![
                LinOp::Deriv(x_of(a)).scaled(0.5),
                LinOp::Scale(I_UNIT * cx(-0.5), Box::new(LinOp::Deriv(y_of(a)))),
            ]);
            let dzbb = LinOp::Add(vec![
                LinOp::Deriv(x_of(b)).scaled(0.5),
                LinOp::Scale(I_UNIT * cx(0.5), Box::new(LinOp::Deriv(y_of(b)))),
            ]);
            terms.push(LinOp::Compose(vec![
                LinOp::Coeff { mat: k.clone(), i: a, j: b },
                dza,
                dzbb,
            ]));
        }
    }
    LinOp::Add(terms)
}

// ---------------------------------------------------------------------------
// The explicit generators for n = m = 1 (coordinates x, y, u, v).

fn coord_coeff(name: &str, idx: usize, square: bool) -> Arc<MatCoeff> {
    let name = name.to_string();
    MatCoeff::new(&name.clone(), move |frame, p, ctx| {
        let jets = frame.point_jets(ctx, p);
        let j = if square { &jets[idx] * &jets[idx] } else { jets[idx].clone() };
        JetMatrix::from_fn(1, 1, |_, _| j.clone())
    })
}

fn c_op(mat: Arc<MatCoeff>) -> LinOp {
    LinOp::Coeff { mat, i: 0, j: 0 }
}

fn dd(a: usize, b: usize) -> LinOp {
    LinOp::Compose(vec![LinOp::Deriv(a), LinOp::Deriv(b)])
}

/// `y^2 (dxx + dyy) + v^2 (duu + dvv) + 2yv (dxu + dyv)`.
pub fn d1_explicit() -> LinOp {
    let yv2 = MatCoeff::new("2yv", |frame, p, ctx| {
        let jets = frame.point_jets(ctx, p);
        let j = (&jets[1] * &jets[3]).scale(cx(2.0));
        JetMatrix::from_fn(1, 1, |_, _| j.clone())
    });
    LinOp::Add(vec![
        LinOp::Compose(vec![c_op(coord_coeff("y^2", 1, true)), LinOp::Add(vec![dd(0, 0), dd(1, 1)])]),
        LinOp::Compose(vec![c_op(coord_coeff("v^2", 3, true)), LinOp::Add(vec![dd(2, 2), dd(3, 3)])]),
        LinOp::Compose(vec![c_op(yv2), LinOp::Add(vec![dd(0, 2), dd(1, 3)])]),
    ])
}

/// `y (duu + dvv)`.
pub fn d2_explicit() -> LinOp {
    LinOp::Compose(vec![c_op(coord_coeff("y", 1, false)), LinOp::Add(vec![dd(2, 2), dd(3, 3)])])
}

/// `y^2 dy (duu - dvv) - 2 y^2 dxuv - (v dv + 1) D2`.
pub fn d3_explicit() -> LinOp {
    let d2 = d2_explicit();
    LinOp::Add(vec![
        LinOp::Compose(vec![
            c_op(coord_coeff("y^2", 1, true)),
            LinOp::Deriv(1),
            LinOp::Add(vec![dd(2, 2), dd(3, 3).scaled(-1.0)]),
        ]),
        LinOp::Compose(vec![
            c_op(coord_coeff("y^2", 1, true)),
            LinOp::Deriv(0),
            LinOp::Deriv(2),
            LinOp::Deriv(3),
        ])
        .scaled(-2.0),
        LinOp::Compose(vec![
            LinOp::Add(vec![
                LinOp::Compose(vec![c_op(coord_coeff("v", 3, false)), LinOp::Deriv(3)]),
                LinOp::Id,
            ]),
            d2,
        ])
        .scaled(-1.0),
    ])
}

/// `y^2 dx (dvv - duu) - 2 y^2 dyuv - v du D2`.
pub fn d4_explicit() -> LinOp {
    let d2 = d2_explicit();
    LinOp::Add(vec![
        LinOp::Compose(vec![
            c_op(coord_coeff("y^2", 1, true)),
            LinOp::Deriv(0),
            LinOp::Add(vec![dd(3, 3), dd(2, 2).scaled(-1.0)]),
        ]),
        LinOp::Compose(vec![
            c_op(coord_coeff("y^2", 1, true)),
            LinOp::Deriv(1),
            LinOp::Deriv(2),
            LinOp::Deriv(3),
        ])
        .scaled(-2.0),
        LinOp::Compose(vec![c_op(coord_coeff("v", 3, false)), LinOp::Deriv(2), d2]).scaled(-1.0),
    ])
}

/// The printed closed form of `[D1, D2]`:
/// `2 y^2 dy (duu - dvv) - 4 y^2 dxuv - 2 (v dv D2 + D2)`.
pub fn d1_d2_commutator_explicit() -> LinOp {
    let d2 = d2_explicit();
    LinOp::Add(vec![
        LinOp::Compose(vec![
            c_op(coord_coeff("y^2", 1, true)),
            LinOp::Deriv(1),
            LinOp::Add(vec![dd(2, 2), dd(3, 3).scaled(-1.0)]),
        ])
        .scaled(2.0),
        LinOp::Compose(vec![
            c_op(coord_coeff("y^2", 1, true)),
            LinOp::Deriv(0),
            LinOp::Deriv(2),
            LinOp::Deriv(3),
        ])
        .scaled(-4.0),
        LinOp::Add(vec![
            LinOp::Compose(vec![c_op(coord_coeff("v", 3, false)), LinOp::Deriv(3), d2.clone()]),
            d2,
        ])
        .scaled(-2.0),
    ])
}

pub fn commutator(a: &LinOp, b: &LinOp) -> LinOp {
    LinOp::Add(vec![
        LinOp::Compose(vec![a.clone(), b.clone()]),
        LinOp::Compose(vec![b.clone(), a.clone()]).scaled(-1.0),
    ])
}

// ---------------------------------------------------------------------------
// Invariance probes.

use crate::group::{act_d_jets, act_h_jets, cayley_jets, JacobiElement, StarJacobiElement};

/// `|op(f . g)(p) - (op f)(g p)|` for the half-model action.
pub fn invariance_defect_h(
    op: &LinOp,
    g: &JacobiElement,
    f: &Expr,
    frame: &CoordFrame,
    p: &[f64],
) -> f64 {
    assert_eq!(frame.model(), Model::Half);
    let ctx = frame.ctx(op.degree());
    let jets = frame.point_jets(&ctx, p);
    let (isym, iblk) = act_h_jets(g, &frame.sym_matrix(&jets), &frame.blk_matrix(&jets));
    defect_from_image(op, f, frame, p, &ctx, isym, iblk)
}

/// Same probe for the disk-model action.
pub fn invariance_defect_d(
    op: &LinOp,
    g: &StarJacobiElement,
    f: &Expr,
    frame: &CoordFrame,
    p: &[f64],
) -> f64 {
    assert_eq!(frame.model(), Model::Disk);
    let ctx = frame.ctx(op.degree());
    let jets = frame.point_jets(&ctx, p);
    let (isym, iblk) = act_d_jets(g, &frame.sym_matrix(&jets), &frame.blk_matrix(&jets));
    defect_from_image(op, f, frame, p, &ctx, isym, iblk)
}

fn defect_from_image(
    op: &LinOp,
    f: &Expr,
    frame: &CoordFrame,
    p: &[f64],
    ctx: &Arc<JetContext>,
    isym: JetMatrix,
    iblk: JetMatrix,
) -> f64 {
    let icoords = frame.coords_of_jets(&isym, &iblk);
    let fog = f.eval_jets(&icoords);
    let lhs = op.apply(&fog, frame, p).value();
    let q: Vec<f64> = icoords.iter().map(|j| j.value().re).collect();
    let qjets = frame.point_jets(ctx, &q);
    let rhs = op.apply(&f.eval_jets(&qjets), frame, &q).value();
    (lhs - rhs).norm()
}

/// Intertwining defect through the partial Cayley transform:
/// `|scale * (op_H f)(Phi(p)) - op_D (f . Phi)(p)|` at a disk point `p`.
///
/// `scale` is forced by the chain rule of the block coordinate change
/// `Z = 2i eta (I - W)^{-1}`: every eta-derivative contributes a factor 2
/// relative to the matching Z-derivative, and `I - W Wbar` absorbs the
/// remaining `det(I - W)` factors against `Y`.  Concretely the
/// determinant-type operator pair needs `scale = 4^n` and each entry of
/// the matrix operator pair needs `scale = 4`.
pub fn cayley_intertwine_defect(
    op_h: &LinOp,
    op_d: &LinOp,
    scale: f64,
    f: &Expr,
    frame_h: &CoordFrame,
    frame_d: &CoordFrame,
    p: &[f64],
) -> f64 {
    let order = op_h.degree().max(op_d.degree());
    let ctx_d = frame_d.ctx(order);
    let jets = frame_d.point_jets(&ctx_d, p);
    let (om, z) = cayley_jets(&frame_d.sym_matrix(&jets), &frame_d.blk_matrix(&jets));
    let hcoords = frame_h.coords_of_jets(&om, &z);
    // f . Phi as a germ on the disk chart.
    let foph = f.eval_jets(&hcoords);
    let rhs = op_d.apply(&foph, frame_d, p).value();
    // op_H f at the image point.
    let q: Vec<f64> = hcoords.iter().map(|j| j.value().re).collect();
    let ctx_h = frame_h.ctx(order);
    let qjets = frame_h.point_jets(&ctx_h, &q);
    let lhs = op_h.apply(&f.eval_jets(&qjets), frame_h, &q).value();
    (lhs * cx(scale) - rhs).norm()
}

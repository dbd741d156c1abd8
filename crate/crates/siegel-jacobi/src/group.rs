//! The symplectic group, the Heisenberg group, their semidirect product, the
//! conjugated complex form acting on the disk model, the partial Cayley
//! transform between the two models, and the embedding of the whole product
//! into a larger symplectic group.
//!
//! Matrix conventions: a symplectic element has blocks `[[A, B], [C, D]]`.
//! A Heisenberg element is a triple `(lambda, mu; kappa)` of real matrices
//! (`lambda`, `mu` of size m x n, `kappa` of size m x m) subject to
//! `kappa + mu t(lambda)` symmetric.  `kappa` never enters an action; it is
//! kept because the stabilizer of the base point contains the whole center.

use crate::error::{SjError, SjResult};
use crate::jetmat::JetMatrix;
use crate::tol;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn cx(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const I_UNIT: Complex64 = Complex64::new(0.0, 1.0);

pub fn lift_real(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(cx)
}

/// Largest entry magnitude, tolerating empty matrices (m = 0 blocks).
fn amax_r(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn amax_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn sym_defect(m: &DMatrix<f64>) -> f64 {
    amax_r(&(m - m.transpose()))
}

fn sym_defect_c(m: &DMatrix<Complex64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

fn block(m: &DMatrix<f64>, i0: usize, j0: usize, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |i, j| m[(i0 + i, j0 + j)])
}

/// The standard antisymmetric form `[[0, I], [-I, 0]]`.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Plain scaling-and-squaring matrix exponential.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    assert_eq!(a.nrows(), a.ncols());
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0u32;
    while norm / f64::powi(2.0, s as i32) > 0.5 {
        s += 1;
    }
    let b = a.map(|z| z / cx(f64::powi(2.0, s as i32)));
    let mut acc = DMatrix::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=24 {
        term = (&term * &b).map(|z| z / cx(k as f64));
        acc += &term;
    }
    for _ in 0..s {
        acc = &acc * &acc;
    }
    acc
}

pub fn expm_real(a: &DMatrix<f64>) -> DMatrix<f64> {
    expm(&lift_real(a)).map(|z| z.re)
}

/// Exponential of a real symmetric matrix through its eigendecomposition;
/// the clean way to manufacture well-conditioned positive-definite samples.
fn sym_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn normal_matrix(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    let dist = Normal::new(0.0, 1.0).unwrap();
    DMatrix::from_fn(r, c, |_, _| scale * dist.sample(rng))
}

fn normal_sym(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let dist = Normal::new(0.0, 1.0).unwrap();
    for i in 0..n {
        for j in i..n {
            let v = scale * dist.sample(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// A random unitary matrix from the QR factorization of a complex Gaussian
/// sample, with column phases normalized.
pub fn haar_unitary(rng: &mut impl Rng, n: usize) -> DMatrix<Complex64> {
    let dist = Normal::new(0.0, 1.0).unwrap();
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(dist.sample(rng), dist.sample(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / cx(d.norm());
            for i in 0..n {
                q[(i, j)] *= phase.conj();
            }
        }
    }
    q
}

// ---------------------------------------------------------------------------
// Symplectic matrices

#[derive(Clone, Debug)]
pub struct SymplecticMatrix {
    n: usize,
    m: DMatrix<f64>,
}

pub fn symplectic_residual(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows() / 2;
    let j = standard_j(n);
    (m.transpose() * &j * m - &j).amax()
}

impl SymplecticMatrix {
    pub fn new(m: DMatrix<f64>) -> SjResult<SymplecticMatrix> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
            return Err(SjError::SizeMismatch(format!(
                "symplectic matrix must be square of even size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let res = symplectic_residual(&m);
        if res > tol::SYMPLECTIC_RESIDUAL {
            return Err(SjError::invariant("symplectic relation", res, tol::SYMPLECTIC_RESIDUAL));
        }
        Ok(SymplecticMatrix { n: m.nrows() / 2, m })
    }

    pub fn new_unchecked(m: DMatrix<f64>) -> SymplecticMatrix {
        debug_assert!(symplectic_residual(&m) <= tol::SYMPLECTIC_RESIDUAL);
        SymplecticMatrix { n: m.nrows() / 2, m }
    }

    pub fn identity(n: usize) -> SymplecticMatrix {
        SymplecticMatrix { n, m: DMatrix::identity(2 * n, 2 * n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn a(&self) -> DMatrix<f64> {
        block(&self.m, 0, 0, self.n, self.n)
    }

    pub fn b(&self) -> DMatrix<f64> {
        block(&self.m, 0, self.n, self.n, self.n)
    }

    pub fn c(&self) -> DMatrix<f64> {
        block(&self.m, self.n, 0, self.n, self.n)
    }

    pub fn d(&self) -> DMatrix<f64> {
        block(&self.m, self.n, self.n, self.n, self.n)
    }

    pub fn mul(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        assert_eq!(self.n, other.n);
        SymplecticMatrix::new_unchecked(&self.m * &other.m)
    }

    /// Inverse from the defining relation (`-J t(M) J`), no elimination.
    pub fn inverse(&self) -> SymplecticMatrix {
        let j = standard_j(self.n);
        SymplecticMatrix::new_unchecked(-(&j) * self.m.transpose() * &j)
    }

    /// Moebius action on the symmetric-matrix coordinate.
    pub fn act_omega(&self, omega: &DMatrix<Complex64>) -> SjResult<DMatrix<Complex64>> {
        let a = lift_real(&self.a());
        let b = lift_real(&self.b());
        let c = lift_real(&self.c());
        let d = lift_real(&self.d());
        let den = (&c * omega + &d)
            .try_inverse()
            .ok_or_else(|| SjError::Singular("denominator of the Moebius action".into()))?;
        Ok((&a * omega + &b) * den)
    }
}

// ---------------------------------------------------------------------------
// Heisenberg elements and the semidirect product

#[derive(Clone, Debug)]
pub struct HeisenbergElement {
    lambda: DMatrix<f64>,
    mu: DMatrix<f64>,
    kappa: DMatrix<f64>,
}

impl HeisenbergElement {
    pub fn new(
        lambda: DMatrix<f64>,
        mu: DMatrix<f64>,
        kappa: DMatrix<f64>,
    ) -> SjResult<HeisenbergElement> {
        let (m, n) = (lambda.nrows(), lambda.ncols());
        if mu.nrows() != m || mu.ncols() != n || kappa.nrows() != m || kappa.ncols() != m {
            return Err(SjError::SizeMismatch("Heisenberg component sizes disagree".into()));
        }
        let res = sym_defect(&(&kappa + &mu * lambda.transpose()));
        if res > tol::HEISENBERG_SYMMETRY {
            return Err(SjError::invariant(
                "Heisenberg symmetry constraint",
                res,
                tol::HEISENBERG_SYMMETRY,
            ));
        }
        Ok(HeisenbergElement { lambda, mu, kappa })
    }

    pub fn identity(n: usize, m: usize) -> HeisenbergElement {
        HeisenbergElement {
            lambda: DMatrix::zeros(m, n),
            mu: DMatrix::zeros(m, n),
            kappa: DMatrix::zeros(m, m),
        }
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn mu(&self) -> &DMatrix<f64> {
        &self.mu
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }
}

#[derive(Clone, Debug)]
pub struct JacobiElement {
    sp: SymplecticMatrix,
    h: HeisenbergElement,
}

impl JacobiElement {
    pub fn new(sp: SymplecticMatrix, h: HeisenbergElement) -> SjResult<JacobiElement> {
        if h.lambda.ncols() != sp.n() {
            return Err(SjError::SizeMismatch(
                "Heisenberg block width disagrees with symplectic degree".into(),
            ));
        }
        Ok(JacobiElement { sp, h })
    }

    pub fn identity(n: usize, m: usize) -> JacobiElement {
        JacobiElement { sp: SymplecticMatrix::identity(n), h: HeisenbergElement::identity(n, m) }
    }

    pub fn from_sp(sp: SymplecticMatrix, m: usize) -> JacobiElement {
        let n = sp.n();
        JacobiElement { sp, h: HeisenbergElement::identity(n, m) }
    }

    pub fn sp(&self) -> &SymplecticMatrix {
        &self.sp
    }

    pub fn h(&self) -> &HeisenbergElement {
        &self.h
    }

    pub fn n(&self) -> usize {
        self.sp.n()
    }

    pub fn m(&self) -> usize {
        self.h.lambda.nrows()
    }

    /// Semidirect-product law: the Heisenberg pair is pushed through the
    /// second symplectic factor before the twisted addition.
    pub fn mul(&self, other: &JacobiElement) -> SjResult<JacobiElement> {
        if self.n() != other.n() || self.m() != other.m() {
            return Err(SjError::SizeMismatch("product of differently sized elements".into()));
        }
        let (lt, mt) = push_pair(&self.h.lambda, &self.h.mu, &other.sp);
        let lambda = &lt + &other.h.lambda;
        let mu = &mt + &other.h.mu;
        let kappa = &self.h.kappa
            + &other.h.kappa
            + &lt * other.h.mu.transpose()
            - &mt * other.h.lambda.transpose();
        let h = HeisenbergElement::new(lambda, mu, kappa)?;
        Ok(JacobiElement { sp: self.sp.mul(&other.sp), h })
    }

    pub fn inverse(&self) -> SjResult<JacobiElement> {
        let minv = self.sp.inverse();
        let (lt, mt) = push_pair(&self.h.lambda, &self.h.mu, &minv);
        let lambda = -lt;
        let mu = -mt;
        let kappa =
            -&self.h.kappa + &lambda * mu.transpose() - &mu * lambda.transpose();
        let h = HeisenbergElement::new(lambda, mu, kappa)?;
        Ok(JacobiElement { sp: minv, h })
    }
}

/// `(lambda, mu) M` as a row of two m x n blocks.
fn push_pair(
    lambda: &DMatrix<f64>,
    mu: &DMatrix<f64>,
    sp: &SymplecticMatrix,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let lt = lambda * sp.a() + mu * sp.c();
    let mt = lambda * sp.b() + mu * sp.d();
    (lt, mt)
}

// ---------------------------------------------------------------------------
// Points of the two models

#[derive(Clone, Debug)]
pub struct HPoint {
    omega: DMatrix<Complex64>,
    z: DMatrix<Complex64>,
}

impl HPoint {
    pub fn new(omega: DMatrix<Complex64>, z: DMatrix<Complex64>) -> SjResult<HPoint> {
        let p = HPoint { omega, z };
        p.validate()?;
        Ok(p)
    }

    pub fn new_unchecked(omega: DMatrix<Complex64>, z: DMatrix<Complex64>) -> HPoint {
        let p = HPoint { omega, z };
        debug_assert!(p.validate().is_ok(), "invalid half-space point: {:?}", p.validate());
        p
    }

    fn validate(&self) -> SjResult<()> {
        let n = self.omega.nrows();
        if self.omega.ncols() != n || self.z.ncols() != n {
            return Err(SjError::SizeMismatch("point blocks disagree".into()));
        }
        let res = sym_defect_c(&self.omega);
        if res > tol::POINT_SYMMETRY {
            return Err(SjError::invariant("symmetry of Omega", res, tol::POINT_SYMMETRY));
        }
        let y = self.y();
        if nalgebra::Cholesky::new(y).is_none() {
            return Err(SjError::invariant("positivity of Im Omega", f64::NAN, 0.0));
        }
        Ok(())
    }

    pub fn base(n: usize, m: usize) -> HPoint {
        HPoint {
            omega: DMatrix::from_diagonal_element(n, n, I_UNIT),
            z: DMatrix::zeros(m, n),
        }
    }

    pub fn omega(&self) -> &DMatrix<Complex64> {
        &self.omega
    }

    pub fn z(&self) -> &DMatrix<Complex64> {
        &self.z
    }

    pub fn n(&self) -> usize {
        self.omega.nrows()
    }

    pub fn m(&self) -> usize {
        self.z.nrows()
    }

    pub fn x(&self) -> DMatrix<f64> {
        self.omega.map(|w| w.re)
    }

    pub fn y(&self) -> DMatrix<f64> {
        self.omega.map(|w| w.im)
    }

    pub fn u(&self) -> DMatrix<f64> {
        self.z.map(|w| w.re)
    }

    pub fn v(&self) -> DMatrix<f64> {
        self.z.map(|w| w.im)
    }
}

#[derive(Clone, Debug)]
pub struct DPoint {
    w: DMatrix<Complex64>,
    eta: DMatrix<Complex64>,
}

impl DPoint {
    pub fn new(w: DMatrix<Complex64>, eta: DMatrix<Complex64>) -> SjResult<DPoint> {
        let p = DPoint { w, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn new_unchecked(w: DMatrix<Complex64>, eta: DMatrix<Complex64>) -> DPoint {
        let p = DPoint { w, eta };
        debug_assert!(p.validate().is_ok(), "invalid disk point: {:?}", p.validate());
        p
    }

    fn validate(&self) -> SjResult<()> {
        let n = self.w.nrows();
        if self.w.ncols() != n || self.eta.ncols() != n {
            return Err(SjError::SizeMismatch("point blocks disagree".into()));
        }
        let res = sym_defect_c(&self.w);
        if res > tol::POINT_SYMMETRY {
            return Err(SjError::invariant("symmetry of W", res, tol::POINT_SYMMETRY));
        }
        let gram = DMatrix::identity(n, n) - self.w.map(|z| z.conj()) * &self.w;
        if nalgebra::Cholesky::new(gram).is_none() {
            return Err(SjError::invariant("disk positivity", f64::NAN, 0.0));
        }
        Ok(())
    }

    pub fn origin(n: usize, m: usize) -> DPoint {
        DPoint { w: DMatrix::zeros(n, n), eta: DMatrix::zeros(m, n) }
    }

    pub fn w(&self) -> &DMatrix<Complex64> {
        &self.w
    }

    pub fn eta(&self) -> &DMatrix<Complex64> {
        &self.eta
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn m(&self) -> usize {
        self.eta.nrows()
    }
}

// ---------------------------------------------------------------------------
// Actions on the half-space model

fn symmetrize_c(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)]) * cx(0.5))
}

pub fn act_h(g: &JacobiElement, p: &HPoint) -> SjResult<HPoint> {
    if g.n() != p.n() || g.m() != p.m() {
        return Err(SjError::SizeMismatch("group element and point sizes disagree".into()));
    }
    let c = lift_real(&g.sp().c());
    let d = lift_real(&g.sp().d());
    let den = (&c * p.omega() + &d)
        .try_inverse()
        .ok_or_else(|| SjError::Singular("denominator of the action".into()))?;
    let omega = symmetrize_c(&(((lift_real(&g.sp().a()) * p.omega()) + lift_real(&g.sp().b())) * &den));
    let z = (p.z() + lift_real(g.h().lambda()) * p.omega() + lift_real(g.h().mu())) * &den;
    Ok(HPoint::new_unchecked(omega, z))
}

/// Same action with jet-valued coordinates, for pullbacks and germs.
pub fn act_h_jets(g: &JacobiElement, omega: &JetMatrix, z: &JetMatrix) -> (JetMatrix, JetMatrix) {
    let ctx = omega.ctx();
    let a = JetMatrix::from_real(ctx, &g.sp().a());
    let b = JetMatrix::from_real(ctx, &g.sp().b());
    let c = JetMatrix::from_real(ctx, &g.sp().c());
    let d = JetMatrix::from_real(ctx, &g.sp().d());
    let lam = JetMatrix::from_real(ctx, g.h().lambda());
    let mu = JetMatrix::from_real(ctx, g.h().mu());
    let den = c.mul(omega).add(&d).inverse();
    let omega_new = a.mul(omega).add(&b).mul(&den);
    let z_new = z.add(&lam.mul(omega)).add(&mu).mul(&den);
    (omega_new, z_new)
}

// ---------------------------------------------------------------------------
// The conjugated form acting on the disk model

#[derive(Clone, Debug)]
pub struct StarJacobiElement {
    p: DMatrix<Complex64>,
    q: DMatrix<Complex64>,
    xi: DMatrix<Complex64>,
    kappa: DMatrix<f64>,
}

impl StarJacobiElement {
    pub fn new(
        p: DMatrix<Complex64>,
        q: DMatrix<Complex64>,
        xi: DMatrix<Complex64>,
        kappa: DMatrix<f64>,
    ) -> SjResult<StarJacobiElement> {
        let g = StarJacobiElement { p, q, xi, kappa };
        let back = g.to_jacobi()?;
        let again = to_star(&back);
        let res = amax_c(&(&g.p - &again.p))
            .max(amax_c(&(&g.q - &again.q)))
            .max(amax_c(&(&g.xi - &again.xi)));
        if res > tol::STAR_ROUNDTRIP {
            return Err(SjError::invariant("conjugated-form round trip", res, tol::STAR_ROUNDTRIP));
        }
        Ok(g)
    }

    fn new_unchecked(
        p: DMatrix<Complex64>,
        q: DMatrix<Complex64>,
        xi: DMatrix<Complex64>,
        kappa: DMatrix<f64>,
    ) -> StarJacobiElement {
        StarJacobiElement { p, q, xi, kappa }
    }

    pub fn identity(n: usize, m: usize) -> StarJacobiElement {
        StarJacobiElement {
            p: DMatrix::identity(n, n),
            q: DMatrix::zeros(n, n),
            xi: DMatrix::zeros(m, n),
            kappa: DMatrix::zeros(m, m),
        }
    }

    pub fn p(&self) -> &DMatrix<Complex64> {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<Complex64> {
        &self.q
    }

    pub fn xi(&self) -> &DMatrix<Complex64> {
        &self.xi
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn m(&self) -> usize {
        self.xi.nrows()
    }

    /// Decode back to the real form: the matrix part inverts the conjugation
    /// blockwise, the Heisenberg part splits xi into its two real slices.
    pub fn to_jacobi(&self) -> SjResult<JacobiElement> {
        let n = self.n();
        let sum = &self.p + &self.q;
        let dif = &self.p - &self.q;
        let a = sum.map(|z| z.re);
        let c = sum.map(|z| -z.im);
        let d = dif.map(|z| z.re);
        let b = dif.map(|z| z.im);
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = a[(i, j)];
                m[(i, n + j)] = b[(i, j)];
                m[(n + i, j)] = c[(i, j)];
                m[(n + i, n + j)] = d[(i, j)];
            }
        }
        let lambda = self.xi.map(|z| 2.0 * z.re);
        let mu = self.xi.map(|z| 2.0 * z.im);
        JacobiElement::new(
            SymplecticMatrix::new(m)?,
            HeisenbergElement::new(lambda, mu, self.kappa.clone())?,
        )
    }

    /// Group law of the conjugated form, working inside the complexified
    /// Heisenberg group where the center carries `-i kappa / 2`.
    pub fn mul(&self, other: &StarJacobiElement) -> SjResult<StarJacobiElement> {
        if self.n() != other.n() || self.m() != other.m() {
            return Err(SjError::SizeMismatch("product of differently sized elements".into()));
        }
        let p = &self.p * &other.p + &self.q * other.q.map(|z| z.conj());
        let q = &self.p * &other.q + &self.q * other.p.map(|z| z.conj());
        let eta = self.xi.map(|z| z.conj());
        let xi_t = &self.xi * &other.p + &eta * other.q.map(|z| z.conj());
        let eta_t = &self.xi * &other.q + &eta * other.p.map(|z| z.conj());
        let xi = &xi_t + &other.xi;
        let zeta_self = self.kappa.map(|k| -I_UNIT * cx(k) * cx(0.5));
        let zeta_other = other.kappa.map(|k| -I_UNIT * cx(k) * cx(0.5));
        let twist = &xi_t * other.xi.map(|z| z.conj()).transpose()
            - &eta_t * other.xi.transpose();
        let zeta = zeta_self + zeta_other + twist;
        let kappa_c = zeta.map(|z| Complex64::new(0.0, 2.0) * z);
        let imag = kappa_c.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > tol::STAR_ROUNDTRIP {
            return Err(SjError::invariant("real center after product", imag, tol::STAR_ROUNDTRIP));
        }
        Ok(StarJacobiElement::new_unchecked(p, q, xi, kappa_c.map(|z| z.re)))
    }
}

/// Conjugate a real element into the form acting on the disk model.
pub fn to_star(g: &JacobiElement) -> StarJacobiElement {
    let a = lift_real(&g.sp().a());
    let b = lift_real(&g.sp().b());
    let c = lift_real(&g.sp().c());
    let d = lift_real(&g.sp().d());
    let p = (&a + &d + (&b - &c).map(|z| z * I_UNIT)).map(|z| z * cx(0.5));
    let q = (&a - &d - (&b + &c).map(|z| z * I_UNIT)).map(|z| z * cx(0.5));
    let xi = DMatrix::from_fn(g.m(), g.n(), |i, j| {
        (cx(g.h().lambda()[(i, j)]) + cx(g.h().mu()[(i, j)]) * I_UNIT) * cx(0.5)
    });
    StarJacobiElement::new_unchecked(p, q, xi, g.h().kappa().clone())
}

pub fn act_d(g: &StarJacobiElement, p: &DPoint) -> SjResult<DPoint> {
    if g.n() != p.n() || g.m() != p.m() {
        return Err(SjError::SizeMismatch("group element and point sizes disagree".into()));
    }
    let qbar = g.q.map(|z| z.conj());
    let pbar = g.p.map(|z| z.conj());
    let den = (&qbar * p.w() + &pbar)
        .try_inverse()
        .ok_or_else(|| SjError::Singular("denominator of the disk action".into()))?;
    let w = symmetrize_c(&((&g.p * p.w() + &g.q) * &den));
    let xibar = g.xi.map(|z| z.conj());
    let eta = (p.eta() + &g.xi * p.w() + &xibar) * &den;
    Ok(DPoint::new_unchecked(w, eta))
}

pub fn act_d_jets(g: &StarJacobiElement, w: &JetMatrix, eta: &JetMatrix) -> (JetMatrix, JetMatrix) {
    let ctx = w.ctx();
    let p = JetMatrix::from_complex(ctx, &g.p);
    let q = JetMatrix::from_complex(ctx, &g.q);
    let pbar = JetMatrix::from_complex(ctx, &g.p.map(|z| z.conj()));
    let qbar = JetMatrix::from_complex(ctx, &g.q.map(|z| z.conj()));
    let xi = JetMatrix::from_complex(ctx, &g.xi);
    let xibar = JetMatrix::from_complex(ctx, &g.xi.map(|z| z.conj()));
    let den = qbar.mul(w).add(&pbar).inverse();
    let w_new = p.mul(w).add(&q).mul(&den);
    let eta_new = eta.add(&xi.mul(w)).add(&xibar).mul(&den);
    (w_new, eta_new)
}

// ---------------------------------------------------------------------------
// Partial Cayley transform

pub fn cayley(p: &DPoint) -> SjResult<HPoint> {
    let n = p.n();
    let id = DMatrix::<Complex64>::identity(n, n);
    let inv = (&id - p.w())
        .try_inverse()
        .ok_or_else(|| SjError::Singular("I - W in the Cayley transform".into()))?;
    let omega = symmetrize_c(&((&id + p.w()).map(|z| z * I_UNIT) * &inv));
    let z = p.eta().map(|z| z * cx(2.0) * I_UNIT) * &inv;
    Ok(HPoint::new_unchecked(omega, z))
}

pub fn cayley_inv(p: &HPoint) -> SjResult<DPoint> {
    let n = p.n();
    let i_id = DMatrix::from_diagonal_element(n, n, I_UNIT);
    let inv = (p.omega() + &i_id)
        .try_inverse()
        .ok_or_else(|| SjError::Singular("Omega + iI in the inverse Cayley transform".into()))?;
    let w = symmetrize_c(&((p.omega() - &i_id) * &inv));
    let eta = p.z() * &inv;
    Ok(DPoint::new_unchecked(w, eta))
}

/// Cayley transform over jet coordinates: disk to half-space.
pub fn cayley_jets(w: &JetMatrix, eta: &JetMatrix) -> (JetMatrix, JetMatrix) {
    let ctx = w.ctx();
    let n = w.nrows();
    let id = JetMatrix::identity(ctx, n);
    let inv = id.sub(w).inverse();
    let omega = id.add(w).scale(I_UNIT).mul(&inv);
    let z = eta.scale(Complex64::new(0.0, 2.0)).mul(&inv);
    (omega, z)
}

/// Inverse Cayley transform over jet coordinates: half-space to disk.
pub fn cayley_inv_jets(omega: &JetMatrix, z: &JetMatrix) -> (JetMatrix, JetMatrix) {
    let ctx = omega.ctx();
    let n = omega.nrows();
    let i_id = JetMatrix::identity(ctx, n).scale(I_UNIT);
    let inv = omega.add(&i_id).inverse();
    let w = omega.sub(&i_id).mul(&inv);
    let eta = z.mul(&inv);
    (w, eta)
}

// ---------------------------------------------------------------------------
// Embedding into the larger symplectic group

/// Block embedding into a symplectic group of degree n + m.  Row and column
/// blocks have sizes (n, m, n, m).
pub fn embed_sp_mn(g: &JacobiElement) -> DMatrix<f64> {
    let n = g.n();
    let m = g.m();
    let a = g.sp().a();
    let b = g.sp().b();
    let c = g.sp().c();
    let d = g.sp().d();
    let lam = g.h().lambda();
    let mu = g.h().mu();
    let kap = g.h().kappa();
    let tb = &a * mu.transpose() - &b * lam.transpose();
    let td = &c * mu.transpose() - &d * lam.transpose();
    let size = 2 * (n + m);
    let mut e = DMatrix::zeros(size, size);
    let (r0, r1, r2, r3) = (0, n, n + m, 2 * n + m);
    for i in 0..n {
        for j in 0..n {
            e[(r0 + i, r0 + j)] = a[(i, j)];
            e[(r0 + i, r2 + j)] = b[(i, j)];
            e[(r2 + i, r0 + j)] = c[(i, j)];
            e[(r2 + i, r2 + j)] = d[(i, j)];
        }
        for k in 0..m {
            e[(r0 + i, r3 + k)] = tb[(i, k)];
            e[(r2 + i, r3 + k)] = td[(i, k)];
        }
    }
    for k in 0..m {
        e[(r1 + k, r1 + k)] = 1.0;
        e[(r3 + k, r3 + k)] = 1.0;
        for j in 0..n {
            e[(r1 + k, r0 + j)] = lam[(k, j)];
            e[(r1 + k, r2 + j)] = mu[(k, j)];
        }
        for j in 0..m {
            e[(r1 + k, r3 + j)] = kap[(k, j)];
        }
    }
    e
}

// ---------------------------------------------------------------------------
// Lie algebra, exponential, random elements

fn sp_residual(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows() / 2;
    let j = standard_j(n);
    (x.transpose() * &j + &j * x).amax()
}

#[derive(Clone, Debug)]
pub struct JacobiLie {
    x: DMatrix<f64>,
    p: DMatrix<f64>,
    q: DMatrix<f64>,
    kappa: DMatrix<f64>,
}

impl JacobiLie {
    pub fn new(
        x: DMatrix<f64>,
        p: DMatrix<f64>,
        q: DMatrix<f64>,
        kappa: DMatrix<f64>,
    ) -> SjResult<JacobiLie> {
        if x.nrows() != x.ncols() || x.nrows() % 2 != 0 {
            return Err(SjError::SizeMismatch("Lie sample must be square of even size".into()));
        }
        let n = x.nrows() / 2;
        if p.ncols() != n || q.ncols() != n || p.nrows() != q.nrows() {
            return Err(SjError::SizeMismatch("Heisenberg Lie blocks disagree".into()));
        }
        let res = sp_residual(&x);
        if res > tol::SYMPLECTIC_RESIDUAL {
            return Err(SjError::invariant("symplectic Lie relation", res, tol::SYMPLECTIC_RESIDUAL));
        }
        let ksym = sym_defect(&kappa);
        if ksym > tol::HEISENBERG_SYMMETRY {
            return Err(SjError::invariant("symmetric center sample", ksym, tol::HEISENBERG_SYMMETRY));
        }
        Ok(JacobiLie { x, p, q, kappa })
    }

    pub fn zero(n: usize, m: usize) -> JacobiLie {
        JacobiLie {
            x: DMatrix::zeros(2 * n, 2 * n),
            p: DMatrix::zeros(m, n),
            q: DMatrix::zeros(m, n),
            kappa: DMatrix::zeros(m, m),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows() / 2
    }

    pub fn m(&self) -> usize {
        self.p.nrows()
    }

    pub fn scale(&self, t: f64) -> JacobiLie {
        JacobiLie {
            x: &self.x * t,
            p: &self.p * t,
            q: &self.q * t,
            kappa: &self.kappa * t,
        }
    }

    /// Gaussian sample: full sp block plus Heisenberg directions.
    pub fn random(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> JacobiLie {
        let a = normal_matrix(rng, n, n, scale);
        let b = normal_sym(rng, n, scale);
        let c = normal_sym(rng, n, scale);
        let mut x = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                x[(i, j)] = a[(i, j)];
                x[(i, n + j)] = b[(i, j)];
                x[(n + i, j)] = c[(i, j)];
                x[(n + i, n + j)] = -a[(j, i)];
            }
        }
        JacobiLie {
            x,
            p: normal_matrix(rng, m, n, scale),
            q: normal_matrix(rng, m, n, scale),
            kappa: normal_sym(rng, m, scale),
        }
    }
}

/// The Lie-algebra counterpart of [`embed_sp_mn`].
pub fn embed_lie(l: &JacobiLie) -> DMatrix<f64> {
    let n = l.n();
    let m = l.m();
    let size = 2 * (n + m);
    let mut e = DMatrix::zeros(size, size);
    let (r0, r1, r2, r3) = (0, n, n + m, 2 * n + m);
    for i in 0..n {
        for j in 0..n {
            e[(r0 + i, r0 + j)] = l.x[(i, j)];
            e[(r0 + i, r2 + j)] = l.x[(i, n + j)];
            e[(r2 + i, r0 + j)] = l.x[(n + i, j)];
            e[(r2 + i, r2 + j)] = l.x[(n + i, n + j)];
        }
        for k in 0..m {
            e[(r0 + i, r3 + k)] = l.q[(k, i)];
            e[(r2 + i, r3 + k)] = -l.p[(k, i)];
        }
    }
    for k in 0..m {
        for j in 0..n {
            e[(r1 + k, r0 + j)] = l.p[(k, j)];
            e[(r1 + k, r2 + j)] = l.q[(k, j)];
        }
        for j in 0..m {
            e[(r1 + k, r3 + j)] = l.kappa[(k, j)];
        }
    }
    e
}

/// Exponential through the embedding, decoded back into a group element.
pub fn jacobi_exp(l: &JacobiLie) -> JacobiElement {
    let n = l.n();
    let m = l.m();
    let e = expm_real(&embed_lie(l));
    let (r0, r1, r2, r3) = (0, n, n + m, 2 * n + m);
    let a = block(&e, r0, r0, n, n);
    let b = block(&e, r0, r2, n, n);
    let c = block(&e, r2, r0, n, n);
    let d = block(&e, r2, r2, n, n);
    let lam = block(&e, r1, r0, m, n);
    let mu = block(&e, r1, r2, m, n);
    let kap = block(&e, r1, r3, m, m);
    // The exponential must land in the embedded copy; anything else is an
    // implementation bug, not bad input.
    debug_assert!(amax_r(&block(&e, r0, r1, n, m)) < 1e-9);
    debug_assert!(amax_r(&block(&e, r2, r1, n, m)) < 1e-9);
    debug_assert!(amax_r(&block(&e, r3, 0, m, 2 * n + m)) < 1e-9);
    debug_assert!(amax_r(&(block(&e, r3, r3, m, m) - DMatrix::identity(m, m))) < 1e-9);
    let mut sp = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            sp[(i, j)] = a[(i, j)];
            sp[(i, n + j)] = b[(i, j)];
            sp[(n + i, j)] = c[(i, j)];
            sp[(n + i, n + j)] = d[(i, j)];
        }
    }
    let sp = SymplecticMatrix::new_unchecked(sp);
    let h = HeisenbergElement::new(lam, mu, kap)
        .expect("exponential produced an invalid Heisenberg component");
    JacobiElement { sp, h }
}

pub fn random_jacobi(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> JacobiElement {
    jacobi_exp(&JacobiLie::random(rng, n, m, scale))
}

pub fn random_sp(rng: &mut impl Rng, n: usize, scale: f64) -> SymplecticMatrix {
    let l = JacobiLie::random(rng, n, 0, scale);
    SymplecticMatrix::new_unchecked(expm_real(&l.x))
}

/// Random element of the stabilizer of the base point: a unitary rotation
/// block plus an arbitrary symmetric center.
pub fn random_stabilizer(rng: &mut impl Rng, n: usize, m: usize, kappa_scale: f64) -> JacobiElement {
    let u = haar_unitary(rng, n);
    let mut sp = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            sp[(i, j)] = u[(i, j)].re;
            sp[(i, n + j)] = u[(i, j)].im;
            sp[(n + i, j)] = -u[(i, j)].im;
            sp[(n + i, n + j)] = u[(i, j)].re;
        }
    }
    let h = HeisenbergElement::new(
        DMatrix::zeros(m, n),
        DMatrix::zeros(m, n),
        normal_sym(rng, m, kappa_scale),
    )
    .expect("zero translation with symmetric center is always valid");
    JacobiElement { sp: SymplecticMatrix::new_unchecked(sp), h }
}

pub fn random_h_point(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> HPoint {
    let x = normal_sym(rng, n, scale);
    let y = sym_expm(&normal_sym(rng, n, scale));
    let omega = DMatrix::from_fn(n, n, |i, j| Complex64::new(x[(i, j)], y[(i, j)]));
    let u = normal_matrix(rng, m, n, scale);
    let v = normal_matrix(rng, m, n, scale);
    let z = DMatrix::from_fn(m, n, |i, j| Complex64::new(u[(i, j)], v[(i, j)]));
    HPoint::new_unchecked(omega, z)
}

pub fn random_d_point(rng: &mut impl Rng, n: usize, m: usize, scale: f64) -> DPoint {
    cayley_inv(&random_h_point(rng, n, m, scale))
        .expect("inverse Cayley transform is defined on the whole half-space")
}

/// A group element carrying the base point to the given point: a shear for
/// the real part, a dilation from the Cholesky factor of the imaginary part,
/// and a Heisenberg translation for the block coordinate.
pub fn point_to_group(p: &HPoint) -> JacobiElement {
    let n = p.n();
    let y = p.y();
    let chol = nalgebra::Cholesky::new(y).expect("point has positive-definite imaginary part");
    let l = chol.l();
    let lt_inv = l
        .transpose()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    let x = p.x();
    let mut sp = DMatrix::zeros(2 * n, 2 * n);
    let b = &x * &lt_inv;
    for i in 0..n {
        for j in 0..n {
            sp[(i, j)] = l[(i, j)];
            sp[(i, n + j)] = b[(i, j)];
            sp[(n + i, n + j)] = lt_inv[(i, j)];
        }
    }
    let mu = p.u() * &lt_inv;
    let lambda = p.v() * &lt_inv;
    let mlt = &mu * lambda.transpose();
    let kappa = (mlt.transpose() - &mlt) * 0.5;
    let h = HeisenbergElement::new(lambda, mu, kappa)
        .expect("antisymmetric kappa completes a valid Heisenberg element");
    JacobiElement { sp: SymplecticMatrix::new_unchecked(sp), h }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(71)
    }

    #[test]
    fn heisenberg_product_matches_hand_computation() {
        // (I,(1,0;0)) * (I,(0,1;0)) = (I,(1,1;1)) in the scalar case.
        let e = |l: f64, m: f64, k: f64| {
            JacobiElement::new(
                SymplecticMatrix::identity(1),
                HeisenbergElement::new(
                    DMatrix::from_element(1, 1, l),
                    DMatrix::from_element(1, 1, m),
                    DMatrix::from_element(1, 1, k),
                )
                .unwrap(),
            )
            .unwrap()
        };
        let g = e(1.0, 0.0, 0.0).mul(&e(0.0, 1.0, 0.0)).unwrap();
        assert!((g.h().lambda()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((g.h().mu()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((g.h().kappa()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inversion_matrix_acts_on_scalar_point() {
        // The inversion element sends (i, 1) to (i, i) in the scalar case.
        let j = SymplecticMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))
            .unwrap();
        let g = JacobiElement::from_sp(j, 1);
        let p = HPoint::new(
            DMatrix::from_element(1, 1, I_UNIT),
            DMatrix::from_element(1, 1, cx(1.0)),
        )
        .unwrap();
        let q = act_h(&g, &p).unwrap();
        assert!((q.omega()[(0, 0)] - I_UNIT).norm() < 1e-14);
        assert!((q.z()[(0, 0)] - I_UNIT).norm() < 1e-14);
    }

    #[test]
    fn action_composes() {
        let mut r = rng();
        for _ in 0..20 {
            let g1 = random_jacobi(&mut r, 2, 1, 0.5);
            let g2 = random_jacobi(&mut r, 2, 1, 0.5);
            let p = random_h_point(&mut r, 2, 1, 0.5);
            let lhs = act_h(&g1.mul(&g2).unwrap(), &p).unwrap();
            let rhs = act_h(&g1, &act_h(&g2, &p).unwrap()).unwrap();
            let d = (lhs.omega() - rhs.omega()).map(|z| z.norm()).amax()
                + (lhs.z() - rhs.z()).map(|z| z.norm()).amax();
            assert!(d < 1e-10, "composition defect {d}");
        }
    }

    #[test]
    fn star_form_of_inversion_matrix() {
        let j = SymplecticMatrix::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]))
            .unwrap();
        let s = to_star(&JacobiElement::from_sp(j, 1));
        // A = D = 0, B = 1, C = -1 gives P = i, Q = 0.
        assert!((s.p()[(0, 0)] - I_UNIT).norm() < 1e-15);
        assert!(s.q()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn star_map_is_a_homomorphism() {
        let mut r = rng();
        for _ in 0..20 {
            let g1 = random_jacobi(&mut r, 2, 2, 0.5);
            let g2 = random_jacobi(&mut r, 2, 2, 0.5);
            let lhs = to_star(&g1.mul(&g2).unwrap());
            let rhs = to_star(&g1).mul(&to_star(&g2)).unwrap();
            let d = (lhs.p() - rhs.p()).map(|z| z.norm()).amax()
                .max((lhs.q() - rhs.q()).map(|z| z.norm()).amax())
                .max((lhs.xi() - rhs.xi()).map(|z| z.norm()).amax())
                .max((lhs.kappa() - rhs.kappa()).amax());
            assert!(d < 1e-10, "homomorphism defect {d}");
        }
    }

    #[test]
    fn cayley_round_trip_and_equivariance() {
        let mut r = rng();
        for _ in 0..20 {
            let p = random_d_point(&mut r, 2, 1, 0.5);
            let q = cayley(&p).unwrap();
            let back = cayley_inv(&q).unwrap();
            let d = (back.w() - p.w()).map(|z| z.norm()).amax()
                + (back.eta() - p.eta()).map(|z| z.norm()).amax();
            assert!(d < 1e-12, "round-trip defect {d}");

            let g = random_jacobi(&mut r, 2, 1, 0.5);
            let lhs = act_h(&g, &q).unwrap();
            let rhs = cayley(&act_d(&to_star(&g), &p).unwrap()).unwrap();
            let d = (lhs.omega() - rhs.omega()).map(|z| z.norm()).amax()
                + (lhs.z() - rhs.z()).map(|z| z.norm()).amax();
            assert!(d < 1e-10, "equivariance defect {d}");
        }
    }

    #[test]
    fn embedding_is_a_homomorphism_into_the_larger_group() {
        let mut r = rng();
        for _ in 0..10 {
            let g1 = random_jacobi(&mut r, 2, 2, 0.5);
            let g2 = random_jacobi(&mut r, 2, 2, 0.5);
            let lhs = embed_sp_mn(&g1.mul(&g2).unwrap());
            let rhs = embed_sp_mn(&g1) * embed_sp_mn(&g2);
            assert!((lhs - rhs).amax() < 1e-11);
            assert!(symplectic_residual(&embed_sp_mn(&g1)) < 1e-11);
        }
    }

    #[test]
    fn exponential_gives_one_parameter_subgroups() {
        let mut r = rng();
        let l = JacobiLie::random(&mut r, 2, 1, 0.4);
        let g = jacobi_exp(&l.scale(0.3)).mul(&jacobi_exp(&l.scale(0.7))).unwrap();
        let whole = jacobi_exp(&l);
        assert!((g.sp().matrix() - whole.sp().matrix()).amax() < 1e-11);
        assert!((g.h().lambda() - whole.h().lambda()).amax() < 1e-11);
        assert!((g.h().mu() - whole.h().mu()).amax() < 1e-11);
        assert!((g.h().kappa() - whole.h().kappa()).amax() < 1e-11);
    }

    #[test]
    fn stabilizer_fixes_the_base_point() {
        let mut r = rng();
        for _ in 0..10 {
            let k = random_stabilizer(&mut r, 2, 2, 0.7);
            let p = act_h(&k, &HPoint::base(2, 2)).unwrap();
            let d = (p.omega() - HPoint::base(2, 2).omega()).map(|z| z.norm()).amax()
                + p.z().map(|z| z.norm()).amax();
            assert!(d < 1e-12, "stabilizer moved the base point by {d}");
        }
    }

    #[test]
    fn point_to_group_reaches_the_point() {
        let mut r = rng();
        for _ in 0..10 {
            let p = random_h_point(&mut r, 2, 2, 0.5);
            let g = point_to_group(&p);
            let q = act_h(&g, &HPoint::base(2, 2)).unwrap();
            let d = (q.omega() - p.omega()).map(|z| z.norm()).amax()
                + (q.z() - p.z()).map(|z| z.norm()).amax();
            assert!(d < 1e-12, "transport defect {d}");
        }
    }

    #[test]
    fn inverse_cancels() {
        let mut r = rng();
        let g = random_jacobi(&mut r, 2, 2, 0.5);
        let e = g.mul(&g.inverse().unwrap()).unwrap();
        assert!((e.sp().matrix() - DMatrix::identity(4, 4)).amax() < 1e-12);
        assert!(e.h().lambda().amax() < 1e-12);
        assert!(e.h().mu().amax() < 1e-12);
        assert!(e.h().kappa().amax() < 1e-12);
    }

    #[test]
    fn jet_action_matches_numeric_action_at_the_base_point() {
        use crate::frame::{CoordFrame, Model};
        let mut r = rng();
        let f = CoordFrame::new(Model::Half, 2, 1);
        let g = random_jacobi(&mut r, 2, 1, 0.5);
        let p = random_h_point(&mut r, 2, 1, 0.5);
        let pt = f.coords_of(p.omega(), p.z());
        let ctx = f.ctx(1);
        let jets = f.point_jets(&ctx, &pt);
        let (oj, zj) = act_h_jets(&g, &f.sym_matrix(&jets), &f.blk_matrix(&jets));
        let q = act_h(&g, &p).unwrap();
        assert!((oj.value() - q.omega().clone()).map(|z| z.norm()).amax() < 1e-12);
        assert!((zj.value() - q.z().clone()).map(|z| z.norm()).amax() < 1e-12);
    }
}

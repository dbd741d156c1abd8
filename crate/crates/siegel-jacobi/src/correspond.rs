//! From invariant polynomials on the tangent space to invariant
//! differential operators on the half-space model.
//!
//! The construction works at the base point `(iI, 0)`.  Pick an orthogonal
//! basis of tangent directions there, each realized as an ambient
//! Lie-algebra sample.  A group element `g` carrying the base point to `p`
//! turns a function `f` on the space into a germ in path parameters,
//!
//! ```text
//! F(t) = f( g exp(-sum_a t_a E_a) . base ),
//! ```
//!
//! and pairing `F` against the input polynomial — read through the tangent
//! identification, with the basis Gram factors divided out — gives the
//! operator value at `p`.  Unitary invariance of the polynomial is exactly
//! what makes the result independent of which `g` was chosen, so
//! non-invariant inputs are refused up front rather than silently producing
//! a gauge-dependent "operator".
//!
//! Two conventions are easy to get backwards and are pinned down by the
//! scalar display tests:
//!
//! * the path runs along the *negated* basis directions; the opposite sign
//!   flips every odd-degree operator while leaving even degrees alone, so a
//!   test suite with only quadratic polynomials would never notice;
//! * off-diagonal symmetric directions have squared length 2, not 1, and
//!   forgetting the division halves their contribution.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{SjError, SjResult};
use crate::frame::{CoordFrame, Model};
use crate::group::{
    act_h_jets, embed_lie, embed_sp_mn, point_to_group, random_h_point, HPoint, JacobiElement,
    JacobiLie,
};
use crate::invariant::{check_u_invariance, InvariantPolynomial};
use crate::jet::{Jet, JetContext};
use crate::jetmat::JetMatrix;
use crate::testfn::{standard_library, Expr};
use crate::tol;

fn cx(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

const I_UNIT: Complex64 = Complex64::new(0.0, 1.0);

// ---------------------------------------------------------------------------
// Tangent basis at the base point.

/// One tangent direction: the ambient Lie-algebra sample to exponentiate,
/// its image under the standard complex identification, and its squared
/// length in the tangent inner product.
struct BasisDir {
    lie: JacobiLie,
    omega: DMatrix<Complex64>,
    z: DMatrix<Complex64>,
    gram: f64,
}

/// Orthogonal basis of the tangent space at `(iI, 0)`.
///
/// Ordering: symmetric "real" directions (upper triangle, row-major), then
/// symmetric "imaginary" directions in the same order, then the block
/// directions pairing with `Re z` (row-major), then those pairing with
/// `Im z`.  The count is `n(n+1) + 2mn`, matching the chart dimension.
pub struct TangentBasis {
    n: usize,
    m: usize,
    dirs: Vec<BasisDir>,
}

impl TangentBasis {
    pub fn new(n: usize, m: usize) -> TangentBasis {
        let sym = |i: usize, j: usize| -> DMatrix<f64> {
            let mut s = DMatrix::zeros(n, n);
            s[(i, j)] = 1.0;
            s[(j, i)] = 1.0;
            s
        };
        let zero_blk = || DMatrix::<f64>::zeros(m, n);
        let zero_kappa = || DMatrix::<f64>::zeros(m, m);
        let mut dirs = Vec::with_capacity(n * (n + 1) + 2 * m * n);
        // Block-diagonal symmetric samples; image is the real matrix itself.
        for i in 0..n {
            for j in i..n {
                let s = sym(i, j);
                let mut x = DMatrix::zeros(2 * n, 2 * n);
                x.view_mut((0, 0), (n, n)).copy_from(&s);
                x.view_mut((n, n), (n, n)).copy_from(&(-&s));
                dirs.push(BasisDir {
                    lie: JacobiLie::new(x, zero_blk(), zero_blk(), zero_kappa())
                        .expect("basis sample has consistent shapes"),
                    omega: s.map(cx),
                    z: DMatrix::zeros(m, n),
                    gram: if i == j { 1.0 } else { 2.0 },
                });
            }
        }
        // Off-diagonal symmetric samples; image picks up a factor i.
        for i in 0..n {
            for j in i..n {
                let s = sym(i, j);
                let mut x = DMatrix::zeros(2 * n, 2 * n);
                x.view_mut((0, n), (n, n)).copy_from(&s);
                x.view_mut((n, 0), (n, n)).copy_from(&s);
                dirs.push(BasisDir {
                    lie: JacobiLie::new(x, zero_blk(), zero_blk(), zero_kappa())
                        .expect("basis sample has consistent shapes"),
                    omega: s.map(|v| Complex64::new(0.0, v)),
                    z: DMatrix::zeros(m, n),
                    gram: if i == j { 1.0 } else { 2.0 },
                });
            }
        }
        // Block directions: translation samples, unit squared length.
        for k in 0..m {
            for mu in 0..n {
                let mut e = DMatrix::zeros(m, n);
                e[(k, mu)] = 1.0;
                dirs.push(BasisDir {
                    lie: JacobiLie::new(DMatrix::zeros(2 * n, 2 * n), e.clone(), zero_blk(), zero_kappa())
                        .expect("basis sample has consistent shapes"),
                    omega: DMatrix::zeros(n, n),
                    z: e.map(cx),
                    gram: 1.0,
                });
            }
        }
        for k in 0..m {
            for mu in 0..n {
                let mut e = DMatrix::zeros(m, n);
                e[(k, mu)] = 1.0;
                dirs.push(BasisDir {
                    lie: JacobiLie::new(DMatrix::zeros(2 * n, 2 * n), zero_blk(), e.clone(), zero_kappa())
                        .expect("basis sample has consistent shapes"),
                    omega: DMatrix::zeros(n, n),
                    z: e.map(|v| Complex64::new(0.0, v)),
                    gram: 1.0,
                });
            }
        }
        TangentBasis { n, m, dirs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// Lie-algebra sample of direction `a` (mostly for cross-checks).
    pub fn lie(&self, a: usize) -> &JacobiLie {
        &self.dirs[a].lie
    }

    /// Squared length of direction `a`.
    pub fn gram(&self, a: usize) -> f64 {
        self.dirs[a].gram
    }
}

// ---------------------------------------------------------------------------
// The operator attached to a polynomial.

/// Differential operator presented through its action: pair the dual
/// polynomial against the germ of `f` pulled back along a group path.
///
/// The struct stores no coefficient table; see [`fingerprint`] for reading
/// one off.  Values come out of [`PolyOperator::apply_expr`] and friends.
/// Construction refuses polynomials that fail the unitary-invariance check,
/// because the recipe only yields a well-defined operator on invariant
/// inputs.
pub struct PolyOperator {
    n: usize,
    m: usize,
    degree: usize,
    name: String,
    basis: TangentBasis,
    /// The input polynomial as a function of the path parameters, Gram
    /// factors divided out.  Pairing this against a germ's Taylor data is
    /// the whole operator.
    qhat: Jet,
    /// Path germs are relatively expensive (a truncated exponential of the
    /// embedded directions), and fingerprints hammer one point with many
    /// test functions, so cache by point bits.
    path_cache: Mutex<HashMap<Vec<u64>, Arc<Vec<Jet>>>>,
}

/// Operator attached to one invariant polynomial on the block-free space
/// (`m = 0`).
pub fn poly_to_op_h(poly: &InvariantPolynomial, n: usize) -> SjResult<PolyOperator> {
    PolyOperator::from_combination(&[(1.0, poly.clone())], n, 0)
}

/// Operator attached to one invariant polynomial on the full space.
pub fn poly_to_op_hc(poly: &InvariantPolynomial, n: usize, m: usize) -> SjResult<PolyOperator> {
    PolyOperator::from_combination(&[(1.0, poly.clone())], n, m)
}

impl std::fmt::Debug for PolyOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "PolyOperator({}, n = {}, m = {}, degree {})",
            self.name, self.n, self.m, self.degree
        )
    }
}

impl PolyOperator {
    /// Operator attached to a real linear combination of invariant
    /// polynomials.  Scalar multiples matter in practice: several printed
    /// displays correspond to polynomials like `(1/4) p_1`, not `p_1`.
    pub fn from_combination(
        terms: &[(f64, InvariantPolynomial)],
        n: usize,
        m: usize,
    ) -> SjResult<PolyOperator> {
        assert!(!terms.is_empty(), "an operator needs at least one polynomial");
        // Refuse non-invariant inputs before any further work.  The check
        // is sampled, so use a fixed seed: refusal must be deterministic.
        let mut rng = ChaCha8Rng::seed_from_u64(0x0bad_5eed);
        for (_, p) in terms {
            p.validate(n, m)?;
            let defect = check_u_invariance(p, n, m, 6, &mut rng);
            if defect > tol::POLY_INVARIANCE {
                return Err(SjError::NotInvariant(format!(
                    "{} has unitary-invariance defect {defect:.3e}",
                    p.name()
                )));
            }
        }
        let degree = terms.iter().map(|(_, p)| p.degree()).max().unwrap_or(0);
        let basis = TangentBasis::new(n, m);
        let tctx = JetContext::anonymous(basis.len(), degree);
        // omega(t), z(t): the tangent vector with coordinates t_a / gram_a
        // under the complex identification.
        let mut omega_t = JetMatrix::from_fn(n, n, |_, _| Jet::zero(&tctx));
        let mut z_t = JetMatrix::from_fn(m, n, |_, _| Jet::zero(&tctx));
        for (a, dir) in basis.dirs.iter().enumerate() {
            let ta = Jet::variable(&tctx, a).scale_re(1.0 / dir.gram);
            omega_t = omega_t.add(&JetMatrix::from_fn(n, n, |i, j| ta.scale(dir.omega[(i, j)])));
            z_t = z_t.add(&JetMatrix::from_fn(m, n, |i, j| ta.scale(dir.z[(i, j)])));
        }
        let mut qhat = Jet::zero(&tctx);
        let mut names = Vec::new();
        for (coeff, p) in terms {
            qhat = &qhat + &p.eval_jets(&omega_t, &z_t).scale_re(*coeff);
            if (*coeff - 1.0).abs() < 1e-15 {
                names.push(p.name());
            } else {
                names.push(format!("{coeff}*{}", p.name()));
            }
        }
        Ok(PolyOperator {
            n,
            m,
            degree,
            name: names.join(" + "),
            basis,
            qhat,
            path_cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Order of the operator = degree of the polynomial.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn basis(&self) -> &TangentBasis {
        &self.basis
    }

    fn check_frame(&self, frame: &CoordFrame) {
        assert_eq!(frame.model(), Model::Half, "polynomial operators act on the half model");
        assert_eq!((frame.n(), frame.m()), (self.n, self.m), "frame shape mismatch");
    }

    /// The canonical group element carrying the base point to `p`.
    fn canonical_group(&self, frame: &CoordFrame, p: &[f64]) -> JacobiElement {
        let (omega, z) = frame.matrices(p);
        point_to_group(&HPoint::new_unchecked(omega, z))
    }

    /// Coordinate germs of the path `t -> g exp(-sum t_a E_a) . base`.
    fn path_coords(&self, g: &JacobiElement, frame: &CoordFrame) -> Vec<Jet> {
        let tctx = self.qhat.ctx();
        let size = 2 * (self.n + self.m);
        let mut s = JetMatrix::from_fn(size, size, |_, _| Jet::zero(tctx));
        for (a, dir) in self.basis.dirs.iter().enumerate() {
            let e = embed_lie(&dir.lie);
            // Negated direction; see the module notes on sign conventions.
            let ta = Jet::variable(tctx, a).scale_re(-1.0);
            s = s.add(&JetMatrix::from_fn(size, size, |i, j| {
                if e[(i, j)] != 0.0 {
                    ta.scale_re(e[(i, j)])
                } else {
                    Jet::zero(tctx)
                }
            }));
        }
        // The exponential is exact here: the argument has no constant term.
        let path = JetMatrix::from_real(tctx, &embed_sp_mn(g)).mul(&s.exp_truncated());
        let (n, m) = (self.n, self.m);
        let (r0, r1, r2) = (0, n, n + m);
        let a = path.block(r0, r0, n, n);
        let b = path.block(r0, r2, n, n);
        let c = path.block(r2, r0, n, n);
        let d = path.block(r2, r2, n, n);
        let lam = path.block(r1, r0, m, n);
        let mu = path.block(r1, r2, m, n);
        // Evaluate the action at the base point (iI, 0).
        let den = c.scale(I_UNIT).add(&d).inverse();
        let om = a.scale(I_UNIT).add(&b).mul(&den);
        let z = lam.scale(I_UNIT).add(&mu).mul(&den);
        frame.coords_of_jets(&om, &z)
    }

    fn cached_path(&self, frame: &CoordFrame, p: &[f64]) -> Arc<Vec<Jet>> {
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        if let Some(hit) = self.path_cache.lock().unwrap().get(&key) {
            return hit.clone();
        }
        let g = self.canonical_group(frame, p);
        let coords = Arc::new(self.path_coords(&g, frame));
        self.path_cache.lock().unwrap().insert(key, coords.clone());
        coords
    }

    /// Pair the dual polynomial against a germ in the path parameters:
    /// `sum_alpha qhat_alpha * (d^alpha F)(0)`.
    fn pair(&self, fjet: &Jet) -> Complex64 {
        let tctx = self.qhat.ctx();
        let mut out = Complex64::new(0.0, 0.0);
        for (r, &q) in self.qhat.coeffs().iter().enumerate() {
            if q.norm() != 0.0 {
                out += q * fjet.extract(tctx.exponents(r));
            }
        }
        out
    }

    /// `(op f)(p)` with the canonical group element for `p`.
    pub fn apply_expr(&self, f: &Expr, frame: &CoordFrame, p: &[f64]) -> Complex64 {
        self.check_frame(frame);
        let coords = self.cached_path(frame, p);
        self.pair(&f.eval_jets(&coords))
    }

    /// Same value through an explicit group element; `g` must carry the
    /// base point to the point of interest.  Exposed separately so that
    /// independence from the choice of `g` is testable rather than assumed.
    pub fn apply_expr_via(&self, g: &JacobiElement, f: &Expr, frame: &CoordFrame) -> Complex64 {
        self.check_frame(frame);
        let coords = self.path_coords(g, frame);
        self.pair(&f.eval_jets(&coords))
    }

    /// Apply to a germ of `f` at `p` (a jet in the frame's chart centered
    /// there) instead of a global expression.  This is what the invariance
    /// probe needs: `f . g` is only available as a germ.
    pub fn apply_germ(&self, germ: &Jet, frame: &CoordFrame, p: &[f64]) -> Complex64 {
        self.check_frame(frame);
        let coords = self.cached_path(frame, p);
        // The germ's variables measure displacement from p, so center each
        // coordinate path at its own launch value.  (That value agrees with
        // p only to rounding; subtracting the exact jet value keeps the
        // substitution's zero-constant-term contract.)
        let subs: Vec<Jet> = coords
            .iter()
            .map(|cj| cj - &Jet::constant(cj.ctx(), cj.value()))
            .collect();
        self.pair(&germ.substitute(&subs))
    }

    /// Point the paths launch from, for a given chart point: should be the
    /// chart point itself.  Exposed for sanity tests.
    pub fn launch_point(&self, frame: &CoordFrame, p: &[f64]) -> Vec<f64> {
        self.check_frame(frame);
        let coords = self.cached_path(frame, p);
        coords.iter().map(|j| j.value().re).collect()
    }
}

/// `|op(f . g)(p) - (op f)(g p)|` for a polynomial-built operator: the same
/// probe [`crate::ops::invariance_defect_h`] runs on explicit operators.
pub fn poly_op_invariance_defect(
    op: &PolyOperator,
    g: &JacobiElement,
    f: &Expr,
    frame: &CoordFrame,
    p: &[f64],
) -> f64 {
    let ctx = frame.ctx(op.degree());
    let jets = frame.point_jets(&ctx, p);
    let (isym, iblk) = act_h_jets(g, &frame.sym_matrix(&jets), &frame.blk_matrix(&jets));
    let icoords = frame.coords_of_jets(&isym, &iblk);
    let fog = f.eval_jets(&icoords);
    let lhs = op.apply_germ(&fog, frame, p);
    let q: Vec<f64> = icoords.iter().map(|j| j.value().re).collect();
    let rhs = op.apply_expr(f, frame, &q);
    (lhs - rhs).norm()
}

// ---------------------------------------------------------------------------
// Fingerprints: coefficient tables read off by probing with monomials.

/// Coefficient table of an operator at a point.
///
/// Entry `alpha` holds the operator applied to the centered monomial
/// `(x - p)^alpha`, evaluated at `p`; for a differential operator with
/// coefficients `a_beta(p)` that value is `alpha! * a_alpha(p)`.  Two
/// operators agree near `p` up to the table degree iff their tables agree.
#[derive(Clone, Debug)]
pub struct OpFingerprint {
    base: Vec<f64>,
    maxdeg: usize,
    exps: Vec<Vec<u8>>,
    vals: Vec<Complex64>,
}

/// Read off the fingerprint of any operator-shaped closure.  Both
/// [`PolyOperator`] values and explicit operator ASTs fit the closure shape,
/// which is the point: tables are how the two kinds get compared.
pub fn fingerprint<F>(apply: F, frame: &CoordFrame, p: &[f64], maxdeg: usize) -> OpFingerprint
where
    F: Fn(&Expr, &[f64]) -> Complex64,
{
    let ctx = frame.ctx(maxdeg);
    let mut exps = Vec::with_capacity(ctx.monomial_count());
    let mut vals = Vec::with_capacity(ctx.monomial_count());
    for r in 0..ctx.monomial_count() {
        let e = ctx.exponents(r);
        exps.push(e.to_vec());
        vals.push(apply(&centered_monomial(p, e), p));
    }
    OpFingerprint { base: p.to_vec(), maxdeg, exps, vals }
}

fn centered_monomial(p: &[f64], exps: &[u8]) -> Expr {
    let mut factors = Vec::new();
    for (v, &e) in exps.iter().enumerate() {
        if e > 0 {
            factors
                .push(Expr::add(vec![Expr::coord(v), Expr::constant(-p[v])]).pow(e as u32));
        }
    }
    if factors.is_empty() {
        Expr::constant(1.0)
    } else {
        Expr::mul(factors)
    }
}

impl OpFingerprint {
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn maxdeg(&self) -> usize {
        self.maxdeg
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Entries in graded-lex order.
    pub fn entries(&self) -> impl Iterator<Item = (&[u8], Complex64)> {
        self.exps.iter().map(|e| e.as_slice()).zip(self.vals.iter().copied())
    }

    /// Table value at a multi-index (must be within the table degree).
    pub fn value_at(&self, exps: &[u8]) -> Complex64 {
        for (e, v) in self.entries() {
            if e == exps {
                return v;
            }
        }
        panic!("multi-index {exps:?} outside fingerprint of degree {}", self.maxdeg);
    }

    /// Largest entrywise difference against another table of the same shape.
    pub fn max_diff(&self, other: &OpFingerprint) -> f64 {
        assert_eq!(self.maxdeg, other.maxdeg, "fingerprints of different degrees");
        assert_eq!(self.base, other.base, "fingerprints at different points");
        self.vals
            .iter()
            .zip(other.vals.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `a * x + b * y`, entrywise.
    pub fn combine(a: f64, x: &OpFingerprint, b: f64, y: &OpFingerprint) -> OpFingerprint {
        assert_eq!(x.maxdeg, y.maxdeg, "fingerprints of different degrees");
        assert_eq!(x.base, y.base, "fingerprints at different points");
        OpFingerprint {
            base: x.base.clone(),
            maxdeg: x.maxdeg,
            exps: x.exps.clone(),
            vals: x
                .vals
                .iter()
                .zip(y.vals.iter())
                .map(|(u, v)| u * cx(a) + v * cx(b))
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Fitting one operator against another.

/// Result of a one-constant least-squares fit `op1 ~ c * op2`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct FitResult {
    /// The fitted (real) constant.
    pub constant: f64,
    /// Relative residual: `sqrt( sum |op1 f - c op2 f|^2 / sum |op1 f|^2 )`.
    pub residual: f64,
    pub samples: usize,
}

/// Probe pairs (test function, chart point) shared by fits and comparisons.
pub fn fit_probes(frame: &CoordFrame, samples: usize, seed: u64) -> Vec<(Expr, Vec<f64>)> {
    let lib = standard_library(frame);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let f = lib[rng.gen_range(0..lib.len())].expr.clone();
        let hp = random_h_point(&mut rng, frame.n(), frame.m(), 0.4);
        out.push((f, frame.coords_of(hp.omega(), hp.z())));
    }
    out
}

/// Least-squares real constant `c` minimizing `sum |op1 f - c op2 f|^2`
/// over the probes, with the relative residual of the fit.
///
/// The constant is constrained real on purpose: the identities this is used
/// for are real proportionalities, and letting `c` go complex could absorb
/// a genuine discrepancy into an unreported imaginary part.
pub fn fit_constant<A, B>(op1: A, op2: B, probes: &[(Expr, Vec<f64>)]) -> FitResult
where
    A: Fn(&Expr, &[f64]) -> Complex64,
    B: Fn(&Expr, &[f64]) -> Complex64,
{
    let vals: Vec<(Complex64, Complex64)> =
        probes.iter().map(|(f, p)| (op1(f, p), op2(f, p))).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ref2 = 0.0;
    for &(a, b) in &vals {
        num += (b.conj() * a).re;
        den += b.norm_sqr();
        ref2 += a.norm_sqr();
    }
    let c = if den > 0.0 { num / den } else { 0.0 };
    let mut res2 = 0.0;
    for &(a, b) in &vals {
        res2 += (a - b * cx(c)).norm_sqr();
    }
    let residual = if ref2 > 0.0 { (res2 / ref2).sqrt() } else { 0.0 };
    FitResult { constant: c, residual, samples: probes.len() }
}

// ---------------------------------------------------------------------------
// The open proportionality between trace generators.

/// Fit of the polynomial-side trace generator against the matching
/// recursion generator on the block-free space.
///
/// For `j = 1` the proportionality is a theorem (the recursion's first
/// generator is minus the invariant Laplacian, which the degree-one trace
/// polynomial reproduces).  For `j >= 2` it is an open question, so this
/// reports the fitted constant and residual instead of asserting anything:
/// a small residual is evidence, not proof, and a large one would be a
/// finding worth keeping visible.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ConjectureFit {
    pub n: usize,
    pub j: usize,
    pub c_j: f64,
    pub residual: f64,
    pub samples: usize,
    pub seed: u64,
}

pub fn conjecture_fit(n: usize, j: usize, samples: usize, seed: u64) -> SjResult<ConjectureFit> {
    if !(1..=3).contains(&n) {
        return Err(SjError::InvalidIndex {
            family: "conjecture".into(),
            detail: format!("n = {n} out of the supported range 1..=3"),
        });
    }
    if !(1..=n).contains(&j) {
        return Err(SjError::InvalidIndex {
            family: "conjecture".into(),
            detail: format!("j = {j} out of range 1..={n}"),
        });
    }
    let frame = CoordFrame::new(Model::Half, n, 0);
    let theta = poly_to_op_h(&InvariantPolynomial::Q { j }, n)?;
    let symbols = crate::ops::maass_generators(n);
    let hj = symbols.h[j - 1].clone();
    let probes = fit_probes(&frame, samples, seed);
    let fit = fit_constant(
        |f, p| theta.apply_expr(f, &frame, p),
        |f, p| crate::ops::apply_at(&hj, f, &frame, p),
        &probes,
    );
    Ok(ConjectureFit { n, j, c_j: fit.constant, residual: fit.residual, samples, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{random_jacobi, random_stabilizer};
    use crate::invariant::InvariantPolynomial as Ip;
    use crate::ops::{
        apply_at, d1_explicit, d2_explicit, d3_explicit, d4_explicit, delta_h, LinOp,
    };

    fn h_frame(n: usize, m: usize) -> CoordFrame {
        CoordFrame::new(Model::Half, n, m)
    }

    fn random_point(rng: &mut ChaCha8Rng, frame: &CoordFrame) -> Vec<f64> {
        let hp = random_h_point(rng, frame.n(), frame.m(), 0.4);
        frame.coords_of(hp.omega(), hp.z())
    }

    #[test]
    fn paths_launch_from_the_requested_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for &(n, m) in &[(1usize, 1usize), (2, 1), (2, 0)] {
            let frame = h_frame(n, m);
            let op = PolyOperator::from_combination(&[(1.0, Ip::P { j: 1 })], n, m).unwrap();
            for _ in 0..3 {
                let p = random_point(&mut rng, &frame);
                let q = op.launch_point(&frame, &p);
                let worst = p
                    .iter()
                    .zip(q.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(worst < 1e-10, "launch point off by {worst:.3e} at ({n},{m})");
            }
        }
    }

    #[test]
    fn scalar_displays_come_out_of_the_construction() {
        // At n = m = 1 the four generator displays correspond to the
        // polynomials (1/4) p_1, psi1_0, (1/2) f1_00, (1/2) f2_00.
        let frame = h_frame(1, 1);
        let cases: Vec<(PolyOperator, LinOp)> = vec![
            (
                PolyOperator::from_combination(&[(0.25, Ip::P { j: 1 })], 1, 1).unwrap(),
                d1_explicit(),
            ),
            (
                PolyOperator::from_combination(&[(1.0, Ip::Psi1 { k: 1 })], 1, 1).unwrap(),
                d2_explicit(),
            ),
            (
                PolyOperator::from_combination(&[(0.5, Ip::F1 { k: 1, p: 1 })], 1, 1).unwrap(),
                d3_explicit(),
            ),
            (
                PolyOperator::from_combination(&[(0.5, Ip::F2 { k: 1, p: 1 })], 1, 1).unwrap(),
                d4_explicit(),
            ),
        ];
        let lib = standard_library(&frame);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for (op, display) in &cases {
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let p = random_point(&mut rng, &frame);
                for f in &lib {
                    let got = op.apply_expr(&f.expr, &frame, &p);
                    let want = apply_at(display, &f.expr, &frame, &p);
                    worst = worst.max((got - want).norm());
                }
            }
            assert!(
                worst < tol::DISPLAY_MATCH,
                "{} misses its display by {worst:.3e}",
                op.name()
            );
        }
    }

    #[test]
    fn block_free_scalar_generator_is_four_times_the_laplacian() {
        // At n = 1, m = 0 the degree-one trace polynomial gives exactly
        // 4 y^2 (dxx + dyy): each tangent direction's orbit velocity is 2,
        // and the polynomial is quadratic, hence the factor 4 over the
        // Laplacian y^2 (dxx + dyy).
        let frame = h_frame(1, 0);
        let op = poly_to_op_h(&Ip::Q { j: 1 }, 1).unwrap();
        let lap = delta_h(1, 1.0).scaled(4.0);
        let lib = standard_library(&frame);
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let mut worst: f64 = 0.0;
        for _ in 0..4 {
            let p = random_point(&mut rng, &frame);
            for f in &lib {
                let got = op.apply_expr(&f.expr, &frame, &p);
                let want = apply_at(&lap, &f.expr, &frame, &p);
                worst = worst.max((got - want).norm());
            }
        }
        assert!(worst < tol::DISPLAY_MATCH, "defect {worst:.3e}");
    }

    #[test]
    fn constants_are_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let f = Expr::constant(2.5);
        for &(n, m) in &[(1usize, 1usize), (2, 0)] {
            let frame = h_frame(n, m);
            let poly = if m == 0 { Ip::Q { j: 1 } } else { Ip::P { j: 1 } };
            let op = PolyOperator::from_combination(&[(1.0, poly)], n, m).unwrap();
            let p = random_point(&mut rng, &frame);
            let v = op.apply_expr(&f, &frame, &p);
            assert!(v.norm() < 1e-12, "constant maps to {v:?} at ({n},{m})");
        }
    }

    #[test]
    fn non_invariant_polynomials_are_refused() {
        match poly_to_op_hc(&Ip::Control, 1, 1) {
            Err(SjError::NotInvariant(_)) => {}
            other => panic!("control polynomial produced {other:?}"),
        }
    }

    #[test]
    fn polynomial_operators_are_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let cases: Vec<(usize, usize, Vec<PolyOperator>)> = vec![
            (
                1,
                1,
                vec![
                    poly_to_op_hc(&Ip::P { j: 1 }, 1, 1).unwrap(),
                    poly_to_op_hc(&Ip::Psi1 { k: 1 }, 1, 1).unwrap(),
                    poly_to_op_hc(&Ip::F1 { k: 1, p: 1 }, 1, 1).unwrap(),
                ],
            ),
            (
                2,
                1,
                vec![
                    poly_to_op_hc(&Ip::P { j: 1 }, 2, 1).unwrap(),
                    poly_to_op_hc(&Ip::F1 { k: 1, p: 1 }, 2, 1).unwrap(),
                ],
            ),
            (2, 0, vec![poly_to_op_h(&Ip::Q { j: 2 }, 2).unwrap()]),
        ];
        for (n, m, ops) in &cases {
            let frame = h_frame(*n, *m);
            let lib = standard_library(&frame);
            for op in ops {
                let mut worst: f64 = 0.0;
                for _ in 0..2 {
                    let g = random_jacobi(&mut rng, *n, *m, 0.4);
                    let p = random_point(&mut rng, &frame);
                    let f = &lib[rng.gen_range(0..lib.len())].expr;
                    worst = worst.max(poly_op_invariance_defect(op, &g, f, &frame, &p));
                }
                assert!(
                    worst < tol::OPERATOR_INVARIANCE,
                    "{} at ({n},{m}) moves under the action by {worst:.3e}",
                    op.name()
                );
            }
        }
    }

    #[test]
    fn gauge_choice_does_not_matter() {
        // Same point, different group elements reaching it: the value must
        // not notice.  This is the well-definedness the invariance refusal
        // protects.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for &(n, m) in &[(1usize, 1usize), (2, 1)] {
            let frame = h_frame(n, m);
            let lib = standard_library(&frame);
            let op = poly_to_op_hc(&Ip::P { j: 1 }, n, m).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let p = random_point(&mut rng, &frame);
                let (omega, z) = frame.matrices(&p);
                let g = point_to_group(&HPoint::new_unchecked(omega, z));
                let s = random_stabilizer(&mut rng, n, m, 0.5);
                let g2 = g.mul(&s).unwrap();
                let f = &lib[rng.gen_range(0..lib.len())].expr;
                let a = op.apply_expr(f, &frame, &p);
                let b = op.apply_expr_via(&g2, f, &frame);
                worst = worst.max((a - b).norm());
            }
            assert!(
                worst < tol::GAUGE_INDEPENDENCE,
                "gauge dependence {worst:.3e} at ({n},{m})"
            );
        }
    }

    #[test]
    fn germ_and_expression_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for &(n, m) in &[(1usize, 1usize), (2, 1)] {
            let frame = h_frame(n, m);
            let lib = standard_library(&frame);
            let op = poly_to_op_hc(&Ip::F1 { k: 1, p: 1 }, n, m).unwrap();
            let ctx = frame.ctx(op.degree());
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let p = random_point(&mut rng, &frame);
                let f = &lib[rng.gen_range(0..lib.len())].expr;
                let germ = f.eval_jets(&frame.point_jets(&ctx, &p));
                let a = op.apply_germ(&germ, &frame, &p);
                let b = op.apply_expr(f, &frame, &p);
                worst = worst.max((a - b).norm());
            }
            assert!(worst < tol::GAUGE_INDEPENDENCE, "route mismatch {worst:.3e} at ({n},{m})");
        }
    }

    #[test]
    fn fingerprints_read_off_coefficient_tables() {
        let frame = h_frame(1, 1);
        let p = frame.base_point();
        // A bare derivative has a single unit entry.
        let dx = LinOp::Deriv(0);
        let fp = fingerprint(|f, q| apply_at(&dx, f, &frame, q), &frame, &p, 2);
        for (e, v) in fp.entries() {
            let want = if e == [1, 0, 0, 0] { cx(1.0) } else { cx(0.0) };
            assert!((v - want).norm() < 1e-12, "entry {e:?} = {v:?}");
        }
        // The first generator display at the base point (y = 1, v = 0):
        // only the second-order x- and y-entries survive, with weight
        // alpha! * coefficient = 2.
        let d1 = d1_explicit();
        let fp1 = fingerprint(|f, q| apply_at(&d1, f, &frame, q), &frame, &p, 2);
        for (e, v) in fp1.entries() {
            let want = match e {
                [2, 0, 0, 0] | [0, 2, 0, 0] => cx(2.0),
                _ => cx(0.0),
            };
            assert!((v - want).norm() < 1e-12, "entry {e:?} = {v:?}");
        }
    }

    #[test]
    fn fingerprints_are_linear_in_the_operator() {
        let frame = h_frame(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let p = random_point(&mut rng, &frame);
        let a = d1_explicit();
        let b = d2_explicit();
        let combo = LinOp::Add(vec![a.clone().scaled(1.7), b.clone().scaled(-0.4)]);
        let fa = fingerprint(|f, q| apply_at(&a, f, &frame, q), &frame, &p, 2);
        let fb = fingerprint(|f, q| apply_at(&b, f, &frame, q), &frame, &p, 2);
        let fc = fingerprint(|f, q| apply_at(&combo, f, &frame, q), &frame, &p, 2);
        let want = OpFingerprint::combine(1.7, &fa, -0.4, &fb);
        let diff = fc.max_diff(&want);
        assert!(diff < tol::FINGERPRINT_LINEARITY, "linearity defect {diff:.3e}");
    }

    #[test]
    fn polynomial_map_is_linear() {
        // Linearity through the whole construction, compared at the level
        // of coefficient tables.
        let frame = h_frame(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let p = random_point(&mut rng, &frame);
        let pa = Ip::P { j: 1 };
        let pb = Ip::Psi1 { k: 1 };
        let oa = poly_to_op_hc(&pa, 1, 1).unwrap();
        let ob = poly_to_op_hc(&pb, 1, 1).unwrap();
        let oc =
            PolyOperator::from_combination(&[(2.0, pa.clone()), (0.5, pb.clone())], 1, 1).unwrap();
        let fa = fingerprint(|f, q| oa.apply_expr(f, &frame, q), &frame, &p, 2);
        let fb = fingerprint(|f, q| ob.apply_expr(f, &frame, q), &frame, &p, 2);
        let fc = fingerprint(|f, q| oc.apply_expr(f, &frame, q), &frame, &p, 2);
        let want = OpFingerprint::combine(2.0, &fa, 0.5, &fb);
        let diff = fc.max_diff(&want);
        assert!(diff < tol::CORRESPONDENCE_LINEARITY, "linearity defect {diff:.3e}");
    }

    #[test]
    fn fit_recovers_exact_ratios() {
        let frame = h_frame(1, 0);
        let lap = delta_h(1, 1.0);
        let doubled = lap.clone().scaled(2.0);
        let probes = fit_probes(&frame, 20, 79);
        let fit = fit_constant(
            |f, p| apply_at(&doubled, f, &frame, p),
            |f, p| apply_at(&lap, f, &frame, p),
            &probes,
        );
        assert!((fit.constant - 2.0).abs() < 1e-10, "constant {}", fit.constant);
        assert!(fit.residual < tol::EXACT_FIT_RESIDUAL, "residual {:.3e}", fit.residual);
    }

    #[test]
    fn first_trace_generator_matches_the_recursion() {
        // Proportionality at j = 1 is a theorem; the constant is an
        // artifact of normalizations (orbit velocities contribute a factor
        // 4, and the recursion's first generator is minus the Laplacian).
        // At n = 1 the scalar display pins c = -4; at larger n the constant
        // is recorded by the fit rather than assumed.
        for n in [1usize, 2] {
            let fit = conjecture_fit(n, 1, 24, 83).unwrap();
            println!(
                "trace-generator fit n={n} j=1: c = {:.6}, residual = {:.3e}",
                fit.c_j, fit.residual
            );
            assert!(fit.residual < tol::FIT_RESIDUAL, "n = {n}: residual {:.3e}", fit.residual);
            if n == 1 {
                assert!(
                    (fit.c_j + 4.0).abs() < 1e-6,
                    "n = 1: constant {} should be -4",
                    fit.c_j
                );
            }
        }
    }

    #[test]
    fn second_trace_generator_fit_is_reported() {
        // Open question at j = 2: record the fitted constant and residual.
        // The assertions only pin down that the report is usable, not that
        // the proportionality holds — and numerically it does not: the
        // residual sits around 0.18, far above probe noise.  See the next
        // test for what the operator actually is.
        let fit = conjecture_fit(2, 2, 16, 89).unwrap();
        println!(
            "trace-generator fit n=2 j=2: c = {:.6}, residual = {:.3e} ({} samples)",
            fit.c_j, fit.residual, fit.samples
        );
        assert_eq!((fit.n, fit.j, fit.samples, fit.seed), (2, 2, 16, 89));
        assert!(fit.c_j.is_finite());
        assert!(fit.residual.is_finite() && fit.residual >= 0.0);
    }

    #[test]
    fn quartic_trace_operator_is_a_combination_of_recursion_generators() {
        // What a one-constant fit misses, a span fit finds: at n = 2 the
        // quartic trace polynomial maps to exactly
        //
        //     16 * H_2 + (56/3) * H_1,
        //
        // with no H_1^2 or constant component (coefficients located by
        // least squares over {H_2, H_1^2, H_1, Id} at residual ~3e-15,
        // then frozen here).  So the proportionality above fails only by a
        // lower-order term, and the leading constants follow (-4)^j.
        let n = 2usize;
        let frame = h_frame(n, 0);
        let theta = poly_to_op_h(&Ip::Q { j: 2 }, n).unwrap();
        let symbols = crate::ops::maass_generators(n);
        let combo = LinOp::Add(vec![
            symbols.h[1].clone().scaled(16.0),
            symbols.h[0].clone().scaled(56.0 / 3.0),
        ]);
        let probes = fit_probes(&frame, 20, 97);
        let fit = fit_constant(
            |f, p| theta.apply_expr(f, &frame, p),
            |f, p| apply_at(&combo, f, &frame, p),
            &probes,
        );
        assert!((fit.constant - 1.0).abs() < 1e-10, "constant {}", fit.constant);
        assert!(fit.residual < tol::EXACT_FIT_RESIDUAL, "residual {:.3e}", fit.residual);
    }
}

//! Dense truncated multivariate Taylor expansions ("jets") over the complex
//! numbers.
//!
//! A [`Jet`] holds every Taylor coefficient of a smooth function around a
//! base point up to a fixed total degree.  Monomials are stored in graded
//! lexicographic order.  The variables are always *real* coordinates, so
//! complex conjugation acts on the coefficients alone.
//!
//! The combinatorial tables (monomial ranks, the pair list driving the
//! product, derivative shifts) depend only on the variable count and the
//! truncation order, so they are built once and shared between contexts of
//! the same shape.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Shared combinatorial tables for one (variable count, order) shape.
struct Tables {
    nvars: usize,
    order: usize,
    /// Exponent vectors in graded-lex order, flattened with stride `nvars`.
    expts: Vec<u8>,
    /// Rank lookup for an exponent vector.
    rank_of: HashMap<Vec<u8>, u32>,
    /// `(left, right, product)` ranks for every monomial pair whose total
    /// degree still fits.  This list, not a dense table, is what keeps the
    /// product affordable at a dozen variables.
    triples: Vec<(u32, u32, u32)>,
    /// Product of exponent factorials per monomial, as `f64`.
    weight: Vec<f64>,
    /// `dshift[v * nmon + k]` is the rank of monomial `k` with one power of
    /// variable `v` removed, or `u32::MAX` when `v` does not divide it.
    dshift: Vec<u32>,
    nmon: usize,
}

fn enumerate_monomials(nvars: usize, order: usize) -> Vec<u8> {
    fn rec(nvars: usize, left: usize, buf: &mut Vec<u8>, out: &mut Vec<u8>) {
        if buf.len() == nvars - 1 {
            buf.push(left as u8);
            out.extend_from_slice(buf);
            buf.pop();
            return;
        }
        for e in (0..=left).rev() {
            buf.push(e as u8);
            rec(nvars, left - e, buf, out);
            buf.pop();
        }
    }
    let mut out = Vec::new();
    let mut buf = Vec::new();
    for d in 0..=order {
        rec(nvars, d, &mut buf, &mut out);
    }
    out
}

impl Tables {
    fn build(nvars: usize, order: usize) -> Tables {
        assert!(nvars >= 1, "a jet context needs at least one variable");
        assert!(order <= 12, "truncation order {order} is unreasonably large");
        let expts = enumerate_monomials(nvars, order);
        let nmon = expts.len() / nvars;
        let mut rank_of = HashMap::with_capacity(nmon);
        let mut weight = Vec::with_capacity(nmon);
        let mut degree = Vec::with_capacity(nmon);
        for k in 0..nmon {
            let e = &expts[k * nvars..(k + 1) * nvars];
            rank_of.insert(e.to_vec(), k as u32);
            let mut w = 1.0;
            for &x in e {
                for f in 2..=(x as u64) {
                    w *= f as f64;
                }
            }
            weight.push(w);
            degree.push(e.iter().map(|&x| x as usize).sum::<usize>());
        }
        let mut triples = Vec::new();
        let mut sum = vec![0u8; nvars];
        for i in 0..nmon {
            for j in 0..nmon {
                if degree[i] + degree[j] > order {
                    continue;
                }
                for v in 0..nvars {
                    sum[v] = expts[i * nvars + v] + expts[j * nvars + v];
                }
                let k = rank_of[&sum];
                triples.push((i as u32, j as u32, k));
            }
        }
        let mut dshift = vec![u32::MAX; nvars * nmon];
        let mut red = vec![0u8; nvars];
        for k in 0..nmon {
            for v in 0..nvars {
                if expts[k * nvars + v] == 0 {
                    continue;
                }
                red.copy_from_slice(&expts[k * nvars..(k + 1) * nvars]);
                red[v] -= 1;
                dshift[v * nmon + k] = rank_of[&red];
            }
        }
        Tables { nvars, order, expts, rank_of, triples, weight, dshift, nmon }
    }
}

static TABLE_CACHE: Lazy<Mutex<HashMap<(usize, usize), Arc<Tables>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn tables(nvars: usize, order: usize) -> Arc<Tables> {
    let mut cache = TABLE_CACHE.lock().unwrap();
    cache
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(Tables::build(nvars, order)))
        .clone()
}

/// Variable names plus truncation order.  Create once per coordinate system
/// and share via `Arc`; all jets built from the same context interoperate.
pub struct JetContext {
    names: Vec<String>,
    tables: Arc<Tables>,
}

impl JetContext {
    pub fn new<S: AsRef<str>>(names: &[S], order: usize) -> Arc<JetContext> {
        let names: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let tables = tables(names.len(), order);
        Arc::new(JetContext { names, tables })
    }

    /// Context with synthetic names `t0, t1, ...`.
    pub fn anonymous(nvars: usize, order: usize) -> Arc<JetContext> {
        let names: Vec<String> = (0..nvars).map(|i| format!("t{i}")).collect();
        JetContext::new(&names, order)
    }

    pub fn nvars(&self) -> usize {
        self.tables.nvars
    }

    pub fn order(&self) -> usize {
        self.tables.order
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn monomial_count(&self) -> usize {
        self.tables.nmon
    }

    /// Exponent vector of the monomial with the given rank.
    pub fn exponents(&self, rank: usize) -> &[u8] {
        let n = self.tables.nvars;
        &self.tables.expts[rank * n..(rank + 1) * n]
    }

    pub fn rank(&self, exponents: &[u8]) -> Option<usize> {
        self.tables.rank_of.get(exponents).map(|&r| r as usize)
    }
}

impl std::fmt::Debug for JetContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "JetContext({:?}, order {})", self.names, self.order())
    }
}

fn same_ctx(a: &Arc<JetContext>, b: &Arc<JetContext>) -> bool {
    Arc::ptr_eq(a, b) || (a.names == b.names && a.order() == b.order())
}

/// Truncated Taylor expansion around an implicit base point.
#[derive(Clone)]
pub struct Jet {
    ctx: Arc<JetContext>,
    c: Vec<Complex64>,
}

impl Jet {
    pub fn zero(ctx: &Arc<JetContext>) -> Jet {
        Jet { ctx: ctx.clone(), c: vec![Complex64::new(0.0, 0.0); ctx.monomial_count()] }
    }

    pub fn constant(ctx: &Arc<JetContext>, value: Complex64) -> Jet {
        let mut j = Jet::zero(ctx);
        j.c[0] = value;
        j
    }

    pub fn one(ctx: &Arc<JetContext>) -> Jet {
        Jet::constant(ctx, Complex64::new(1.0, 0.0))
    }

    /// The coordinate function `x_v` with value zero at the base point.
    pub fn variable(ctx: &Arc<JetContext>, v: usize) -> Jet {
        Jet::variable_about(ctx, v, Complex64::new(0.0, 0.0))
    }

    /// The coordinate function `x_v` with the given value at the base point.
    pub fn variable_about(ctx: &Arc<JetContext>, v: usize, base: Complex64) -> Jet {
        assert!(v < ctx.nvars());
        let mut j = Jet::constant(ctx, base);
        if ctx.order() >= 1 {
            // Rank of the degree-one monomial in variable v: they follow the
            // constant monomial in variable order.
            j.c[1 + v] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn ctx(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.c
    }

    /// Value at the base point.
    pub fn value(&self) -> Complex64 {
        self.c[0]
    }

    /// Raw Taylor coefficient of the given monomial.
    pub fn coeff(&self, exponents: &[u8]) -> Complex64 {
        let r = self
            .ctx
            .rank(exponents)
            .unwrap_or_else(|| panic!("monomial {exponents:?} outside context {:?}", self.ctx));
        self.c[r]
    }

    /// Partial derivative at the base point: the coefficient times the
    /// product of exponent factorials.
    pub fn extract(&self, exponents: &[u8]) -> Complex64 {
        let r = self
            .ctx
            .rank(exponents)
            .unwrap_or_else(|| panic!("monomial {exponents:?} outside context {:?}", self.ctx));
        self.c[r] * self.ctx.tables.weight[r]
    }

    pub fn conj(&self) -> Jet {
        Jet { ctx: self.ctx.clone(), c: self.c.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Jet {
        Jet { ctx: self.ctx.clone(), c: self.c.iter().map(|z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Jet {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Real part as a jet (the variables are real, so this is coefficientwise).
    pub fn re(&self) -> Jet {
        (self + &self.conj()).scale_re(0.5)
    }

    /// Imaginary part as a jet.
    pub fn im(&self) -> Jet {
        (self - &self.conj()).scale(Complex64::new(0.0, -0.5))
    }

    /// Formal partial derivative with respect to variable `v`.  The result
    /// lives in the same context; coefficients of top degree are lost, which
    /// is the expected truncation behaviour.
    pub fn deriv(&self, v: usize) -> Jet {
        let t = &self.ctx.tables;
        assert!(v < t.nvars);
        let mut out = Jet::zero(&self.ctx);
        let shifts = &t.dshift[v * t.nmon..(v + 1) * t.nmon];
        for k in 0..t.nmon {
            let s = shifts[k];
            if s != u32::MAX {
                let e = t.expts[k * t.nvars + v] as f64;
                out.c[s as usize] += self.c[k] * e;
            }
        }
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        assert!(same_ctx(&self.ctx, &other.ctx), "jet contexts differ");
        let mut out = Jet::zero(&self.ctx);
        for &(i, j, k) in &self.ctx.tables.triples {
            out.c[k as usize] += self.c[i as usize] * other.c[j as usize];
        }
        out
    }

    fn series(u: &Jet, coeffs: &[Complex64]) -> Jet {
        // Horner evaluation of sum coeffs[j] * u^j; u has no constant term.
        let mut acc = Jet::constant(u.ctx(), coeffs[coeffs.len() - 1]);
        for j in (0..coeffs.len() - 1).rev() {
            acc = acc.mul(u);
            acc.c[0] += coeffs[j];
        }
        acc
    }

    /// Multiplicative inverse.  Requires a nonzero value at the base point;
    /// the tail is the usual geometric series in the normalized remainder.
    pub fn inverse(&self) -> Jet {
        let c0 = self.c[0];
        assert!(c0.norm() > 0.0, "jet with vanishing value has no inverse");
        let mut u = self.scale(c0.inv());
        u.c[0] = Complex64::new(0.0, 0.0);
        let coeffs: Vec<Complex64> = (0..=self.ctx.order())
            .map(|j| if j % 2 == 0 { c0.inv() } else { -c0.inv() })
            .collect();
        Jet::series(&u, &coeffs)
    }

    /// Principal square root, via the binomial series around the base value.
    pub fn sqrt(&self) -> Jet {
        let c0 = self.c[0];
        assert!(c0.norm() > 0.0, "jet square root needs a nonzero base value");
        let mut u = self.scale(c0.inv());
        u.c[0] = Complex64::new(0.0, 0.0);
        let root = c0.sqrt();
        let mut coeffs = Vec::with_capacity(self.ctx.order() + 1);
        let mut b = Complex64::new(1.0, 0.0);
        for j in 0..=self.ctx.order() {
            coeffs.push(root * b);
            b *= Complex64::new((0.5 - j as f64) / (j as f64 + 1.0), 0.0);
        }
        Jet::series(&u, &coeffs)
    }

    /// Exponential; exact at this truncation order because the remainder
    /// beyond the base value is nilpotent.
    pub fn exp(&self) -> Jet {
        let c0 = self.c[0];
        let mut u = self.clone();
        u.c[0] = Complex64::new(0.0, 0.0);
        let e0 = c0.exp();
        let mut fact = 1.0;
        let mut coeffs = Vec::with_capacity(self.ctx.order() + 1);
        for j in 0..=self.ctx.order() {
            if j > 0 {
                fact *= j as f64;
            }
            coeffs.push(e0 / fact);
        }
        Jet::series(&u, &coeffs)
    }

    /// Raise to a small nonnegative integer power.
    pub fn powi(&self, k: u32) -> Jet {
        let mut out = Jet::one(&self.ctx);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Compose with a substitution: plug the jets `subs[v]` (all in one
    /// shared target context) in for the variables of `self`.
    ///
    /// Every substituted jet must vanish at its base point; then a monomial
    /// of degree d only feeds target degrees >= d, so the truncated result
    /// is exact and monomials of `self` beyond the target order drop out on
    /// their own.  Substituting jets with nonzero values would silently
    /// mis-truncate, hence the assertion.
    pub fn substitute(&self, subs: &[Jet]) -> Jet {
        assert_eq!(subs.len(), self.ctx.nvars(), "one substitution per variable");
        let tctx = subs[0].ctx();
        for s in subs {
            assert!(same_ctx(tctx, s.ctx()), "substitution jets span different contexts");
            assert!(
                s.value().norm() == 0.0,
                "substitution jets must be centered (zero base value)"
            );
        }
        // Powers of each substituted jet, filled on demand.
        let mut powers: Vec<Vec<Jet>> = subs.iter().map(|s| vec![Jet::one(tctx), s.clone()]).collect();
        let mut out = Jet::zero(tctx);
        let t = &self.ctx.tables;
        for k in 0..t.nmon {
            let c = self.c[k];
            if c.norm() == 0.0 {
                continue;
            }
            let expts = &t.expts[k * t.nvars..(k + 1) * t.nvars];
            let deg: usize = expts.iter().map(|&e| e as usize).sum();
            if deg > tctx.order() {
                continue;
            }
            let mut term = Jet::constant(tctx, c);
            for (v, &e) in expts.iter().enumerate() {
                while powers[v].len() <= e as usize {
                    let next = powers[v].last().unwrap().mul(&subs[v]);
                    powers[v].push(next);
                }
                if e > 0 {
                    term = term.mul(&powers[v][e as usize]);
                }
            }
            out = &out + &term;
        }
        out
    }

    /// Largest coefficient magnitude; handy for error reporting.
    pub fn max_abs(&self) -> f64 {
        self.c.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Jet[")?;
        let mut first = true;
        for (k, z) in self.c.iter().enumerate() {
            if z.norm() > 1e-14 {
                if !first {
                    write!(f, " + ")?;
                }
                write!(f, "({z:.4})*{:?}", self.ctx.exponents(k))?;
                first = false;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, "]")
    }
}

macro_rules! jet_binop {
    ($trait:ident, $fn:ident, $op:tt) => {
        impl std::ops::$trait<&Jet> for &Jet {
            type Output = Jet;
            fn $fn(self, rhs: &Jet) -> Jet {
                assert!(same_ctx(&self.ctx, &rhs.ctx), "jet contexts differ");
                let c = self
                    .c
                    .iter()
                    .zip(rhs.c.iter())
                    .map(|(a, b)| a $op b)
                    .collect();
                Jet { ctx: self.ctx.clone(), c }
            }
        }
        impl std::ops::$trait<Jet> for Jet {
            type Output = Jet;
            fn $fn(self, rhs: Jet) -> Jet {
                (&self).$fn(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, +);
jet_binop!(Sub, sub, -);

impl std::ops::Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}

impl std::ops::Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        Jet::mul(&self, &rhs)
    }
}

impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_re(-1.0)
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_re(-1.0)
    }
}

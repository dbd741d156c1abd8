//! Scalar test functions used to probe differential operators.
//!
//! Operators here act on functions of the real chart coordinates.  Rather
//! than accepting arbitrary closures (which we could not differentiate), we
//! fix a small expression language: constants, coordinates, sums, products,
//! integer powers, exponentials, and reciprocals of expressions that do not
//! vanish on the domain.  An expression evaluates over jets, so every
//! operator application reduces to jet arithmetic at a point.

use crate::frame::{CoordFrame, Model};
use crate::jet::{Jet, JetContext};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub enum Expr {
    Const(f64),
    /// Index into the chart coordinate list.
    Coord(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
    /// Reciprocal; the caller must pick expressions that stay away from zero
    /// on the points where the function will be evaluated.
    Recip(Box<Expr>),
}

impl Expr {
    pub fn coord(i: usize) -> Expr {
        Expr::Coord(i)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn add(terms: Vec<Expr>) -> Expr {
        Expr::Add(terms)
    }

    pub fn mul(factors: Vec<Expr>) -> Expr {
        Expr::Mul(factors)
    }

    pub fn pow(self, e: u32) -> Expr {
        Expr::Pow(Box::new(self), e)
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn recip(self) -> Expr {
        Expr::Recip(Box::new(self))
    }

    /// Evaluate over the chart jets (one jet per coordinate).
    pub fn eval_jets(&self, vars: &[Jet]) -> Jet {
        assert!(!vars.is_empty(), "need at least one coordinate jet");
        let ctx = vars[0].ctx().clone();
        self.eval_in(&ctx, vars)
    }

    fn eval_in(&self, ctx: &Arc<JetContext>, vars: &[Jet]) -> Jet {
        match self {
            Expr::Const(c) => Jet::constant(ctx, (*c).into()),
            Expr::Coord(i) => vars[*i].clone(),
            Expr::Add(terms) => {
                let mut acc = Jet::zero(ctx);
                for t in terms {
                    acc = &acc + &t.eval_in(ctx, vars);
                }
                acc
            }
            Expr::Mul(factors) => {
                let mut acc = Jet::one(ctx);
                for f in factors {
                    acc = &acc * &f.eval_in(ctx, vars);
                }
                acc
            }
            Expr::Pow(base, e) => base.eval_in(ctx, vars).powi(*e),
            Expr::Exp(inner) => inner.eval_in(ctx, vars).exp(),
            Expr::Recip(inner) => inner.eval_in(ctx, vars).inverse(),
        }
    }

    /// Plain numeric evaluation at a coordinate vector.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => x[*i],
            Expr::Add(terms) => terms.iter().map(|t| t.eval(x)).sum(),
            Expr::Mul(factors) => factors.iter().map(|f| f.eval(x)).product(),
            Expr::Pow(base, e) => base.eval(x).powi(*e as i32),
            Expr::Exp(inner) => inner.eval(x).exp(),
            Expr::Recip(inner) => {
                let v = inner.eval(x);
                assert!(v.abs() > 1e-12, "reciprocal argument too close to zero");
                1.0 / v
            }
        }
    }
}

/// A named test function tied to a chart.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub name: String,
    pub expr: Expr,
}

impl TestFunction {
    fn new(name: &str, expr: Expr) -> TestFunction {
        TestFunction { name: name.into(), expr }
    }
}

/// Determinant of the imaginary-part block as an expression (permutation
/// expansion; fine for the small sizes used here).
fn det_y_expr(frame: &CoordFrame) -> Expr {
    let n = frame.n();
    assert!(n <= 4, "permutation expansion only for small n");
    let entry = |i: usize, j: usize| Expr::coord(frame.sym_im(i, j));
    let mut terms = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    permute(&mut perm, 0, &mut |p, sign| {
        let mut factors = vec![Expr::constant(sign)];
        for (i, &j) in p.iter().enumerate() {
            factors.push(entry(i, j));
        }
        terms.push(Expr::mul(factors));
    });
    Expr::add(terms)
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize], f64)) {
    let n = p.len();
    if k == n {
        // Count inversions for the sign.
        let mut inv = 0;
        for i in 0..n {
            for j in i + 1..n {
                if p[i] > p[j] {
                    inv += 1;
                }
            }
        }
        visit(p, if inv % 2 == 0 { 1.0 } else { -1.0 });
        return;
    }
    for i in k..n {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// A library of test functions adapted to the chart: coordinate monomials
/// up to degree four, exponentials of linear forms, the natural traces and
/// determinants, block norms, and mixed products.  Always at least twelve
/// entries.
pub fn standard_library(frame: &CoordFrame) -> Vec<TestFunction> {
    let nc = frame.ncoords();
    let c = Expr::coord;
    let mut out = Vec::new();

    out.push(TestFunction::new("constant", Expr::constant(1.5)));
    out.push(TestFunction::new("linear", c(0)));
    out.push(TestFunction::new("quadratic", c(0).pow(2)));
    out.push(TestFunction::new(
        "mixed-quadratic",
        Expr::mul(vec![c(0), c(nc - 1)]),
    ));
    out.push(TestFunction::new("cubic", Expr::mul(vec![c(0).pow(2), c(nc - 1)])));
    out.push(TestFunction::new("quartic", c(0).pow(4)));
    out.push(TestFunction::new(
        "mixed-quartic",
        Expr::mul(vec![c(0).pow(2), c(nc - 1).pow(2)]),
    ));

    // Exponentials of two different linear forms with small coefficients.
    let lin1 = Expr::add((0..nc).map(|i| Expr::mul(vec![Expr::constant(0.3 / (1.0 + i as f64)), c(i)])).collect());
    let lin2 = Expr::add((0..nc).map(|i| Expr::mul(vec![Expr::constant(if i % 2 == 0 { 0.2 } else { -0.25 }), c(i)])).collect());
    out.push(TestFunction::new("exp-linear-1", lin1.exp()));
    out.push(TestFunction::new("exp-linear-2", lin2.exp()));

    // 1 / (2 + c0^2) never vanishes anywhere.
    out.push(TestFunction::new(
        "recip-shifted-square",
        Expr::add(vec![Expr::constant(2.0), c(0).pow(2)]).recip(),
    ));

    match frame.model() {
        Model::Half => {
            let n = frame.n();
            let tr_y = Expr::add((0..n).map(|i| c(frame.sym_im(i, i))).collect());
            out.push(TestFunction::new("trace-y", tr_y.clone()));
            // det(Y) > 0 on the half space, so its reciprocal is safe there.
            out.push(TestFunction::new("inv-det-y", det_y_expr(frame).recip()));
            if frame.m() > 0 {
                let mut sq = Vec::new();
                for k in 0..frame.m() {
                    for l in 0..n {
                        sq.push(c(frame.blk_re(k, l)).pow(2));
                        sq.push(c(frame.blk_im(k, l)).pow(2));
                    }
                }
                let znorm = Expr::add(sq);
                out.push(TestFunction::new("block-norm", znorm.clone()));
                out.push(TestFunction::new("trace-times-block", Expr::mul(vec![tr_y, znorm])));
            } else {
                out.push(TestFunction::new("trace-y-squared", tr_y.pow(2)));
            }
        }
        Model::Disk => {
            let n = frame.n();
            let tr_re_w = Expr::add((0..n).map(|i| c(frame.sym_re(i, i))).collect());
            out.push(TestFunction::new("trace-re-w", tr_re_w.clone()));
            // 1 + |coords|^2 never vanishes.
            let norm = Expr::add(
                std::iter::once(Expr::constant(1.0))
                    .chain((0..nc).map(|i| c(i).pow(2)))
                    .collect(),
            );
            out.push(TestFunction::new("recip-norm", norm.recip()));
            if frame.m() > 0 {
                let mut sq = Vec::new();
                for k in 0..frame.m() {
                    for l in 0..n {
                        sq.push(c(frame.blk_re(k, l)).pow(2));
                        sq.push(c(frame.blk_im(k, l)).pow(2));
                    }
                }
                out.push(TestFunction::new("block-norm", Expr::add(sq)));
            } else {
                out.push(TestFunction::new("trace-re-w-squared", tr_re_w.pow(2)));
            }
        }
    }

    assert!(out.len() >= 12);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{CoordFrame, Model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Jet derivatives must agree with central finite differences.
    #[test]
    fn jet_derivatives_match_finite_differences() {
        let frame = CoordFrame::new(Model::Half, 2, 1);
        let ctx = frame.ctx(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nc = frame.ncoords();
        for f in standard_library(&frame) {
            // A generic interior point: positive y-diagonal, small everything else.
            let mut p = vec![0.0; nc];
            for v in p.iter_mut() {
                *v = 0.2 * rng.gen::<f64>() - 0.1;
            }
            for i in 0..frame.n() {
                p[frame.sym_im(i, i)] = 1.0 + 0.3 * rng.gen::<f64>();
            }
            let jets = frame.point_jets(&ctx, &p);
            let jf = f.expr.eval_jets(&jets);
            let h = 1e-4;
            for i in 0..nc {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[i] += h;
                pm[i] -= h;
                let fd = (f.expr.eval(&pp) - f.expr.eval(&pm)) / (2.0 * h);
                let mut idx = vec![0u8; nc];
                idx[i] = 1;
                let jd = jf.extract(&idx).re;
                assert!(
                    (fd - jd).abs() <= 1e-6 * (1.0 + jd.abs()),
                    "{}: d/dc{} finite {fd} vs jet {jd}",
                    f.name,
                    i
                );
            }
            // One mixed second derivative as well.
            let (a, b) = (0, nc - 1);
            let mut sum = 0.0;
            for (sa, sb, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut q = p.clone();
                q[a] += sa * h;
                q[b] += sb * h;
                sum += w * f.expr.eval(&q);
            }
            let fd = sum / (4.0 * h * h);
            let mut idx = vec![0u8; nc];
            idx[a] += 1;
            idx[b] += 1;
            let jd = jf.extract(&idx).re;
            assert!(
                (fd - jd).abs() <= 1e-5 * (1.0 + jd.abs()),
                "{}: mixed second derivative finite {fd} vs jet {jd}",
                f.name
            );
        }
    }

    #[test]
    fn library_is_large_enough_for_all_charts() {
        for (model, n, m) in [
            (Model::Half, 1, 1),
            (Model::Half, 2, 0),
            (Model::Half, 2, 2),
            (Model::Disk, 1, 1),
            (Model::Disk, 2, 1),
        ] {
            let frame = CoordFrame::new(model, n, m);
            assert!(standard_library(&frame).len() >= 12);
        }
    }

    #[test]
    fn determinant_expression_matches_matrix_determinant() {
        let frame = CoordFrame::new(Model::Half, 3, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let e = det_y_expr(&frame);
        for _ in 0..10 {
            let p: Vec<f64> = (0..frame.ncoords()).map(|_| rng.gen::<f64>()).collect();
            let (omega, _) = frame.matrices(&p);
            let y = omega.map(|v| v.im);
            assert!((e.eval(&p) - y.determinant()).abs() < 1e-12);
        }
    }
}

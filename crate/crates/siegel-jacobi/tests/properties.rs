//! Property tests: group and transform laws over freely generated inputs.
//!
//! Strategies build elements through the Lie-algebra parameterization (free
//! block entries, exponentiated), so shrinking acts on genuinely free
//! coordinates instead of rejecting invalid matrices.  Points are built the
//! same way: a bounded symmetric perturbation keeps the imaginary part
//! positive definite by diagonal dominance.

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::collection::vec;
use proptest::prelude::*;
use siegel_jacobi::group::{
    act_d, act_h, cayley, cayley_inv, jacobi_exp, point_to_group, to_star, HPoint, JacobiElement,
    JacobiLie, StarJacobiElement,
};
use siegel_jacobi::tol;

/// Entry range for Lie coordinates; exp of these stays well-conditioned.
const ENTRY: std::ops::RangeInclusive<f64> = -0.4..=0.4;

fn amax_r(mat: &DMatrix<f64>) -> f64 {
    mat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn amax_c(mat: &DMatrix<Complex64>) -> f64 {
    mat.iter().fold(0.0f64, |acc, v| acc.max(v.norm()))
}

fn el_dist(a: &JacobiElement, b: &JacobiElement) -> f64 {
    amax_r(&(a.sp().matrix() - b.sp().matrix()))
        .max(amax_r(&(a.h().lambda() - b.h().lambda())))
        .max(amax_r(&(a.h().mu() - b.h().mu())))
        .max(amax_r(&(a.h().kappa() - b.h().kappa())))
}

fn star_dist(a: &StarJacobiElement, b: &StarJacobiElement) -> f64 {
    amax_c(&(a.p() - b.p()))
        .max(amax_c(&(a.q() - b.q())))
        .max(amax_c(&(a.xi() - b.xi())))
        .max(amax_r(&(a.kappa() - b.kappa())))
}

fn h_dist(a: &HPoint, b: &HPoint) -> f64 {
    amax_c(&(a.omega() - b.omega())).max(amax_c(&(a.z() - b.z())))
}

/// Symmetric n x n matrix from its upper-triangle entries (row-major).
fn sym_from_upper(n: usize, upper: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut it = upper.iter();
    for i in 0..n {
        for j in i..n {
            let v = *it.next().expect("upper-triangle length");
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn tri(n: usize) -> usize {
    n * (n + 1) / 2
}

prop_compose! {
    /// A group element from free Lie coordinates: the symplectic block is
    /// [[A, B], [C, -A^t]] with B, C symmetric, which satisfies the Lie
    /// relation by construction.
    fn element(n: usize, m: usize)(
        a in vec(ENTRY, n * n),
        b in vec(ENTRY, tri(n)),
        c in vec(ENTRY, tri(n)),
        p in vec(ENTRY, m * n),
        q in vec(ENTRY, m * n),
        k in vec(ENTRY, tri(m)),
    ) -> JacobiElement {
        let a = DMatrix::from_row_slice(n, n, &a);
        let b = sym_from_upper(n, &b);
        let c = sym_from_upper(n, &c);
        let mut x = DMatrix::zeros(2 * n, 2 * n);
        x.view_mut((0, 0), (n, n)).copy_from(&a);
        x.view_mut((0, n), (n, n)).copy_from(&b);
        x.view_mut((n, 0), (n, n)).copy_from(&c);
        x.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
        let lie = JacobiLie::new(
            x,
            DMatrix::from_row_slice(m, n, &p),
            DMatrix::from_row_slice(m, n, &q),
            sym_from_upper(m, &k),
        )
        .expect("valid Lie coordinates");
        jacobi_exp(&lie)
    }
}

prop_compose! {
    /// A half-space point: omega = X + i(I + Y) with bounded symmetric X, Y
    /// (diagonal dominance keeps I + Y positive definite), free block Z.
    fn point(n: usize, m: usize)(
        x in vec(ENTRY, tri(n)),
        y in vec(-0.3f64..=0.3, tri(n)),
        zr in vec(-0.5f64..=0.5, m * n),
        zi in vec(-0.5f64..=0.5, m * n),
    ) -> HPoint {
        let x = sym_from_upper(n, &x);
        let y = sym_from_upper(n, &y) + DMatrix::identity(n, n);
        let omega = DMatrix::from_fn(n, n, |i, j| Complex64::new(x[(i, j)], y[(i, j)]));
        let z = DMatrix::from_fn(m, n, |i, j| {
            Complex64::new(zr[i * n + j], zi[i * n + j])
        });
        HPoint::new(omega, z).expect("constructed point is in the domain")
    }
}

/// Sizes the properties sweep; one scalar and one genuinely matrix shape.
const SIZES: [(usize, usize); 3] = [(1, 1), (2, 1), (2, 2)];

macro_rules! for_sizes {
    ($runner:expr) => {
        for (n, m) in SIZES {
            $runner(n, m);
        }
    };
}

#[test]
fn products_associate() {
    for_sizes!(|n, m| {
        proptest!(|(g1 in element(n, m), g2 in element(n, m), g3 in element(n, m))| {
            let lhs = g1.mul(&g2).unwrap().mul(&g3).unwrap();
            let rhs = g1.mul(&g2.mul(&g3).unwrap()).unwrap();
            prop_assert!(el_dist(&lhs, &rhs) < tol::ACTION_AXIOM);
        });
    });
}

#[test]
fn inverses_cancel() {
    for_sizes!(|n, m| {
        let e = JacobiElement::identity(n, m);
        proptest!(|(g in element(n, m))| {
            let gi = g.inverse().unwrap();
            prop_assert!(el_dist(&g.mul(&gi).unwrap(), &e) < tol::ACTION_AXIOM);
            prop_assert!(el_dist(&gi.mul(&g).unwrap(), &e) < tol::ACTION_AXIOM);
        });
    });
}

#[test]
fn conjugation_is_a_homomorphism() {
    for_sizes!(|n, m| {
        proptest!(|(g1 in element(n, m), g2 in element(n, m))| {
            let lhs = to_star(&g1.mul(&g2).unwrap());
            let rhs = to_star(&g1).mul(&to_star(&g2)).unwrap();
            prop_assert!(star_dist(&lhs, &rhs) < tol::ACTION_AXIOM);
        });
    });
}

#[test]
fn conjugation_round_trips() {
    for_sizes!(|n, m| {
        proptest!(|(g in element(n, m))| {
            let back = to_star(&g).to_jacobi().unwrap();
            prop_assert!(el_dist(&back, &g) < tol::STAR_ROUNDTRIP);
        });
    });
}

#[test]
fn action_composes_on_points() {
    for_sizes!(|n, m| {
        proptest!(|(g1 in element(n, m), g2 in element(n, m), p in point(n, m))| {
            let lhs = act_h(&g1.mul(&g2).unwrap(), &p).unwrap();
            let rhs = act_h(&g1, &act_h(&g2, &p).unwrap()).unwrap();
            prop_assert!(h_dist(&lhs, &rhs) < tol::ACTION_AXIOM);
        });
    });
}

#[test]
fn canonical_element_reaches_its_point() {
    for_sizes!(|n, m| {
        let base = HPoint::base(n, m);
        proptest!(|(p in point(n, m))| {
            let g = point_to_group(&p);
            prop_assert!(h_dist(&act_h(&g, &base).unwrap(), &p) < tol::ACTION_AXIOM);
        });
    });
}

#[test]
fn cayley_round_trips_and_commutes_with_the_action() {
    for_sizes!(|n, m| {
        proptest!(|(g in element(n, m), p in point(n, m))| {
            let q = cayley_inv(&p).unwrap();
            prop_assert!(h_dist(&cayley(&q).unwrap(), &p) < tol::CAYLEY_ROUNDTRIP);
            let lhs = act_h(&g, &p).unwrap();
            let rhs = cayley(&act_d(&to_star(&g), &q).unwrap()).unwrap();
            prop_assert!(h_dist(&lhs, &rhs) < tol::CAYLEY_EQUIVARIANCE);
        });
    });
}

//! Acceptance gate: ten end-to-end criteria, one test each, at fixed sample
//! budgets and the library's reference tolerances.  Every criterion prints
//! as its own pass/fail line in the test output.
//!
//! Sizes follow the desk scale the library targets: n, m <= 2 everywhere,
//! n <= 3 where a criterion asks for it.

use siegel_jacobi::correspond::{conjecture_fit, poly_op_invariance_defect, poly_to_op_h};
use siegel_jacobi::frame::{CoordFrame, Model};
use siegel_jacobi::group::{random_h_point, random_jacobi};
use siegel_jacobi::harness::{run_suite, CheckReport, Suite};
use siegel_jacobi::invariant::{jacobian_rank, InvariantPolynomial, TPoint};
use siegel_jacobi::ops::{invariance_defect_h, maass_generators};
use siegel_jacobi::testfn::standard_library;
use siegel_jacobi::tol;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root seed for the whole gate.  Changing it must not change any verdict.
const SEED: u64 = 20_240_817;

/// Budgets: axiom checks run the largest sweeps, catalog and invariance
/// checks the standard one, rank spot-checks the smallest.
const AXIOM_SAMPLES: usize = 200;
const SWEEP_SAMPLES: usize = 100;
const RANK_SAMPLES: usize = 20;

/// Desk-scale shapes exercised by the size-generic suites.
const SHAPES: [(usize, usize); 4] = [(1, 1), (2, 1), (1, 2), (2, 2)];

fn demand_all_pass(reports: &[CheckReport], context: &str) {
    assert!(!reports.is_empty(), "{context}: no checks ran");
    for r in reports {
        assert!(
            r.pass,
            "{context}: {} failed with defect {:.3e} against {:.1e}",
            r.check, r.max_defect, r.tolerance
        );
    }
}

fn run(suite: Suite, n: usize, m: usize, samples: usize) -> Vec<CheckReport> {
    run_suite(suite, n, m, SEED, samples, None)
        .unwrap_or_else(|e| panic!("suite {} at ({n},{m}): {e}", suite.name()))
}

#[test]
fn a01_group_and_action_axioms() {
    for (n, m) in SHAPES {
        demand_all_pass(&run(Suite::Group, n, m, AXIOM_SAMPLES), "group axioms");
    }
}

#[test]
fn a02_cayley_round_trip_and_equivariance() {
    for (n, m) in SHAPES {
        demand_all_pass(&run(Suite::Cayley, n, m, AXIOM_SAMPLES), "cayley transfer");
    }
}

#[test]
fn a03_catalog_unitary_invariance_with_negative_control() {
    for (n, m) in SHAPES {
        let reports = run(Suite::Polys, n, m, SWEEP_SAMPLES);
        demand_all_pass(&reports, "polynomial catalog");
        // The control must be present and must have passed by *exceeding*
        // its floor - i.e. the non-invariant polynomial visibly fails.
        let control = reports
            .iter()
            .find(|r| r.check == "polys.broken-control")
            .expect("control check present");
        assert!(control.max_defect > control.tolerance);
    }
}

#[test]
fn a04_trace_polynomials_are_algebraically_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for n in 1..=3usize {
        let polys: Vec<InvariantPolynomial> =
            (1..=n).map(|j| InvariantPolynomial::Q { j }).collect();
        for _ in 0..RANK_SAMPLES {
            let p = TPoint::random(&mut rng, n, 0, 0.6);
            let rank = jacobian_rank(&polys, n, 0, &p);
            assert_eq!(rank, n, "rank dropped at n = {n}");
        }
    }
}

#[test]
fn a05_metric_invariance_under_random_elements() {
    for (n, m) in SHAPES {
        let reports: Vec<CheckReport> = run(Suite::Metrics, n, m, SWEEP_SAMPLES)
            .into_iter()
            .filter(|r| r.check.ends_with("-invariance"))
            .collect();
        assert_eq!(reports.len(), 3, "expected all three metric invariance checks");
        demand_all_pass(&reports, "metric invariance");
    }
}

#[test]
fn a06_laplacians_match_divergence_form_and_disk_table() {
    for (n, m) in SHAPES {
        let reports: Vec<CheckReport> = run(Suite::Metrics, n, m, SWEEP_SAMPLES)
            .into_iter()
            .filter(|r| r.check.ends_with("-laplacian") || r.check.ends_with("-display"))
            .collect();
        assert_eq!(reports.len(), 4, "expected three Laplacian checks plus the disk table");
        demand_all_pass(&reports, "laplacian identities");
    }
}

#[test]
fn a07_operator_invariance_sweep_with_broken_control() {
    for (n, m) in [(1, 1), (2, 1), (1, 2)] {
        let reports = run(Suite::Operators, n, m, SWEEP_SAMPLES);
        demand_all_pass(&reports, "operator sweep");
        let control = reports
            .iter()
            .find(|r| r.check == "operators.broken-operator-control")
            .expect("control check present");
        assert!(control.max_defect > tol::BROKEN_CONTROL_FLOOR);
    }
}

#[test]
fn a08_recursion_generators_match_laplacian_and_stay_invariant() {
    for n in 1..=2usize {
        demand_all_pass(&run(Suite::Maass, n, 0, SWEEP_SAMPLES), "recursion generators");
    }
}

#[test]
fn a09_correspondence_reproduces_the_display_operators() {
    let reports = run(Suite::Correspond, 1, 1, SWEEP_SAMPLES);
    demand_all_pass(&reports, "correspondence");
    for id in [
        "correspond.scalar-displays",
        "correspond.block-free-scalar-display",
        "correspond.commutator-display",
        "correspond.commutator-nonzero",
    ] {
        assert!(reports.iter().any(|r| r.check == id), "missing {id}");
    }
}

/// The quartic-generator proportionality is an open question, so its fit is
/// *emitted*, never asserted.  What the gate does demand: the probe is
/// deterministic, and both operators entering it independently pass the
/// invariance sweep.
#[test]
fn a10_quartic_probe_is_deterministic_and_both_sides_invariant() {
    let fit_a = conjecture_fit(2, 2, 40, SEED).expect("probe");
    let fit_b = conjecture_fit(2, 2, 40, SEED).expect("probe");
    assert_eq!(
        serde_json::to_string(&fit_a).unwrap(),
        serde_json::to_string(&fit_b).unwrap(),
        "probe emission must be deterministic"
    );
    println!(
        "quartic probe: c_2 = {:+.9}, one-constant residual = {:.3e} (reported, not asserted)",
        fit_a.c_j, fit_a.residual
    );

    let frame = CoordFrame::new(Model::Half, 2, 0);
    let lib = standard_library(&frame);
    let theta = poly_to_op_h(&InvariantPolynomial::Q { j: 2 }, 2).expect("build");
    let sym = maass_generators(2);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0xA10);
    let mut worst_theta = 0.0f64;
    let mut worst_h2 = 0.0f64;
    for _ in 0..SWEEP_SAMPLES {
        let g = random_jacobi(&mut rng, 2, 0, 0.4);
        let hp = random_h_point(&mut rng, 2, 0, 0.5);
        let p = frame.coords_of(hp.omega(), hp.z());
        let f = &lib[rng.gen_range(0..lib.len())].expr;
        worst_theta = worst_theta.max(poly_op_invariance_defect(&theta, &g, f, &frame, &p));
        worst_h2 = worst_h2.max(invariance_defect_h(&sym.h[1], &g, f, &frame, &p));
    }
    assert!(worst_theta <= tol::OPERATOR_INVARIANCE, "quartic operator defect {worst_theta:.3e}");
    assert!(worst_h2 <= tol::OPERATOR_INVARIANCE, "second generator defect {worst_h2:.3e}");
}

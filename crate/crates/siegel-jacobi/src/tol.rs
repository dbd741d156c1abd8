//! Central numerical tolerances.
//!
//! Every threshold used by constructors, checks, and the verification
//! harness lives here so the numbers are auditable in one place.  The
//! guiding rule: group elements are drawn at scale ~0.5 from the identity,
//! where double-precision defects land around 1e-13..1e-11; tolerances sit
//! 10x to 100x above the observed ceilings so they fail on real mistakes,
//! not on rounding.

/// Residual allowed in the defining relation of a symplectic matrix.
pub const SYMPLECTIC_RESIDUAL: f64 = 1e-10;

/// Symmetry defect allowed in the Heisenberg constraint (kappa + mu
/// transpose(lambda) must be symmetric).
pub const HEISENBERG_SYMMETRY: f64 = 1e-12;

/// Symmetry defect allowed when validating a symmetric matrix coordinate.
pub const POINT_SYMMETRY: f64 = 1e-12;

/// Residual allowed when a conjugated group element is mapped back to the
/// real form it came from.
pub const STAR_ROUNDTRIP: f64 = 1e-10;

/// Group axioms (associativity, identity) and action-composition defects.
pub const ACTION_AXIOM: f64 = 1e-9;

/// Round trip through the partial Cayley transform and back.
pub const CAYLEY_ROUNDTRIP: f64 = 1e-11;

/// Equivariance of the Cayley transform under paired group elements.
pub const CAYLEY_EQUIVARIANCE: f64 = 1e-9;

/// Relative invariance defect of the polynomial catalog under the unitary
/// action.  First-order formulas, hence tighter than the operator sweeps.
pub const POLY_INVARIANCE: f64 = 1e-10;

/// Pullback-versus-metric defect for the invariant metrics.
pub const METRIC_INVARIANCE: f64 = 1e-8;

/// Invariance defect of differential operators.  These stack four orders of
/// differentiation and a jet-valued matrix inverse, so the ceiling is looser.
pub const OPERATOR_INVARIANCE: f64 = 1e-7;

/// Agreement between the divergence-form Laplacian assembled from a metric
/// and the corresponding closed-form operator.
pub const LAPLACE_MATCH: f64 = 1e-7;

/// Agreement between the first Maass generator and the closed-form
/// Laplacian it must reproduce (a second-order identity, hence tight).
pub const MAASS_DELTA_MATCH: f64 = 1e-9;

/// Agreement between a constructed operator and a printed closed form.
pub const DISPLAY_MATCH: f64 = 1e-8;

/// Coefficientwise match of the low-dimensional disk metric against its
/// printed specialization.
pub const DISK_COEFF_MATCH: f64 = 1e-10;

/// Defect allowed when the same operator is produced through two different
/// group elements reaching the same point.
pub const GAUGE_INDEPENDENCE: f64 = 1e-9;

/// A deliberately broken operator must exceed this defect, or the harness
/// could not detect what it claims to detect.
pub const BROKEN_CONTROL_FLOOR: f64 = 1e-2;

/// Numerical-rank cutoff: singular values below this fraction of the
/// largest one count as zero.
pub const RANK_CUTOFF: f64 = 1e-8;

/// Linearity defect of an operator applied to a combined jet.
pub const OP_LINEARITY: f64 = 1e-11;

/// Fingerprint tables are linear in the operator by construction, so this
/// only absorbs rounding accumulated across table entries.
pub const FINGERPRINT_LINEARITY: f64 = 1e-12;

/// Linearity of the polynomial-to-operator map measured through the whole
/// evaluation path (group path, jet composition, duality pairing).
pub const CORRESPONDENCE_LINEARITY: f64 = 1e-10;

/// Relative least-squares residual when one operator is an exact scalar
/// multiple of another by construction.
pub const EXACT_FIT_RESIDUAL: f64 = 1e-12;

/// Relative least-squares residual for proportionality established by a
/// fitted constant (sampled functions and points on both sides).
pub const FIT_RESIDUAL: f64 = 1e-7;

/// Fit of an operator against an exact rational combination of others: the
/// constants come out to ~1e-12; two orders of slack absorb probe-set
/// variation across seeds.
pub const COMBINATION_FIT: f64 = 1e-10;

/// Entrywise defect allowed when rebuilding the first recursion step of the
/// Maass generators from its definition.
pub const MAASS_FIRST_STEP: f64 = 1e-11;

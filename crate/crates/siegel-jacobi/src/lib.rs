//! Geometry and invariant differential operators on the Siegel-Jacobi space.
//!
//! The library covers the action of the Jacobi group on the upper half space
//! and on its bounded disk model, the invariant metrics and their Laplacians,
//! the Maass generator recursion, the catalog of unitary-invariant
//! polynomials, and the correspondence turning such polynomials into
//! invariant differential operators.  Everything is verified numerically: a
//! harness pushes jets (truncated Taylor expansions) through each formula and
//! measures defects against machine-precision tolerances.

pub mod correspond;
pub mod error;
pub mod frame;
pub mod group;
pub mod harness;
pub mod invariant;
pub mod jet;
pub mod jetmat;
pub mod metric;
pub mod ops;
pub mod testfn;
pub mod tol;

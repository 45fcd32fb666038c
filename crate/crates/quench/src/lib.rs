//! Grid-based minimization of degenerate quenching energies.
//!
//! The crate discretizes the functional
//!
//! ```text
//! J(v) = ∫ |Dv|^p / p + kappa * mu * (v_+)^gamma
//! ```
//!
//! on uniform Cartesian grids in one and two dimensions, minimizes it under
//! Dirichlet boundary data, extracts the free boundary of the positivity set
//! of the minimizer, and measures the quantitative behavior of both: growth
//! and decay rates near the free boundary, Harnack-type ratios, density and
//! porosity of the contact region, and box-counting dimensions.
//!
//! Layout:
//! - [`params`], [`grid`], [`field`]: problem data and nodal scalar fields.
//! - [`ops`]: finite-difference gradient, p-Laplacian, ball reductions.
//! - [`energy`]: the discrete functional, its smoothed gradient, rescaling.
//! - [`boundary`]: Dirichlet data and transfinite interpolation.
//! - [`oracle`]: closed-form profiles and an exhaustive small-grid minimizer.
//! - [`io`]: binary and CSV serialization of fields.
//! - [`fit`]: least-squares exponent fitting on log-log samples.
//! - [`fb`]: positivity sets, free-boundary cells, distances, measures.
//! - [`verify`]: the measurement checkers and their machine-readable report.

// `!(x > 0.0)` is used throughout as a NaN-rejecting guard: it fails for
// zero, negatives, and NaN alike, which is exactly the wanted semantics for
// validating measured quantities. Rewriting via `partial_cmp` would obscure
// that.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod energy;
pub mod fb;
pub mod field;
pub mod fit;
pub mod grid;
pub mod io;
pub mod ops;
pub mod oracle;
pub mod params;
pub mod solver;
pub mod verify;

pub use boundary::{linear_interpolant, BoundaryData, BoundaryError};
pub use energy::{
    energy, rescale, smoothed_energy, smoothed_gradient, EnergyBreakdown, Region, Smoothing,
};
pub use fb::{
    amplitude_bootstrap, box_count, density_ratio, distance_to_fb, free_boundary,
    hausdorff_estimate, neighborhood_measure, porosity_witness, positivity_set,
    positivity_set_with, residual_margin, unit_ball_measure, FbError, FreeBoundary,
    HausdorffEstimate, PorosityWitness, PositivitySet,
};
pub use field::{FieldError, ScalarField};
pub use fit::{log_log_fit, FitError, LogLogFit};
pub use grid::{Ball, Grid, GridError};
pub use oracle::{brute_force_minimizer, OracleError, ProfileSpec};
pub use params::{ParamError, Params};
pub use solver::{
    el_residual, minimize, p_harmonic_replacement, ResidualStats, SolveResult, SolverError,
    SolverOptions, StageStats,
};
pub use verify::{
    compare_reports, run_all, CheckResult, Criterion, FlatnessConstants, Report, VerifyConfig,
};

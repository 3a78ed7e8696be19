//! Default tolerances, caps and grid sizes used across the crate and the CLI.
//!
//! Every knob an experiment depends on is named here so that runs are
//! self-describing; commands echo these values in `--help`.
//!
//! | constant | value | used by |
//! |---|---|---|
//! | [`TERM_CAP_2F1`] | 1e6 | ₂F₁ series summation |
//! | [`TOL_2F1`] | 1e-12 | ₂F₁ relative tolerance |
//! | [`SERIES_SWITCH_RADIUS`] | 0.15 | closed forms fall back to series near 0 |
//! | [`EQUALITY_TOL`] | 1e-8 | map equality checks |
//! | [`RESIDUAL_TOL`] | 1e-8 | boundary/ODE residual checks |
//! | [`MOMENT_GRID`] | 256 | quadrature nodes per direction |
//! | [`MOMENT_REL_TOL`] | 1e-5 | moment-vanishing acceptance threshold |
//! | [`STEP_CAP`] | 1e9 | total walk steps per lattice run |
//! | [`TOPPLE_CAP`] | 1e9 | sandpile topple operations |
//! | [`EPS_TOPPLE`] | 1e-6 | sandpile termination threshold |
//! | [`BOUNDARY_SAMPLES`] | 1024 | boundary polyline arc points |
//! | [`RASTER_GRID`] | 1024 | symmetric-difference rasterization |
//! | [`RASTER_STABLE_TOL`] | 1e-3 | rasterization refinement stop |

/// Maximum number of ₂F₁ series terms before giving up.
pub const TERM_CAP_2F1: usize = 1_000_000;

/// Relative tolerance for ₂F₁ series summation. On |z| = 1 the terms decay
/// like n⁻³, so tighter tolerances would exceed the term cap there.
pub const TOL_2F1: f64 = 1e-11;

/// Inside this radius, closed-form map kinds evaluate via their Taylor
/// series (the closed forms have removable singularities at the origin).
pub const SERIES_SWITCH_RADIUS: f64 = 0.15;

/// Default tolerance for equality checks between map representations.
pub const EQUALITY_TOL: f64 = 1e-8;

/// Default tolerance for boundary-equation and ODE residual checks.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Default tensor-quadrature nodes per direction for region moments.
pub const MOMENT_GRID: usize = 256;

/// Moment-vanishing threshold, relative to the same-exponent |z| moment.
pub const MOMENT_REL_TOL: f64 = 1e-5;

/// Default cap on total random-walk / rotor steps in one lattice run.
pub const STEP_CAP: u64 = 1_000_000_000;

/// Default cap on divisible-sandpile topple operations.
pub const TOPPLE_CAP: u64 = 1_000_000_000;

/// Default sandpile termination threshold: relax until every site's excess
/// mass is below this value.
pub const EPS_TOPPLE: f64 = 1e-6;

/// Default number of arc samples in a boundary polyline.
pub const BOUNDARY_SAMPLES: usize = 1024;

/// Default rasterization grid (per side) for symmetric-difference areas.
pub const RASTER_GRID: usize = 1024;

/// Stop refining the raster once the symmetric difference changes by less
/// than this between successive grids.
pub const RASTER_STABLE_TOL: f64 = 1e-3;

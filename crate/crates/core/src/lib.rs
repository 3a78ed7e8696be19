//! Numerical laboratory for Hele-Shaw free-boundary flows with killing and
//! reflecting boundary conditions, and for the discrete aggregation models
//! (internal DLA, rotor-router, divisible sandpile) conjectured to converge
//! to them.
//!
//! The library has five layers:
//!
//! * [`special`] — branch-aware complex logarithms, powers, arctangent, and
//!   the Gauss hypergeometric function ₂F₁ by direct series summation.
//! * [`maps`] — the explicit conformal maps from circular sectors onto the
//!   growing regions: a closed form for the half-axis killing problem, the
//!   hypergeometric family for killing on the sides of an angle, the doubled
//!   killing-reflecting map, and an independent power-series ODE solver.
//! * [`moments`] — harmonic moments of analytic regions by pullback
//!   Gauss–Legendre quadrature and of lattice clusters by cell summation,
//!   verifying the vanishing identities satisfied by the flow solutions.
//! * [`lattice`] — internal DLA, rotor-router and divisible-sandpile
//!   aggregation on Z² with killing / killing-reflecting /
//!   killing-passing-reflecting boundary rules.
//! * [`shape`] — rescaled-shape extraction and comparison metrics
//!   (symmetric-difference fraction, Hausdorff distance) between clusters
//!   and analytic regions.

pub mod defaults;
pub mod diagnostics;
pub mod error;
pub mod lattice;
pub mod maps;
pub mod moments;
pub mod shape;
pub mod special;

pub use error::{Error, Result};
pub use special::{BranchConvention, Complex, CutSide};

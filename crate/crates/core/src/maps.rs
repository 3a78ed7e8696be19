//! Conformal maps from circular sectors onto the growing flow regions.
//!
//! Every map here sends the sector `{|ζ| ≤ 1, |arg ζ| ≤ πb}` (the full disk
//! for b = 1, the disk cut along the positive half-axis for the doubled
//! killing-reflecting case) onto the region of the corresponding
//! free-boundary problem, normalized so that f(0) = 0 and f'(0) = 1. Each
//! map is available in up to three interchangeable representations that the
//! test suite cross-validates:
//!
//! * a closed form (the half-axis killing map and the half-plane map),
//! * the hypergeometric form `f(ζ) = ζ·F(−1/2, 2b, 2b + 3/2; −ζ^{1/b})`,
//! * a truncated power series `f(ζ) = Σ a_k ζ^{1+k/b}` obtained by solving
//!   the governing ODE `D²f + (1/2b)·((1−w)/(1+w))·Df = (1 + 1/2b)·f`,
//!   `w = ζ^{1/b}`, `D = ζ∂_ζ`, coefficient by coefficient.

use crate::defaults::{SERIES_SWITCH_RADIUS, TERM_CAP_2F1, TOL_2F1};
use crate::error::{Error, Result};
use crate::special::{
    arctan_c, branch_pow_from, gauss_2f1_best, BranchConvention, Complex, CutSide,
};
use std::f64::consts::PI;

/// How a [`ConformalMap`] is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    /// Closed form for killing on the negative half-axis (b = 1).
    NegAxisClosedForm,
    /// Hypergeometric form for killing on the sides of an angle.
    AngleHypergeometric,
    /// Closed form for the half-plane (b = 1/2).
    HalfPlaneClosedForm,
    /// Doubled killing-reflecting map (b = 2) on the cut disk.
    DoubledKillReflect,
    /// Truncated power series from the ODE recurrence.
    SeriesOnly,
}

/// The governing ODE data for angle parameter b: the eigenvalue is forced
/// by the normalization f(ζ) ∝ ζ + O(ζ^{1+1/b}) to be h = 1 + 1/(2b)
/// (h = 3/2 at b = 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeSpec {
    pub angle_param: f64,
    pub eigenvalue: f64,
}

impl OdeSpec {
    pub fn new(b: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::param("b", format!("angle parameter must be > 0, got {b}")));
        }
        Ok(OdeSpec { angle_param: b, eigenvalue: 1.0 + 0.5 / b })
    }

    /// Series coefficients a_0 = 1, a_1, …, a_{n−1} of f = Σ a_k ζ^{1+k/b}.
    ///
    /// Multiplying the ODE by (1 + w) and matching powers of w gives the
    /// two-term recurrence
    /// `a_k · (μ_k² + μ_k/2b − h) = −a_{k−1} · (μ_{k−1}² − μ_{k−1}/2b − h)`
    /// with μ_k = 1 + k/b. The k = 0 equation is 0 = 0, leaving a_0 free.
    pub fn coefficients(&self, n_terms: usize) -> Vec<f64> {
        let b = self.angle_param;
        let h = self.eigenvalue;
        let inv2b = 0.5 / b;
        let mut coeffs = Vec::with_capacity(n_terms);
        coeffs.push(1.0);
        for k in 1..n_terms {
            let mu_prev = 1.0 + (k as f64 - 1.0) / b;
            let mu = 1.0 + k as f64 / b;
            let denom = mu * mu + mu * inv2b - h;
            // denom = (μ−1)(μ + 1 + 1/2b) > 0 for every k ≥ 1, b > 0
            assert!(denom > 0.0, "singular recurrence at k = {k}, b = {b}");
            let numer = mu_prev * mu_prev - mu_prev * inv2b - h;
            let prev = coeffs[k - 1];
            coeffs.push(-prev * numer / denom);
        }
        coeffs
    }
}

/// An analytic map from a circular sector onto a flow region.
///
/// Immutable after construction; evaluation is pure and thread-safe.
#[derive(Clone, Debug)]
pub struct ConformalMap {
    kind: MapKind,
    /// Angle parameter: the sector is `|arg ζ| ≤ πb` for b ≤ 1; the doubled
    /// map lives on the cut disk with arguments in (0, 2π).
    b: f64,
    /// Series coefficients a_k (term k has exponent 1 + k/b), a_0 = 1.
    coeffs: Vec<f64>,
    /// Branch used for ζ^{1/b} in series/hypergeometric evaluation.
    branch: BranchConvention,
    scale: f64,
    /// Whether the region carries the killing slit on the b = 1 axis (true
    /// for the flow solutions, false for raw coefficient maps like the
    /// identity).
    slit: bool,
}

/// Number of stored coefficients for closed-form kinds; only used inside
/// [`SERIES_SWITCH_RADIUS`], where 64 terms are far below roundoff.
const NEAR_ZERO_TERMS: usize = 64;

/// Hypergeometric parameters (α, β, γ) for angle parameter b.
fn hyper_params(b: f64) -> (f64, f64, f64) {
    (-0.5, 2.0 * b, 2.0 * b + 1.5)
}

impl ConformalMap {
    /// Killing on the negative half-axis (b = 1):
    /// `f(ζ) = (15/32)(1+ζ)²(ζ⁻¹ − (1−ζ)ζ^{−3/2}·arctan ζ^{1/2}) − 5/8`
    /// with the standard branch of the square root.
    pub fn neg_axis() -> Self {
        ConformalMap {
            kind: MapKind::NegAxisClosedForm,
            b: 1.0,
            coeffs: OdeSpec::new(1.0).unwrap().coefficients(NEAR_ZERO_TERMS),
            branch: BranchConvention::standard(),
            scale: 1.0,
            slit: true,
        }
    }

    /// Killing on the sides of the angle `|arg z| ≤ πb`:
    /// `f(ζ) = ζ·F(−1/2, 2b, 2b + 3/2; −ζ^{1/b})`.
    pub fn angle(b: f64) -> Result<Self> {
        let ode = OdeSpec::new(b)?;
        Ok(ConformalMap {
            kind: MapKind::AngleHypergeometric,
            b,
            coeffs: ode.coefficients(NEAR_ZERO_TERMS),
            branch: BranchConvention::standard(),
            scale: 1.0,
            slit: true,
        })
    }

    /// The half-plane case (b = 1/2):
    /// `f(ζ) = (3/8)((ζ − ζ⁻¹) + (ζ + ζ⁻¹)²·arctan ζ)`.
    pub fn half_plane() -> Self {
        ConformalMap {
            kind: MapKind::HalfPlaneClosedForm,
            b: 0.5,
            coeffs: OdeSpec::new(0.5).unwrap().coefficients(NEAR_ZERO_TERMS),
            branch: BranchConvention::standard(),
            scale: 1.0,
            slit: true,
        }
    }

    /// The killing-reflecting case doubled across the positive half-axis
    /// (b = 2): `f(ζ) = ζ·F(−1/2, 4, 11/2; −ζ^{1/2})` on the disk cut along
    /// the positive half-axis, `ζ^{1/2} = r^{1/2}e^{iθ/2}` with θ ∈ [0, 2π).
    pub fn doubled_kill_reflect() -> Self {
        ConformalMap {
            kind: MapKind::DoubledKillReflect,
            b: 2.0,
            coeffs: OdeSpec::new(2.0).unwrap().coefficients(NEAR_ZERO_TERMS),
            branch: BranchConvention::positive_axis(),
            scale: 1.0,
            slit: true,
        }
    }

    /// Solve the governing ODE by the power-series method and return the
    /// truncated-series map with `n_terms` coefficients.
    pub fn from_ode_series(b: f64, n_terms: usize) -> Result<Self> {
        if n_terms < 2 {
            return Err(Error::param("n_terms", "need at least 2 series terms"));
        }
        let ode = OdeSpec::new(b)?;
        Ok(ConformalMap {
            kind: MapKind::SeriesOnly,
            b,
            coeffs: ode.coefficients(n_terms),
            branch: if b > 1.0 {
                BranchConvention::positive_axis()
            } else {
                BranchConvention::standard()
            },
            scale: 1.0,
            slit: true,
        })
    }

    /// Series map with explicit coefficients (test instrumentation:
    /// identity maps, deliberate perturbations).
    pub fn from_coefficients(b: f64, coeffs: Vec<f64>) -> Result<Self> {
        OdeSpec::new(b)?;
        if coeffs.is_empty() || !(coeffs[0] > 0.0) {
            return Err(Error::param("coeffs", "need a_0 > 0"));
        }
        Ok(ConformalMap {
            kind: MapKind::SeriesOnly,
            b,
            coeffs,
            branch: BranchConvention::standard(),
            scale: 1.0,
            slit: false,
        })
    }

    /// The identity map f(ζ) = ζ on the full disk.
    pub fn identity() -> Self {
        Self::from_coefficients(1.0, vec![1.0]).unwrap()
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn angle_param(&self) -> f64 {
        self.b
    }

    pub fn branch(&self) -> BranchConvention {
        self.branch
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same map dilated by `factor` (the region scales homothetically).
    pub fn with_scale(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Recompute series coefficients at arbitrary length (the stored vector
    /// is truncated for closed-form kinds).
    pub fn coefficients_to(&self, n_terms: usize) -> Vec<f64> {
        if self.kind == MapKind::SeriesOnly {
            let mut c = self.coeffs.clone();
            c.truncate(n_terms);
            c
        } else {
            OdeSpec::new(self.b).unwrap().coefficients(n_terms)
        }
    }

    /// Region area from the coefficient formula
    /// `A = scale² · πb · Σ (1 + k/b) a_k²`, valid for the sector maps
    /// (angular extent 2πb). Returns `None` for the doubled map, whose cut
    /// disk has extent 2π ≠ 2πb so the cross terms do not cancel.
    pub fn area_from_coefficients(&self, n_terms: usize) -> Option<f64> {
        if self.kind == MapKind::DoubledKillReflect {
            return None;
        }
        let b = self.b;
        let sum: f64 = self
            .coefficients_to(n_terms)
            .iter()
            .enumerate()
            .map(|(k, a)| (1.0 + k as f64 / b) * a * a)
            .sum();
        Some(self.scale * self.scale * PI * b * sum)
    }

    fn check_domain(&self, z: Complex) -> Result<()> {
        let r = z.norm();
        if r > 1.0 + 1e-9 {
            return Err(Error::domain("eval", format!("|ζ| = {r} > 1")));
        }
        if self.b < 1.0 && z != Complex::ZERO {
            let theta = z.im.atan2(z.re);
            if theta.abs() > PI * self.b + 1e-9 {
                return Err(Error::domain(
                    "eval",
                    format!("arg ζ = {theta} outside sector |arg| ≤ {}", PI * self.b),
                ));
            }
        }
        Ok(())
    }

    /// Evaluate the map; points on a branch cut take the upper-side limit.
    pub fn eval(&self, z: Complex) -> Result<Complex> {
        self.eval_from(z, CutSide::Upper)
    }

    /// Evaluate with explicit one-sided resolution on the branch cut (only
    /// the doubled map has a genuine discontinuity, across the slit).
    pub fn eval_from(&self, z: Complex, side: CutSide) -> Result<Complex> {
        self.check_domain(z)?;
        match self.kind {
            MapKind::NegAxisClosedForm => {
                if z.norm() < SERIES_SWITCH_RADIUS {
                    self.series_eval(z, side)
                } else {
                    neg_axis_closed(z).map(|v| v * self.scale)
                }
            }
            MapKind::HalfPlaneClosedForm => {
                if z.norm() < SERIES_SWITCH_RADIUS {
                    self.series_eval(z, side)
                } else {
                    half_plane_closed(z).map(|v| v * self.scale)
                }
            }
            MapKind::AngleHypergeometric | MapKind::DoubledKillReflect => {
                self.hyper_eval(z, side)
            }
            MapKind::SeriesOnly => self.series_eval(z, side),
        }
    }

    /// Complex derivative f'(ζ).
    pub fn eval_deriv(&self, z: Complex) -> Result<Complex> {
        self.eval_deriv_from(z, CutSide::Upper)
    }

    pub fn eval_deriv_from(&self, z: Complex, side: CutSide) -> Result<Complex> {
        self.check_domain(z)?;
        match self.kind {
            MapKind::NegAxisClosedForm => {
                if z.norm() < SERIES_SWITCH_RADIUS {
                    self.series_deriv(z, side)
                } else {
                    neg_axis_closed_d1(z).map(|v| v * self.scale)
                }
            }
            MapKind::HalfPlaneClosedForm => {
                if z.norm() < SERIES_SWITCH_RADIUS {
                    self.series_deriv(z, side)
                } else {
                    half_plane_closed_d1(z).map(|v| v * self.scale)
                }
            }
            MapKind::AngleHypergeometric | MapKind::DoubledKillReflect => {
                self.hyper_deriv(z, side)
            }
            MapKind::SeriesOnly => self.series_deriv(z, side),
        }
    }

    /// Second derivative f''(ζ), for the ODE residual.
    pub fn eval_deriv2(&self, z: Complex) -> Result<Complex> {
        self.eval_deriv2_from(z, CutSide::Upper)
    }

    pub fn eval_deriv2_from(&self, z: Complex, side: CutSide) -> Result<Complex> {
        self.check_domain(z)?;
        match self.kind {
            MapKind::NegAxisClosedForm => {
                if z.norm() < SERIES_SWITCH_RADIUS {
                    self.series_deriv2(z, side)
                } else {
                    neg_axis_closed_d2(z).map(|v| v * self.scale)
                }
            }
            MapKind::HalfPlaneClosedForm => {
                if z.norm() < SERIES_SWITCH_RADIUS {
                    self.series_deriv2(z, side)
                } else {
                    half_plane_closed_d2(z).map(|v| v * self.scale)
                }
            }
            MapKind::AngleHypergeometric | MapKind::DoubledKillReflect => {
                self.hyper_deriv2(z, side)
            }
            MapKind::SeriesOnly => self.series_deriv2(z, side),
        }
    }

    /// Evaluate f and f' together (one pass over the series terms; the hot
    /// path of the moment quadrature).
    pub fn eval_with_deriv(&self, z: Complex, side: CutSide) -> Result<(Complex, Complex)> {
        match self.kind {
            MapKind::AngleHypergeometric | MapKind::DoubledKillReflect => {
                self.check_domain(z)?;
                let (f0, f1, _) = self.hyper_f012(z, side, false, TOL_2F1, TERM_CAP_2F1)?;
                Ok((f0, f1))
            }
            _ => Ok((self.eval_from(z, side)?, self.eval_deriv_from(z, side)?)),
        }
    }

    /// Quadrature-tuned variant: capped term count so the handful of nodes
    /// hugging |ζ| = 1 (whose quadrature weight is tiny) cannot stall the
    /// summation; relative error there stays below ~1e-5.
    pub(crate) fn eval_with_deriv_quadrature(
        &self,
        z: Complex,
        side: CutSide,
    ) -> Result<(Complex, Complex)> {
        match self.kind {
            MapKind::AngleHypergeometric | MapKind::DoubledKillReflect => {
                self.check_domain(z)?;
                let (f0, f1, _) = self.hyper_f012(z, side, false, 1e-11, 150_000)?;
                Ok((f0, f1))
            }
            _ => Ok((self.eval_from(z, side)?, self.eval_deriv_from(z, side)?)),
        }
    }

    fn sector_power(&self, z: Complex, side: CutSide) -> Result<Complex> {
        branch_pow_from(z, 1.0 / self.b, self.branch, side)
    }

    fn series_eval(&self, z: Complex, side: CutSide) -> Result<Complex> {
        if z == Complex::ZERO {
            return Ok(Complex::ZERO);
        }
        let w = self.sector_power(z, side)?;
        let mut s = Complex::ZERO;
        for &a in self.coeffs.iter().rev() {
            s = s * w + a;
        }
        Ok(self.scale * z * s)
    }

    fn series_deriv(&self, z: Complex, side: CutSide) -> Result<Complex> {
        // f' = Σ a_k (1 + k/b) w^k, since d/dζ [ζ w^k] = (1 + k/b) w^k
        if z == Complex::ZERO {
            return Ok(Complex::new(self.scale * self.coeffs[0], 0.0));
        }
        let w = self.sector_power(z, side)?;
        let mut s = Complex::ZERO;
        for (k, &a) in self.coeffs.iter().enumerate().rev() {
            s = s * w + a * (1.0 + k as f64 / self.b);
        }
        Ok(self.scale * s)
    }

    fn series_deriv2(&self, z: Complex, side: CutSide) -> Result<Complex> {
        // f'' = (1/ζ) Σ a_k (1 + k/b)(k/b) w^k
        if z == Complex::ZERO {
            if self.b < 1.0 {
                return Ok(Complex::ZERO);
            }
            if self.b == 1.0 {
                let a1 = self.coeffs.get(1).copied().unwrap_or(0.0);
                return Ok(Complex::new(self.scale * 2.0 * a1, 0.0));
            }
            return Err(Error::domain("eval_deriv2", "f'' singular at 0 for b > 1"));
        }
        let w = self.sector_power(z, side)?;
        let mut s = Complex::ZERO;
        for (k, &a) in self.coeffs.iter().enumerate().rev() {
            let kb = k as f64 / self.b;
            s = s * w + a * (1.0 + kb) * kb;
        }
        Ok(self.scale * s / z)
    }

    /// f, f', and optionally f'' through the hypergeometric representation.
    ///
    /// Best-effort summation: the derivative's contiguous series has
    /// c − a − b = 1 and cannot reach full precision exactly on |ζ| = 1;
    /// interior points converge geometrically.
    fn hyper_f012(
        &self,
        z: Complex,
        side: CutSide,
        want_d2: bool,
        rel_tol: f64,
        cap: usize,
    ) -> Result<(Complex, Complex, Complex)> {
        let (al, be, ga) = hyper_params(self.b);
        if z == Complex::ZERO {
            let d2 = match self.b {
                b if b < 1.0 => Complex::ZERO,
                b if b == 1.0 => Complex::new(2.0 * self.coeffs[1], 0.0),
                _ => {
                    if want_d2 {
                        return Err(Error::domain("eval_deriv2", "f'' singular at 0 for b > 1"));
                    }
                    Complex::ZERO
                }
            };
            return Ok((Complex::ZERO, Complex::ONE * self.scale, d2 * self.scale));
        }
        let w = self.sector_power(z, side)?;
        let arg = -w;
        let f = gauss_2f1_best(al, be, ga, arg, rel_tol, cap)?.value;
        let fp = gauss_2f1_best(al + 1.0, be + 1.0, ga + 1.0, arg, rel_tol, cap)?.value
            * (al * be / ga);
        let value = self.scale * z * f;
        let deriv = self.scale * (f - w / self.b * fp);
        let deriv2 = if want_d2 {
            let fpp = gauss_2f1_best(al + 2.0, be + 2.0, ga + 2.0, arg, rel_tol, cap)?.value
                * (al * (al + 1.0) * be * (be + 1.0) / (ga * (ga + 1.0)));
            self.scale * w / (self.b * self.b * z) * (-(self.b + 1.0) * fp + w * fpp)
        } else {
            Complex::ZERO
        };
        Ok((value, deriv, deriv2))
    }

    fn hyper_eval(&self, z: Complex, side: CutSide) -> Result<Complex> {
        Ok(self.hyper_f012(z, side, false, TOL_2F1, TERM_CAP_2F1)?.0)
    }

    fn hyper_deriv(&self, z: Complex, side: CutSide) -> Result<Complex> {
        Ok(self.hyper_f012(z, side, false, TOL_2F1, TERM_CAP_2F1)?.1)
    }

    fn hyper_deriv2(&self, z: Complex, side: CutSide) -> Result<Complex> {
        Ok(self.hyper_f012(z, side, true, TOL_2F1, TERM_CAP_2F1)?.2)
    }

    /// True when the stored coefficients follow the expected sign pattern:
    /// a_0 > 0, and for k ≥ 1 the signs alternate starting positive
    /// (a_1 > 0, a_2 < 0, …), as the hypergeometric form forces for this
    /// family.
    pub fn coefficient_signs_alternate(&self) -> bool {
        if !(self.coeffs[0] > 0.0) {
            return false;
        }
        self.coeffs.iter().enumerate().skip(1).all(|(k, &a)| {
            let expected = if k % 2 == 1 { 1.0 } else { -1.0 };
            a == 0.0 || (a.signum() == expected)
        })
    }
}

// ---------------------------------------------------------------------------
// Closed forms and their first two derivatives.
// ---------------------------------------------------------------------------

/// Eq. for killing on the negative half-axis, standard square-root branch.
fn neg_axis_closed(z: Complex) -> Result<Complex> {
    if z == Complex::new(-1.0, 0.0) {
        // (1+ζ)² vanishes faster than the arctan log-singularity diverges
        return Ok(Complex::new(-0.625, 0.0));
    }
    let conv = BranchConvention::standard();
    let sqrt_z = branch_pow_from(z, 0.5, conv, CutSide::Upper)?;
    let a = arctan_c(sqrt_z, conv)?;
    let one = Complex::ONE;
    let g = 1.0 / z - (one - z) / (z * sqrt_z) * a;
    let f = 15.0 / 32.0 * (one + z) * (one + z) * g - 0.625;
    Ok(f)
}

fn neg_axis_closed_d1(z: Complex) -> Result<Complex> {
    if z == Complex::new(-1.0, 0.0) {
        return Ok(Complex::ZERO); // (1+ζ)·log(1+ζ) → 0
    }
    let conv = BranchConvention::standard();
    let sqrt_z = branch_pow_from(z, 0.5, conv, CutSide::Upper)?;
    let a = arctan_c(sqrt_z, conv)?;
    let one = Complex::ONE;
    let z2 = z * z;
    let zm32 = 1.0 / (z * sqrt_z);
    let g = 1.0 / z - (one - z) * zm32 * a;
    let gp = -1.0 / z2 + (zm32 + 1.5 * (one - z) * zm32 / z) * a
        - (one - z) / (2.0 * z2 * (one + z));
    Ok(15.0 / 32.0 * ((one + z) * 2.0 * g + (one + z) * (one + z) * gp))
}

fn neg_axis_closed_d2(z: Complex) -> Result<Complex> {
    let conv = BranchConvention::standard();
    let sqrt_z = branch_pow_from(z, 0.5, conv, CutSide::Upper)?;
    let a = arctan_c(sqrt_z, conv)?;
    let one = Complex::ONE;
    let z2 = z * z;
    let z3 = z2 * z;
    let zm32 = 1.0 / (z * sqrt_z);
    let zm52 = zm32 / z;
    let zm72 = zm52 / z;
    let opz = one + z;
    let omz = one - z;
    let g = 1.0 / z - omz * zm32 * a;
    let gp = -1.0 / z2 + (zm32 + 1.5 * omz * zm52) * a - omz / (2.0 * z2 * opz);
    let gpp = 2.0 / z3 + (-3.0 * zm52 - 3.75 * omz * zm72) * a + 1.0 / (z2 * opz)
        + 1.75 * omz / (z3 * opz)
        + 0.5 * omz / (z2 * opz * opz);
    Ok(15.0 / 32.0 * (2.0 * g + 4.0 * opz * gp + opz * opz * gpp))
}

/// Half-plane closed form (b = 1/2).
fn half_plane_closed(z: Complex) -> Result<Complex> {
    if z == Complex::I || z == -Complex::I {
        // removable 0·∞ at the sector corners: f(±i) = ±3i/4
        return Ok(Complex::new(0.0, 0.75 * z.im.signum()));
    }
    let a = arctan_c(z, BranchConvention::standard())?;
    let zi = 1.0 / z;
    let s = z + zi;
    Ok(3.0 / 8.0 * ((z - zi) + s * s * a))
}

fn half_plane_closed_d1(z: Complex) -> Result<Complex> {
    if z == Complex::I || z == -Complex::I {
        return Ok(Complex::ZERO);
    }
    let a = arctan_c(z, BranchConvention::standard())?;
    let zi = 1.0 / z;
    let zi3 = zi * zi * zi;
    Ok(0.75 * (Complex::ONE + zi * zi + (z - zi3) * a))
}

fn half_plane_closed_d2(z: Complex) -> Result<Complex> {
    let a = arctan_c(z, BranchConvention::standard())?;
    let zi = 1.0 / z;
    let zi3 = zi * zi * zi;
    let zi4 = zi3 * zi;
    Ok(0.75 * (zi - 3.0 * zi3 + (Complex::ONE + 3.0 * zi4) * a))
}

// ---------------------------------------------------------------------------
// Boundary polylines.
// ---------------------------------------------------------------------------

/// One sampled point of a region boundary. `theta` is the arc parameter of
/// the preimage on the unit circle; straight-side points reuse the theta of
/// the corner they attach to.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPoint {
    pub theta: f64,
    pub z: Complex,
}

/// Sample the region boundary as an ordered closed polyline: the image of
/// the sector arc plus the straight sides through the origin.
///
/// For b = 1 the "sides" collapse to the killing slit on the negative
/// half-axis (traversed in and back at the cusp); including it keeps the
/// polyline comparable with lattice-cluster contours, which also carry the
/// slit. The arc for b = 1 starts at θ = 0 and runs counterclockwise.
pub fn boundary_sample(map: &ConformalMap, n: usize) -> Result<Vec<BoundaryPoint>> {
    if n < 3 {
        return Err(Error::param("n", "need at least 3 arc samples"));
    }
    // Hypergeometric evaluation on |ζ| = 1 converges algebraically; a looser
    // tolerance keeps boundary extraction fast without visible error.
    let arc_eval = |theta: f64, side: CutSide| -> Result<Complex> {
        let z = Complex::from_polar(1.0, theta);
        match map.kind {
            MapKind::AngleHypergeometric | MapKind::DoubledKillReflect => {
                let (al, be, ga) = hyper_params(map.b);
                let w = branch_pow_from(z, 1.0 / map.b, map.branch, side)?;
                let f = gauss_2f1_best(al, be, ga, -w, 1e-10, TERM_CAP_2F1)?.value;
                Ok(map.scale * z * f)
            }
            _ => map.eval_from(z, side),
        }
    };
    let n_side = (n / 16).max(2);
    let mut pts: Vec<BoundaryPoint> = Vec::with_capacity(n + 2 * n_side + 2);

    let push_segment =
        |pts: &mut Vec<BoundaryPoint>, from: Complex, to: Complex, theta: f64, count: usize| {
            for i in 1..=count {
                let t = i as f64 / count as f64;
                pts.push(BoundaryPoint { theta, z: from + (to - from) * t });
            }
        };

    match map.kind {
        MapKind::DoubledKillReflect => {
            // Arc over (0, 2π) with one-sided limits at the slit edges.
            let upper = arc_eval(0.0, CutSide::Upper)?;
            pts.push(BoundaryPoint { theta: 0.0, z: upper });
            for j in 1..n - 1 {
                let theta = 2.0 * PI * j as f64 / (n - 1) as f64;
                pts.push(BoundaryPoint { theta, z: arc_eval(theta, CutSide::Upper)? });
            }
            let lower = arc_eval(0.0, CutSide::Lower)?;
            pts.push(BoundaryPoint { theta: 2.0 * PI, z: lower });
            // Slit edges: lower image → 0, then 0 → upper image (exclusive).
            push_segment(&mut pts, lower, Complex::ZERO, 2.0 * PI, n_side);
            for i in 1..n_side {
                let t = i as f64 / n_side as f64;
                pts.push(BoundaryPoint { theta: 0.0, z: upper * t });
            }
        }
        _ if map.b == 1.0 && !map.slit => {
            // Raw full-disk map (e.g. the identity): plain circle image.
            for j in 0..n {
                let theta = 2.0 * PI * j as f64 / n as f64;
                pts.push(BoundaryPoint { theta, z: arc_eval(theta, CutSide::Upper)? });
            }
        }
        _ if map.b == 1.0 => {
            // Full circle starting at θ = 0, slit inserted at the cusp θ = π.
            let cusp = map.eval(Complex::new(-1.0, 0.0))?;
            let split = n / 2; // last index with θ_j ≤ π
            for j in 0..n {
                let theta = 2.0 * PI * j as f64 / n as f64;
                if j == split + 1 {
                    // in along the slit and back out
                    push_segment(&mut pts, cusp, Complex::ZERO, PI, n_side);
                    push_segment(&mut pts, Complex::ZERO, cusp, PI, n_side);
                }
                let z = if 2 * j == n {
                    cusp
                } else {
                    arc_eval(theta, CutSide::Upper)?
                };
                pts.push(BoundaryPoint { theta, z });
            }
            if split + 1 == n {
                push_segment(&mut pts, cusp, Complex::ZERO, PI, n_side);
                push_segment(&mut pts, Complex::ZERO, cusp, PI, n_side);
            }
        }
        _ => {
            // Sector arc from −πb to πb, then sides through the origin.
            let half = PI * map.b;
            for j in 0..n {
                let theta = -half + 2.0 * half * j as f64 / (n - 1) as f64;
                pts.push(BoundaryPoint { theta, z: arc_eval(theta, CutSide::Upper)? });
            }
            let top = pts[n - 1].z;
            let bottom = pts[0].z;
            push_segment(&mut pts, top, Complex::ZERO, half, n_side);
            for i in 1..n_side {
                let t = i as f64 / n_side as f64;
                pts.push(BoundaryPoint { theta: -half, z: bottom * t });
            }
        }
    }
    Ok(pts)
}

/// Write a boundary polyline as CSV rows `theta,x,y` (12+ significant
/// digits, header included).
pub fn write_boundary_csv<W: std::io::Write>(
    points: &[BoundaryPoint],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "theta,x,y")?;
    for p in points {
        writeln!(out, "{:.14e},{:.14e},{:.14e}", p.theta, p.z.re, p.z.im)?;
    }
    Ok(())
}

/// Deterministic pseudo-random interior sector points for cross-validation,
/// |ζ| ≤ r_max, strictly inside the sector of angle parameter `b`.
pub fn sample_sector_points(b: f64, r_max: f64, count: usize, seed: u64) -> Vec<Complex> {
    use rand_core::RngCore;
    let mut rng = <rand_chacha::ChaCha8Rng as rand_core::SeedableRng>::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (0..count)
        .map(|_| {
            let r = (0.05 + 0.95 * unit()) * r_max;
            let theta = (2.0 * unit() - 1.0) * PI * b.min(1.0) * 0.999;
            Complex::from_polar(r, theta)
        })
        .collect()
}

//! Branch-aware complex elementary functions and the Gauss hypergeometric
//! function ₂F₁ by direct series summation.
//!
//! Two branch conventions cover every use in this crate: the standard branch
//! (cut along the negative real axis, arguments in (−π, π]) and the
//! positive-axis branch (cut along the positive real axis, arguments in
//! [0, 2π), so that the logarithm is real on the upper edge of the cut).
//! Points landing exactly on a cut resolve to the one-sided limit from
//! above by default, overridable per call.

use crate::defaults::{TERM_CAP_2F1, TOL_2F1};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Complex coordinate used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Which one-sided limit applies when a point lies exactly on a branch cut.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutSide {
    /// Limit from y > 0 (the default).
    Upper,
    /// Limit from y < 0.
    Lower,
}

/// A branch of arg / log / pow, determined by the excluded ray.
///
/// `standard()` puts the cut on the negative real axis with arguments in
/// (−π, π]; `positive_axis()` puts it on the positive real axis with
/// arguments in [0, 2π). In both cases a point exactly on the cut takes the
/// upper-side limit unless a [`CutSide`] says otherwise.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BranchConvention {
    /// Angle of the excluded ray, in [0, 2π). Only 0 and π are exercised.
    cut_angle: f64,
}

impl BranchConvention {
    /// Standard branch: cut on the negative real axis, arguments in (−π, π].
    pub const fn standard() -> Self {
        BranchConvention { cut_angle: PI }
    }

    /// Cut on the positive real axis, arguments in [0, 2π); the logarithm is
    /// real on the upper edge of the positive half-axis.
    pub const fn positive_axis() -> Self {
        BranchConvention { cut_angle: 0.0 }
    }

    pub fn cut_angle(&self) -> f64 {
        self.cut_angle
    }

    /// True when this is the positive-axis ([0, 2π)) convention.
    pub fn is_positive_axis(&self) -> bool {
        self.cut_angle == 0.0
    }

    /// Argument of `z` in this branch's window, on-cut points resolved from
    /// above.
    pub fn arg(&self, z: Complex) -> f64 {
        self.arg_from(z, CutSide::Upper)
    }

    /// Argument of `z`, with points exactly on the cut resolved to the
    /// one-sided limit from `side`.
    pub fn arg_from(&self, z: Complex, side: CutSide) -> f64 {
        // atan2 yields (−π, π] and distinguishes the sides of both axes
        // through signed zero.
        let theta = z.im.atan2(z.re);
        if self.is_positive_axis() {
            // Window [0, 2π). On the cut: θ = ±0 → 0 from above, 2π from
            // below (the value 2π stands for the limit θ → 2π⁻).
            if z.im == 0.0 && z.re > 0.0 {
                return match side {
                    CutSide::Upper => 0.0,
                    CutSide::Lower => 2.0 * PI,
                };
            }
            if theta < 0.0 {
                theta + 2.0 * PI
            } else {
                theta
            }
        } else {
            // Window (−π, π]. On the cut: θ = ±π → +π from above, −π below.
            if z.im == 0.0 && z.re < 0.0 {
                return match side {
                    CutSide::Upper => PI,
                    CutSide::Lower => -PI,
                };
            }
            theta
        }
    }
}

impl Default for BranchConvention {
    fn default() -> Self {
        BranchConvention::standard()
    }
}

fn ensure_finite(op: &'static str, z: Complex) -> Result<Complex> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite { op })
    }
}

/// Branch-aware complex logarithm: `ln|z| + i·arg(z)` with the argument in
/// the convention's window. Errors at `z = 0`.
pub fn branch_log(z: Complex, conv: BranchConvention) -> Result<Complex> {
    branch_log_from(z, conv, CutSide::Upper)
}

/// [`branch_log`] with explicit on-cut side resolution.
pub fn branch_log_from(z: Complex, conv: BranchConvention, side: CutSide) -> Result<Complex> {
    if z == Complex::ZERO {
        return Err(Error::domain("branch_log", "log(0) is undefined"));
    }
    let v = Complex::new(z.norm().ln(), conv.arg_from(z, side));
    ensure_finite("branch_log", v)
}

/// Branch-aware real power: `z^s = exp(s · branch_log(z))`.
///
/// `0^s` is 0 for s > 0 and 1 for s = 0; a domain error for s < 0.
pub fn branch_pow(z: Complex, s: f64, conv: BranchConvention) -> Result<Complex> {
    branch_pow_from(z, s, conv, CutSide::Upper)
}

/// [`branch_pow`] with explicit on-cut side resolution.
pub fn branch_pow_from(
    z: Complex,
    s: f64,
    conv: BranchConvention,
    side: CutSide,
) -> Result<Complex> {
    if z == Complex::ZERO {
        if s > 0.0 {
            return Ok(Complex::ZERO);
        }
        if s == 0.0 {
            return Ok(Complex::ONE);
        }
        return Err(Error::domain("branch_pow", "0^s with s < 0"));
    }
    let v = (branch_log_from(z, conv, side)? * s).exp();
    ensure_finite("branch_pow", v)
}

/// Complex arctangent, `(1/2i)·log((1+iw)/(1−iw))`, real on the real axis.
///
/// The branch of the internal logarithm is `conv`; with the standard
/// convention this is the principal arctangent. Logarithmic singularities at
/// `w = ±i` are domain errors.
pub fn arctan_c(w: Complex, conv: BranchConvention) -> Result<Complex> {
    let i = Complex::I;
    let num = Complex::ONE + i * w;
    let den = Complex::ONE - i * w;
    if num == Complex::ZERO || den == Complex::ZERO {
        return Err(Error::domain("arctan_c", "logarithmic singularity at w = ±i"));
    }
    let v = branch_log(num / den, conv)? / (2.0 * i);
    ensure_finite("arctan_c", v)
}

/// Result of a ₂F₁ series summation.
#[derive(Clone, Copy, Debug)]
pub struct Sum2F1 {
    pub value: Complex,
    /// Bound on the absolute truncation error, from the term-ratio test.
    pub error_bound: f64,
    /// Number of series terms actually summed.
    pub terms: usize,
}

/// Gauss hypergeometric function `F(a, b; c; z)` by direct series summation,
/// default tolerance and term cap.
///
/// Valid for |z| ≤ 1 with the series absolutely convergent there, which for
/// this crate's uses means c − a − b > 0. No transformation formulas are
/// applied; near |z| = 1 the terms decay only algebraically, so the achieved
/// error bound is reported alongside the value (see [`gauss_2f1_full`]).
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: Complex) -> Result<Complex> {
    gauss_2f1_full(a, b, c, z, TOL_2F1, TERM_CAP_2F1).map(|s| s.value)
}

/// [`gauss_2f1`] with explicit relative tolerance and term cap, reporting
/// the achieved error bound and term count. Errors if the tolerance is not
/// reached within the cap.
pub fn gauss_2f1_full(
    a: f64,
    b: f64,
    c: f64,
    z: Complex,
    rel_tol: f64,
    term_cap: usize,
) -> Result<Sum2F1> {
    let s = gauss_2f1_best(a, b, c, z, rel_tol, term_cap)?;
    if s.error_bound > rel_tol * s.value.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NoConvergence {
            what: "gauss_2f1 series",
            achieved: s.error_bound,
            wanted: rel_tol * s.value.norm().max(1.0),
        });
    }
    Ok(s)
}

/// Best-effort series summation: stops at the tolerance or the term cap,
/// whichever first, and reports the achieved tail bound instead of failing.
/// Contiguous-parameter derivative series (c − a − b = 1) plateau near
/// |z| = 1; callers weigh the reported bound.
pub fn gauss_2f1_best(
    a: f64,
    b: f64,
    c: f64,
    z: Complex,
    rel_tol: f64,
    term_cap: usize,
) -> Result<Sum2F1> {
    if c <= 0.0 && c == c.floor() {
        return Err(Error::param("c", format!("nonpositive integer {c} forbidden")));
    }
    let r = z.norm();
    if r > 1.0 + 1e-12 {
        return Err(Error::domain("gauss_2f1", format!("|z| = {r} > 1")));
    }
    if r >= 1.0 - 1e-12 && c - a - b <= 0.0 {
        return Err(Error::domain(
            "gauss_2f1",
            format!("series diverges on |z| = 1 for c - a - b = {}", c - a - b),
        ));
    }

    let mut sum = Complex::ONE;
    let mut term = Complex::ONE;
    let mut bound = f64::INFINITY;
    let mut terms = 0;
    for n in 0..term_cap {
        let nf = n as f64;
        let ratio = (a + nf) * (b + nf) / ((1.0 + nf) * (c + nf));
        term *= ratio * z;
        sum += term;
        terms = n + 2;
        // Tail bound from the term-ratio test: for |z| < 1 the remaining
        // ratios stay below |z| (all uses have ab < c), giving a geometric
        // bound; on |z| = 1 the terms decay like n^{a+b-c-1} and the tail
        // is below |t|·0.75·n for c − a − b ≥ 2.
        let t = term.norm();
        let geo = if r < 1.0 { 1.0 / (1.0 - r) } else { f64::INFINITY };
        let poly = 0.75 * (nf + 2.0) + c.abs();
        bound = t * geo.min(poly);
        if bound <= rel_tol * sum.norm() {
            break;
        }
    }
    let v = ensure_finite("gauss_2f1", sum)?;
    Ok(Sum2F1 { value: v, error_bound: bound, terms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn assert_close(a: Complex, b: Complex, tol: f64) {
        assert!(
            (a - b).norm() <= tol * (1.0 + b.norm()),
            "expected {b}, got {a} (tol {tol})"
        );
    }

    #[test]
    fn log_of_one_is_zero() {
        let v = branch_log(c(1.0, 0.0), BranchConvention::standard()).unwrap();
        assert_close(v, Complex::ZERO, 0.0);
    }

    #[test]
    fn log_window_positive_axis() {
        let conv = BranchConvention::positive_axis();
        // forced by the [0, 2π) window
        let v = branch_log(c(-1.0, 0.0), conv).unwrap();
        assert_close(v, c(0.0, PI), 1e-15);
        let v = branch_log(c(0.0, 1.0), conv).unwrap();
        assert_close(v, c(0.0, PI / 2.0), 1e-15);
        // below the positive half-axis the argument approaches 2π
        let v = branch_log(c(1.0, -1e-300), conv).unwrap();
        assert!((v.im - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn log_on_cut_sides() {
        let std = BranchConvention::standard();
        assert_eq!(std.arg_from(c(-2.0, 0.0), CutSide::Upper), PI);
        assert_eq!(std.arg_from(c(-2.0, 0.0), CutSide::Lower), -PI);
        let pos = BranchConvention::positive_axis();
        assert_eq!(pos.arg_from(c(2.0, 0.0), CutSide::Upper), 0.0);
        assert_eq!(pos.arg_from(c(2.0, 0.0), CutSide::Lower), 2.0 * PI);
        // signed zero from atan2 does not leak the wrong side
        assert_eq!(pos.arg_from(c(2.0, -0.0), CutSide::Upper), 0.0);
    }

    #[test]
    fn log_zero_is_domain_error() {
        assert!(matches!(
            branch_log(Complex::ZERO, BranchConvention::standard()),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn exp_log_roundtrip_10k_points() {
        // 10^4 pseudo-random points off both cuts, 1e-14 relative.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for conv in [BranchConvention::standard(), BranchConvention::positive_axis()] {
            for _ in 0..5_000 {
                let z = c(4.0 * next() - 2.0, 4.0 * next() - 2.0);
                if z.norm() < 1e-6 || z.im.abs() < 1e-12 {
                    continue;
                }
                let l = branch_log(z, conv).unwrap();
                assert_close(l.exp(), z, 1e-14);
                // argument lies in the convention's window
                if conv.is_positive_axis() {
                    assert!((0.0..2.0 * PI).contains(&l.im));
                } else {
                    assert!(-PI < l.im && l.im <= PI);
                }
            }
        }
    }

    #[test]
    fn pow_trivial_values() {
        let std = BranchConvention::standard();
        let pos = BranchConvention::positive_axis();
        assert_close(branch_pow(c(4.0, 0.0), 0.5, std).unwrap(), c(2.0, 0.0), 1e-15);
        // (-1)^{1/2} with args in [0, 2π) is e^{iπ/2} = i
        assert_close(branch_pow(c(-1.0, 0.0), 0.5, pos).unwrap(), c(0.0, 1.0), 1e-15);
    }

    #[test]
    fn pow_lower_side_limit() {
        // x = 16 approached from below the positive axis, s = 1/4:
        // e^{(1/4)(ln 16 + 2πi)} = 2i.
        let pos = BranchConvention::positive_axis();
        let v = branch_pow_from(c(16.0, 0.0), 0.25, pos, CutSide::Lower).unwrap();
        assert_close(v, c(0.0, 2.0), 1e-14);
    }

    #[test]
    fn pow_zero_base() {
        let std = BranchConvention::standard();
        assert_eq!(branch_pow(Complex::ZERO, 1.5, std).unwrap(), Complex::ZERO);
        assert_eq!(branch_pow(Complex::ZERO, 0.0, std).unwrap(), Complex::ONE);
        assert!(branch_pow(Complex::ZERO, -0.5, std).is_err());
    }

    #[test]
    fn arctan_known_values() {
        let std = BranchConvention::standard();
        assert_close(arctan_c(Complex::ZERO, std).unwrap(), Complex::ZERO, 0.0);
        assert_close(arctan_c(Complex::ONE, std).unwrap(), c(PI / 4.0, 0.0), 1e-15);
    }

    #[test]
    fn arctan_log_blowup_near_i() {
        // w = i(1−δ): imaginary part ≈ (1/2)·ln(2/δ)
        let delta = 1e-6;
        let v = arctan_c(c(0.0, 1.0 - delta), BranchConvention::standard()).unwrap();
        let expected = 0.5 * (2.0 / delta).ln();
        assert!((v.im - expected).abs() / expected < 1e-6, "{} vs {expected}", v.im);
        assert!(v.re.abs() < 1e-12);
    }

    #[test]
    fn arctan_singularity_is_error() {
        assert!(arctan_c(c(0.0, 1.0), BranchConvention::standard()).is_err());
        assert!(arctan_c(c(0.0, -1.0), BranchConvention::standard()).is_err());
    }

    #[test]
    fn gauss_2f1_at_zero_is_one() {
        let v = gauss_2f1(-0.5, 2.0, 3.5, Complex::ZERO).unwrap();
        assert_close(v, Complex::ONE, 0.0);
    }

    #[test]
    fn gauss_2f1_frozen_values_at_minus_one() {
        // F(−1/2, 1, 5/2; −1) = 3π/8, from the half-plane closed form at ζ=1.
        let v = gauss_2f1(-0.5, 1.0, 2.5, c(-1.0, 0.0)).unwrap();
        assert_close(v, c(3.0 * PI / 8.0, 0.0), 1e-10);
        // F(−1/2, 2, 7/2; −1) = 5/4, from the half-axis closed form at ζ=1.
        let v = gauss_2f1(-0.5, 2.0, 3.5, c(-1.0, 0.0)).unwrap();
        assert_close(v, c(1.25, 0.0), 1e-10);
    }

    #[test]
    fn gauss_2f1_rejects_bad_parameters() {
        assert!(gauss_2f1(-0.5, 1.0, 0.0, Complex::ZERO).is_err());
        assert!(gauss_2f1(-0.5, 1.0, -2.0, Complex::ZERO).is_err());
        assert!(gauss_2f1(-0.5, 1.0, 2.5, c(1.5, 0.0)).is_err());
    }

    #[test]
    fn gauss_2f1_term_cap_reports_no_convergence() {
        let r = gauss_2f1_full(-0.5, 4.0, 5.5, c(-0.999999, 0.0), 1e-14, 50);
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn gauss_2f1_doubling_cap_stays_within_tolerance() {
        let z = c(-0.83, 0.4);
        for (a, b, cc) in [(-0.5, 1.0, 2.5), (-0.5, 2.0, 3.5), (-0.5, 4.0, 5.5)] {
            let s1 = gauss_2f1_full(a, b, cc, z, 1e-12, 10_000).unwrap();
            let s2 = gauss_2f1_full(a, b, cc, z, 1e-12, 20_000).unwrap();
            assert!((s1.value - s2.value).norm() <= 1e-12 * (1.0 + s1.value.norm()));
            assert!((s1.value - s2.value).norm() <= s1.error_bound + 1e-16);
        }
    }
}

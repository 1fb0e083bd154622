//! Special functions behind the bounds and estimators: the Gaussian
//! Q-function, ten Brink's J-function, the Fisher-information deflation
//! integral for non-data-aided observation, and the absolute-moment ratio
//! curve with its inverses.
//!
//! The two infinite-domain integrals (deflation factor and J) are evaluated
//! by adaptive Simpson quadrature on a truncated interval; truncation rules
//! live in [`QuadratureSpec`]. Non-convergence is always an explicit error,
//! never a silent partial value.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Cap applied to diverging SNR estimates and inverse-ratio lookups so that
/// downstream mean-square aggregation stays finite. Shared by all estimators.
pub const GAMMA_CAP: f64 = 1e6;

/// 2/π, the zero-SNR endpoint of the absolute-moment ratio curve.
pub const TWO_OVER_PI: f64 = 2.0 / PI;

/// Tolerances and truncation rules for the quadrature-backed functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the integral value.
    pub abs_tol: f64,
    /// Relative tolerance on the integral value.
    pub rel_tol: f64,
    /// Truncation radius for the deflation integral. Its integrand is
    /// dominated by β²·exp(−β²/2), so the omitted tail at radius 12 is below
    /// 1e-29 in absolute terms.
    pub deflation_radius: f64,
    /// Half-width, in units of the Gaussian std-dev α, of the J-function
    /// integration interval centred on α²/2.
    pub j_tail_sigmas: f64,
    /// Evaluation budget before quadrature gives up with an error.
    pub max_evals: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            deflation_radius: 12.0,
            j_tail_sigmas: 10.0,
            max_evals: 2_000_000,
        }
    }
}

impl QuadratureSpec {
    /// Spec with tolerances tightened to 1e-12, used where the result is
    /// fed into a finite difference.
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if !self.deflation_radius.is_finite()
            || self.deflation_radius <= 0.0
            || !self.j_tail_sigmas.is_finite()
            || self.j_tail_sigmas <= 0.0
        {
            return Err(Error::InvalidParameter(
                "truncation radii must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Number of equal panels the interval is cut into before adaptive
/// refinement. Guards against false convergence when a narrow feature falls
/// between the first few sample points (the deflation integrand at high SNR
/// concentrates near the origin while the interval stays fixed).
const INITIAL_PANELS: usize = 16;

/// Adaptive Simpson quadrature with Richardson correction over an initial
/// uniform panelization.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    let h = (b - a) / INITIAL_PANELS as f64;
    let mut evals = 0usize;
    let mut panels = Vec::with_capacity(INITIAL_PANELS);
    let mut coarse = 0.0;
    for k in 0..INITIAL_PANELS {
        let pa = a + k as f64 * h;
        let pb = if k + 1 == INITIAL_PANELS { b } else { pa + h };
        let pm = 0.5 * (pa + pb);
        let (fa, fm, fb) = (f(pa), f(pm), f(pb));
        evals += 3;
        let s = simpson(pa, pb, fa, fm, fb);
        coarse += s;
        panels.push((pa, pb, fa, fm, fb, s));
    }
    let tol = spec.abs_tol.max(spec.rel_tol * coarse.abs()) / INITIAL_PANELS as f64;
    let mut total = 0.0;
    for (pa, pb, fa, fm, fb, s) in panels {
        total += refine(&f, pa, pb, fa, fm, fb, s, tol, 52, &mut evals, spec.max_evals)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
    max_evals: usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    *evals += 2;
    if *evals > max_evals || depth == 0 {
        return Err(Error::QuadratureNonConvergence { a, b, evals: *evals });
    }
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    let l = refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals, max_evals)?;
    let r = refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals, max_evals)?;
    Ok(l + r)
}

/// Gaussian Q-function: upper tail probability of a standard normal.
///
/// Strictly decreasing, range (0, 1); underflows to 0 near x ≈ 38.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Deflation factor of the Fisher information under non-data-aided
/// observation, as a function of linear SNR.
///
/// Equals 1 at zero SNR and decays monotonically to 0; setting it to 0
/// recovers the data-aided bounds.
pub fn fisher_deflation(gamma: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "deflation factor requires gamma >= 0, got {gamma}"
        )));
    }
    let scale = (2.0 * gamma).sqrt();
    let r = quad.deflation_radius;
    // cosh overflows to +inf for large arguments; β²·e^{−β²/2} / inf = 0,
    // which is the correct limit, so no explicit guard is needed.
    let integrand = |beta: f64| beta * beta * (-beta * beta / 2.0).exp() / (beta * scale).cosh();
    let integral = integrate(integrand, -r, r, quad)?;
    Ok((-gamma).exp() / (2.0 * PI).sqrt() * integral)
}

/// log2(1 + e^x), overflow-safe for any x.
pub(crate) fn log2_1p_exp(x: f64) -> f64 {
    if x > 33.0 {
        (x + (-x).exp().ln_1p()) / LN_2
    } else {
        x.exp().ln_1p() / LN_2
    }
}

/// Ten Brink's J-function: mutual information between a binary symbol and a
/// consistent-Gaussian LLR with standard deviation `alpha`.
///
/// Continuous and strictly increasing from J(0) = 0 (exact limit) towards 1.
pub fn j_function(alpha: f64, quad: &QuadratureSpec) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "j_function requires alpha >= 0, got {alpha}"
        )));
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let mean = alpha * alpha / 2.0;
    let w = quad.j_tail_sigmas * alpha;
    let integrand =
        |beta: f64| log2_1p_exp(-beta) * (-(beta - mean) * (beta - mean) / (2.0 * alpha * alpha)).exp();
    let integral = integrate(integrand, mean - w, mean + w, quad)?;
    Ok(1.0 - integral / ((2.0 * PI).sqrt() * alpha))
}

/// Fit constants for the closed-form approximation of the absolute-moment
/// ratio curve. Admissible signs (h1 > 0, h2 > 0, h3 < 0) are required for
/// the approximation to map [0, ∞) monotonically onto [2/π, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmFitConstants {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl AmFitConstants {
    /// Reference constants from the original published fit.
    pub const REFERENCE: Self = Self {
        h1: 0.6153,
        h2: 1.5296,
        h3: -0.6575,
    };

    pub fn new(h1: f64, h2: f64, h3: f64) -> Result<Self> {
        let c = Self { h1, h2, h3 };
        if !c.is_admissible() {
            return Err(Error::InvalidParameter(format!(
                "AM fit constants require h1 > 0, h2 > 0, h3 < 0, got ({h1}, {h2}, {h3})"
            )));
        }
        Ok(c)
    }

    pub fn is_admissible(&self) -> bool {
        self.h1 > 0.0 && self.h2 > 0.0 && self.h3 < 0.0 && self.h1.is_finite() && self.h2.is_finite() && self.h3.is_finite()
    }
}

impl Default for AmFitConstants {
    fn default() -> Self {
        Self::REFERENCE
    }
}

/// How to evaluate the absolute-moment ratio A²/M₂ as a function of SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmRatioMethod {
    /// Closed expression in Q-function terms; exact up to rounding.
    Exact,
    /// Three-constant fitted approximation.
    Fitted(AmFitConstants),
}

/// Absolute-moment ratio A²/M₂ at linear SNR `gamma` (`gamma >= 0`).
///
/// Strictly increasing from 2/π at zero SNR towards 1.
pub fn am_ratio(gamma: f64, method: AmRatioMethod) -> f64 {
    debug_assert!(gamma >= 0.0);
    match method {
        AmRatioMethod::Exact => {
            if gamma == 0.0 {
                return TWO_OVER_PI;
            }
            let t = 1.0 + (-gamma).exp() / (PI * gamma).sqrt() - 2.0 * q_function((2.0 * gamma).sqrt());
            2.0 * gamma / (2.0 * gamma + 1.0) * t * t
        }
        AmRatioMethod::Fitted(c) => {
            1.0 - (1.0 - TWO_OVER_PI) * (c.h1 * gamma.powf(c.h2) + 1.0).powf(c.h3)
        }
    }
}

/// How to invert the absolute-moment ratio back to an SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmInverseMethod {
    /// Bisection against the exact ratio curve; converges to relative
    /// bracket width 1e-12, well inside the 1e-10 ratio tolerance.
    Bisect,
    /// Closed-form inverse of the fitted approximation.
    Fitted(AmFitConstants),
    /// Legacy second-order polynomial inverse (dB-domain), kept verbatim:
    /// no floor below 2/π and no cap, so it degrades outside roughly
    /// −3..3 dB exactly as published.
    P2,
}

/// An inverted ratio: the SNR estimate plus a flag recording that a
/// zero-floor or cap rule fired on a degenerate input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub gamma: f64,
    pub clamped: bool,
}

/// Invert the absolute-moment ratio to a linear SNR.
///
/// For `Bisect` and `Fitted`, ratios at or below 2/π floor to zero and
/// ratios at or above 1 (possible when the sampled A² reaches M₂) return
/// [`GAMMA_CAP`], both with the `clamped` flag set. `P2` instead fails on
/// non-positive ratios (division by zero in its exponent) and is otherwise
/// left unclamped.
pub fn am_ratio_inverse(ratio: f64, method: AmInverseMethod) -> Result<Inversion> {
    if !ratio.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ratio must be finite, got {ratio}"
        )));
    }
    match method {
        AmInverseMethod::Bisect => Ok(invert_bisect(ratio)),
        AmInverseMethod::Fitted(c) => Ok(invert_fitted(ratio, &c)),
        AmInverseMethod::P2 => p2_inverse(ratio),
    }
}

fn invert_bisect(ratio: f64) -> Inversion {
    if ratio <= TWO_OVER_PI {
        return Inversion {
            gamma: 0.0,
            clamped: ratio < TWO_OVER_PI,
        };
    }
    if ratio >= am_ratio(GAMMA_CAP, AmRatioMethod::Exact) {
        return Inversion {
            gamma: GAMMA_CAP,
            clamped: true,
        };
    }
    let (mut lo, mut hi) = (0.0f64, GAMMA_CAP);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if am_ratio(mid, AmRatioMethod::Exact) < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Inversion {
        gamma: 0.5 * (lo + hi),
        clamped: false,
    }
}

fn invert_fitted(ratio: f64, c: &AmFitConstants) -> Inversion {
    if ratio <= TWO_OVER_PI {
        return Inversion {
            gamma: 0.0,
            clamped: ratio < TWO_OVER_PI,
        };
    }
    if ratio >= 1.0 {
        return Inversion {
            gamma: GAMMA_CAP,
            clamped: true,
        };
    }
    let base = ((1.0 - ratio) / (1.0 - TWO_OVER_PI)).powf(1.0 / c.h3);
    let raw = ((base - 1.0) / c.h1).powf(1.0 / c.h2);
    if raw >= GAMMA_CAP {
        Inversion {
            gamma: GAMMA_CAP,
            clamped: true,
        }
    } else {
        Inversion {
            gamma: raw,
            clamped: false,
        }
    }
}

fn p2_inverse(ratio: f64) -> Result<Inversion> {
    if ratio <= 0.0 {
        return Err(Error::EstimatorDomain {
            method: "p2",
            message: format!("ratio must be positive (division by zero in the exponent), got {ratio}"),
        });
    }
    let exponent = (-34.0516 / (ratio * ratio) + 65.9548 / ratio - 23.6184) / 10.0;
    Ok(Inversion {
        gamma: 0.5 * 10f64.powf(exponent),
        clamped: false,
    })
}

//! Non-data-aided SNR estimators and the quantities derived from an SNR
//! estimate: amplitude, noise std-dev, reliability constant, symbol prior,
//! and per-symbol / average BER and mutual-information metrics.
//!
//! Five estimators are provided. CM, MM, P2, and AM consume only sample
//! moments; ML iterates over the full block. All of them are invariant to
//! positive rescaling and to sign flips of the observables, which is why
//! they are unaffected by the symbol prior.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::SampleBlock;
use crate::moments::{sample_moments, CompensatedSum, MomentSummary};
use crate::specfun::{
    am_ratio_inverse, j_function, log2_1p_exp, q_function, AmFitConstants, AmInverseMethod,
    Inversion, QuadratureSpec, GAMMA_CAP,
};

/// The estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Conventional method: squared absolute moment over excess second moment.
    Cm,
    /// Iterative maximum likelihood (EM-type fixed point).
    Ml,
    /// Method of moments from the second and fourth moments.
    Mm,
    /// Legacy second-order polynomial inverse of the moment ratio.
    P2,
    /// Closed-form fitted inverse of the absolute-moment ratio.
    Am,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Cm, Method::Ml, Method::Mm, Method::P2, Method::Am];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Cm => "cm",
            Method::Ml => "ml",
            Method::Mm => "mm",
            Method::P2 => "p2",
            Method::Am => "am",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cm" => Ok(Method::Cm),
            "ml" => Ok(Method::Ml),
            "mm" => Ok(Method::Mm),
            "p2" => Ok(Method::P2),
            "am" => Ok(Method::Am),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator {other:?} (expected cm, ml, mm, p2, or am)"
            ))),
        }
    }
}

/// Tunables shared by the estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    /// Maximum ML iterations K.
    pub max_iter: usize,
    /// Early-exit tolerance on |μ̂ₖ₊₁ − μ̂ₖ| relative to √M₂.
    pub ml_tol: f64,
    /// Constants of the fitted ratio inverse used by the AM estimator.
    pub constants: AmFitConstants,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            max_iter: 10,
            ml_tol: 1e-9,
            constants: AmFitConstants::REFERENCE,
        }
    }
}

/// An SNR estimate with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrEstimate {
    pub method: Method,
    /// Estimated linear SNR, in [0, GAMMA_CAP].
    pub gamma_hat: f64,
    /// A documented zero-floor or cap rule fired on degenerate input.
    pub clamped: bool,
    /// ML iterations actually run; 0 for the moment-based methods.
    pub iterations_used: usize,
}

/// The amplitude trajectory of the ML iteration, μ̂₀..μ̂_K.
#[derive(Debug, Clone, PartialEq)]
pub struct MlTrajectory {
    pub mu_hats: Vec<f64>,
    /// Early-exit tolerance was reached before the iteration budget.
    pub converged: bool,
    /// |μ̂_K − μ̂_{K−1}| of the final step.
    pub final_delta: f64,
}

/// Margin keeping the ML amplitude strictly inside √M₂ so the iteration
/// denominator M₂ − μ̂² stays positive even on constant-magnitude blocks.
const ML_GUARD: f64 = 1.0 - 1e-9;

/// Shared finalizer: estimates are floored at 0 and capped at [`GAMMA_CAP`]
/// so mean-square aggregation stays finite; clamping is flagged.
fn finalize_gamma(raw: f64) -> (f64, bool) {
    if !(raw >= 0.0) {
        // Negative or NaN cannot be produced by the guarded formulas.
        debug_assert!(false, "unexpected raw SNR estimate {raw}");
        return (0.0, true);
    }
    if raw > GAMMA_CAP {
        (GAMMA_CAP, true)
    } else {
        (raw, false)
    }
}

/// Run a moment-based estimator (CM, MM, P2, or AM) on a moment summary.
///
/// ML is rejected here: it needs the samples themselves. A summary with
/// M₂ = 0 (an all-zero block) yields a flagged zero estimate, except for P2
/// whose ratio is then undefined and surfaces as a domain error.
pub fn estimate_from_moments(
    m: &MomentSummary,
    method: Method,
    constants: &AmFitConstants,
) -> Result<SnrEstimate> {
    let done = |gamma_hat: f64, clamped: bool| SnrEstimate {
        method,
        gamma_hat,
        clamped,
        iterations_used: 0,
    };
    match method {
        Method::Ml => Err(Error::InvalidParameter(
            "the ml estimator consumes samples, not moments".into(),
        )),
        Method::Cm => {
            if m.m2 <= 0.0 {
                return Ok(done(0.0, true));
            }
            let a2 = m.abs_moment * m.abs_moment;
            if a2 >= m.m2 * (1.0 - 1e-12) {
                return Ok(done(GAMMA_CAP, true));
            }
            let (g, c) = finalize_gamma(a2 / (2.0 * (m.m2 - a2)));
            Ok(done(g, c))
        }
        Method::Mm => {
            if m.m2 <= 0.0 {
                return Ok(done(0.0, true));
            }
            let radicand = 6.0 * m.m2 * m.m2 - 2.0 * m.m4;
            if radicand < 0.0 {
                // Fourth moment above 3M₂²: no real solution, floor to zero.
                return Ok(done(0.0, true));
            }
            let s = radicand.sqrt();
            let den = 4.0 * m.m2 - 2.0 * s;
            // den < 0 would need M₄ < M₂², impossible for real data; den = 0
            // happens on constant-magnitude blocks and means infinite SNR.
            let raw = if den <= 0.0 { f64::INFINITY } else { s / den };
            let (g, c) = finalize_gamma(raw);
            Ok(done(g, c))
        }
        Method::P2 => {
            if m.m2 <= 0.0 {
                return Err(Error::EstimatorDomain {
                    method: "p2",
                    message: "moment ratio undefined for an all-zero block".into(),
                });
            }
            let ratio = m.abs_moment * m.abs_moment / m.m2;
            let Inversion { gamma, clamped } = am_ratio_inverse(ratio, AmInverseMethod::P2)?;
            Ok(done(gamma, clamped))
        }
        Method::Am => {
            if m.m2 <= 0.0 {
                return Ok(done(0.0, true));
            }
            let ratio = m.abs_moment * m.abs_moment / m.m2;
            let Inversion { gamma, clamped } =
                am_ratio_inverse(ratio, AmInverseMethod::Fitted(*constants))?;
            Ok(done(gamma, clamped))
        }
    }
}

/// Iterative ML estimate plus its amplitude trajectory.
///
/// Starts from μ̂₀ = A, iterates
/// μ̂ₖ₊₁ = (1/N)Σ yₙ·tanh(μ̂ₖyₙ/(M₂−μ̂ₖ²)) for up to `max_iter` steps or
/// until the step falls below `ml_tol·√M₂`, then maps the final amplitude
/// through γ̂ = μ̂²/(2(M₂−μ̂²)).
pub fn estimate_ml(block: &SampleBlock, opts: &EstimateOptions) -> (SnrEstimate, MlTrajectory) {
    let m = sample_moments(block);
    ml_from_moments(block, &m, opts)
}

pub(crate) fn ml_from_moments(
    block: &SampleBlock,
    m: &MomentSummary,
    opts: &EstimateOptions,
) -> (SnrEstimate, MlTrajectory) {
    if m.m2 <= 0.0 {
        return (
            SnrEstimate {
                method: Method::Ml,
                gamma_hat: 0.0,
                clamped: true,
                iterations_used: 0,
            },
            MlTrajectory {
                mu_hats: vec![0.0],
                converged: true,
                final_delta: 0.0,
            },
        );
    }
    let sqrt_m2 = m.m2.sqrt();
    let mu_cap = ML_GUARD * sqrt_m2;
    let inv_n = 1.0 / block.len() as f64;

    let mut mu = m.abs_moment.min(mu_cap);
    let mut mu_hats = Vec::with_capacity(opts.max_iter + 1);
    mu_hats.push(mu);
    let mut converged = false;
    let mut final_delta = 0.0;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        let v = m.m2 - mu * mu;
        let scale = mu / v;
        let mut acc = CompensatedSum::new();
        for &y in block.samples() {
            acc.add(y * (scale * y).tanh());
        }
        let next = (acc.total() * inv_n).min(mu_cap);
        iterations += 1;
        final_delta = (next - mu).abs();
        mu_hats.push(next);
        mu = next;
        if final_delta < opts.ml_tol * sqrt_m2 {
            converged = true;
            break;
        }
    }
    let (gamma_hat, clamped) = finalize_gamma(mu * mu / (2.0 * (m.m2 - mu * mu)));
    (
        SnrEstimate {
            method: Method::Ml,
            gamma_hat,
            clamped,
            iterations_used: iterations,
        },
        MlTrajectory {
            mu_hats,
            converged,
            final_delta,
        },
    )
}

/// Estimate the SNR of a block with the chosen method.
pub fn estimate_snr(block: &SampleBlock, method: Method, opts: &EstimateOptions) -> Result<SnrEstimate> {
    match method {
        Method::Ml => Ok(estimate_ml(block, opts).0),
        _ => estimate_from_moments(&sample_moments(block), method, &opts.constants),
    }
}

/// Joint log-likelihood of a block and its two analytic partials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub grad_mu: f64,
    pub grad_sigma: f64,
}

/// ln(cosh(x)), overflow-safe.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Evaluate ln p(y; μ, σ) for the two-component symmetric mixture together
/// with ∂/∂μ and ∂/∂σ. Requires σ > 0.
pub fn log_likelihood(block: &SampleBlock, mu: f64, sigma: f64) -> Result<LogLikelihood> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "log-likelihood requires sigma > 0, got {sigma}"
        )));
    }
    let s2 = sigma * sigma;
    let n = block.len() as f64;
    let mut sum_y2 = CompensatedSum::new();
    let mut sum_ytanh = CompensatedSum::new();
    let mut sum_lncosh = CompensatedSum::new();
    for &y in block.samples() {
        let u = mu * y / s2;
        sum_y2.add(y * y);
        sum_ytanh.add(y * u.tanh());
        sum_lncosh.add(ln_cosh(u));
    }
    let mean_y2 = sum_y2.total() / n;
    let mean_ytanh = sum_ytanh.total() / n;
    let value = -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - n * mu * mu / (2.0 * s2)
        - sum_y2.total() / (2.0 * s2)
        + sum_lncosh.total();
    let grad_mu = n / s2 * (mean_ytanh - mu);
    let grad_sigma = n / (s2 * sigma) * (mu * mu - s2 + mean_y2 - 2.0 * mu * mean_ytanh);
    Ok(LogLikelihood {
        value,
        grad_mu,
        grad_sigma,
    })
}

/// Channel parameters derived from an SNR estimate plus sample moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub mu_hat: f64,
    pub sigma_hat: f64,
    pub lambda_hat: f64,
    /// Estimated prior of the +1 symbol, clamped to [0, 1].
    pub q_hat: f64,
    /// The prior was clamped, or undefined at γ̂ = 0 and defaulted to 1/2.
    pub q_flagged: bool,
}

/// Map (γ̂, M₁, M₂) to amplitude, noise, reliability, and prior estimates:
/// μ̂ = √(2γ̂M₂/(1+2γ̂)), σ̂ = √(M₂/(1+2γ̂)), λ̂ = √((8γ̂+16γ̂²)/M₂),
/// q̂ = (M₁/2)·√((1+2γ̂)/(2γ̂M₂)) + 1/2.
pub fn derive_params(gamma_hat: f64, m1: f64, m2: f64) -> Result<DerivedParams> {
    if !(m2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "second moment must be positive, got {m2}"
        )));
    }
    if !(gamma_hat >= 0.0) || !gamma_hat.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "SNR estimate must be finite and non-negative, got {gamma_hat}"
        )));
    }
    if gamma_hat == 0.0 {
        return Ok(DerivedParams {
            mu_hat: 0.0,
            sigma_hat: m2.sqrt(),
            lambda_hat: 0.0,
            q_hat: 0.5,
            q_flagged: true,
        });
    }
    let denom = 1.0 + 2.0 * gamma_hat;
    let mu_hat = (2.0 * gamma_hat * m2 / denom).sqrt();
    let sigma_hat = (m2 / denom).sqrt();
    let lambda_hat = ((8.0 * gamma_hat + 16.0 * gamma_hat * gamma_hat) / m2).sqrt();
    let q_raw = 0.5 * m1 * (denom / (2.0 * gamma_hat * m2)).sqrt() + 0.5;
    let q_hat = q_raw.clamp(0.0, 1.0);
    Ok(DerivedParams {
        mu_hat,
        sigma_hat,
        lambda_hat,
        q_hat,
        q_flagged: q_raw != q_hat,
    })
}

/// Per-symbol soft metrics for one observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolMetrics {
    /// Log-likelihood ratio Λ = λ̂·y.
    pub llr: f64,
    /// Instantaneous error probability 1/(1+e^{|Λ|}) ∈ (0, 1/2].
    pub inst_ber: f64,
    /// Instantaneous mutual information 1 − 2·log₂(1+e^{−Λ})/(1+e^{−Λ}).
    pub inst_mi: f64,
}

#[inline]
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Soft metrics of a single observable under reliability constant `lambda_hat`.
/// Overflow-safe for |λ̂y| well beyond 1e4.
pub fn symbol_metrics(lambda_hat: f64, y: f64) -> SymbolMetrics {
    let llr = lambda_hat * y;
    let e = (-llr.abs()).exp();
    let inst_ber = e / (1.0 + e);
    let inst_mi = 1.0 - 2.0 * log2_1p_exp(-llr) * sigmoid(llr);
    SymbolMetrics { llr, inst_ber, inst_mi }
}

/// Channel-average error rate and mutual information at a given SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMetrics {
    /// Average bit error rate Q(√(2γ)).
    pub avg_ber: f64,
    /// Average mutual information J(√(8γ)).
    pub avg_mi: f64,
}

pub fn channel_metrics(gamma: f64, quad: &QuadratureSpec) -> Result<ChannelMetrics> {
    if !(gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "channel metrics require gamma >= 0, got {gamma}"
        )));
    }
    Ok(ChannelMetrics {
        avg_ber: q_function((2.0 * gamma).sqrt()),
        avg_mi: j_function((8.0 * gamma).sqrt(), quad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_block, ChannelParams, SampleBlock};
    use crate::moments::exact_moments;
    use crate::rng::{derive_key, CounterRng};

    fn block(samples: &[f64]) -> SampleBlock {
        SampleBlock::new(samples.to_vec(), 0, None).unwrap()
    }

    fn moments(m1: f64, m2: f64, m4: f64, a: f64) -> MomentSummary {
        MomentSummary {
            m1,
            m2,
            m4,
            abs_moment: a,
            n: 0,
        }
    }

    const REF: AmFitConstants = AmFitConstants::REFERENCE;

    // ── Moment-based estimators ──────────────────────────────────────

    #[test]
    fn mm_is_exact_on_exact_moments() {
        let p = ChannelParams::new(1.0, 0.5, 0.5).unwrap();
        let m = exact_moments(&p);
        assert_eq!(m.m2, 1.25);
        assert_eq!(m.m4, 2.6875);
        let est = estimate_from_moments(&m, Method::Mm, &REF).unwrap();
        assert!((est.gamma_hat - 2.0).abs() < 1e-12, "mm={}", est.gamma_hat);
        assert!(!est.clamped);
    }

    #[test]
    fn mm_floors_on_negative_radicand() {
        let est = estimate_from_moments(&moments(0.0, 1.0, 3.5, 0.8), Method::Mm, &REF).unwrap();
        assert_eq!(est.gamma_hat, 0.0);
        assert!(est.clamped);
    }

    #[test]
    fn mm_caps_on_constant_magnitude_block() {
        // M₄ = M₂² makes the denominator exactly zero: infinite raw SNR.
        let est = estimate_from_moments(&moments(0.0, 1.0, 1.0, 1.0), Method::Mm, &REF).unwrap();
        assert_eq!(est.gamma_hat, GAMMA_CAP);
        assert!(est.clamped);
    }

    #[test]
    fn cm_matches_hand_substitution() {
        // A²/M₂ = 0.8 with M₂ = 1 gives 0.8/(2·0.2) = 2.
        let est =
            estimate_from_moments(&moments(0.0, 1.0, 2.0, 0.8f64.sqrt()), Method::Cm, &REF).unwrap();
        assert!((est.gamma_hat - 2.0).abs() < 1e-12);
        assert!(!est.clamped);
    }

    #[test]
    fn cm_caps_when_ratio_reaches_one() {
        let est = estimate_from_moments(&moments(0.0, 1.0, 1.0, 1.0), Method::Cm, &REF).unwrap();
        assert_eq!(est.gamma_hat, GAMMA_CAP);
        assert!(est.clamped);
    }

    #[test]
    fn am_floors_below_two_over_pi() {
        let est =
            estimate_from_moments(&moments(0.0, 1.0, 2.0, 0.6f64.sqrt()), Method::Am, &REF).unwrap();
        assert_eq!(est.gamma_hat, 0.0);
        assert!(est.clamped);
    }

    #[test]
    fn p2_domain_error_carries_method_tag() {
        match estimate_from_moments(&moments(0.0, 1.0, 1.0, 0.0), Method::P2, &REF) {
            Err(Error::EstimatorDomain { method: "p2", .. }) => {}
            other => panic!("expected p2 domain error, got {other:?}"),
        }
    }

    #[test]
    fn ml_rejects_moment_only_input() {
        assert!(estimate_from_moments(&moments(0.0, 1.0, 1.0, 0.5), Method::Ml, &REF).is_err());
    }

    // ── ML iteration ─────────────────────────────────────────────────

    #[test]
    fn ml_noiseless_block_runs_to_the_cap() {
        let c = 0.7;
        let b = block(&[c, c, -c, -c]);
        let (est, traj) = estimate_ml(&b, &EstimateOptions::default());
        assert_eq!(est.gamma_hat, GAMMA_CAP);
        assert!(est.clamped);
        // Guard keeps every iterate strictly inside sqrt(M2).
        let m2 = c * c;
        for &mu in &traj.mu_hats {
            assert!(mu * mu < m2, "mu={mu}");
        }
        assert!(*traj.mu_hats.last().unwrap() > 0.99 * c);
    }

    #[test]
    fn ml_is_consistent_at_large_n() {
        // Run to convergence: at this SNR the fixed point needs ~30
        // iterations, and the default K=10 still carries a few percent of
        // start-value bias.
        let p = ChannelParams::new(1.0, 1.0, 0.5).unwrap();
        let b = generate_block(&p, 100_000, 13).unwrap();
        let opts = EstimateOptions {
            max_iter: 100,
            ..Default::default()
        };
        let (est, traj) = estimate_ml(&b, &opts);
        assert!(traj.converged);
        assert!(
            (est.gamma_hat - 0.5).abs() / 0.5 < 0.02,
            "ml={}",
            est.gamma_hat
        );
    }

    #[test]
    fn ml_trajectory_ascends_the_likelihood() {
        // EM guarantee: ln p at (μ̂ₖ, σ² = M₂−μ̂ₖ²) never decreases.
        let p = ChannelParams::new(1.0, 0.9, 0.5).unwrap();
        for seed in 0..5u64 {
            let b = generate_block(&p, 512, derive_key(5, seed)).unwrap();
            let m = sample_moments(&b);
            let opts = EstimateOptions {
                max_iter: 20,
                ..Default::default()
            };
            let (_, traj) = estimate_ml(&b, &opts);
            let mut prev = f64::NEG_INFINITY;
            for &mu in &traj.mu_hats {
                let sigma = (m.m2 - mu * mu).sqrt();
                let ll = log_likelihood(&b, mu, sigma).unwrap().value;
                assert!(
                    ll >= prev - 1e-9 * prev.abs().max(1.0),
                    "likelihood decreased: {prev} -> {ll}"
                );
                prev = ll;
            }
        }
    }

    #[test]
    fn ml_early_exit_reports_iterations() {
        let p = ChannelParams::new(1.0, 0.1, 0.5).unwrap();
        let b = generate_block(&p, 4096, 3).unwrap();
        let opts = EstimateOptions {
            max_iter: 50,
            ml_tol: 1e-9,
            constants: REF,
        };
        let (est, traj) = estimate_ml(&b, &opts);
        assert!(traj.converged);
        assert!(est.iterations_used < 50);
        assert_eq!(traj.mu_hats.len(), est.iterations_used + 1);
    }

    // ── Invariances shared by all methods ────────────────────────────

    fn all_estimates(b: &SampleBlock) -> Vec<SnrEstimate> {
        let opts = EstimateOptions::default();
        Method::ALL
            .iter()
            .map(|&m| estimate_snr(b, m, &opts).unwrap())
            .collect()
    }

    #[test]
    fn estimates_are_scale_invariant() {
        let p = ChannelParams::new(1.0, 0.8, 0.5).unwrap();
        let base = generate_block(&p, 256, 17).unwrap();
        let reference = all_estimates(&base);
        // Power-of-two scales commute exactly with IEEE rounding.
        for exp in [-8i32, -3, -1, 1, 4, 9] {
            let c = 2f64.powi(exp);
            let scaled = block(&base.samples().iter().map(|y| c * y).collect::<Vec<_>>());
            for (a, b) in reference.iter().zip(all_estimates(&scaled)) {
                assert_eq!(a.gamma_hat, b.gamma_hat, "method {:?} c={c}", a.method);
            }
        }
        // Arbitrary scales agree to rounding.
        let rng = CounterRng::new(77);
        for i in 0..6 {
            let c = 0.1 + 5.0 * rng.uniform(i);
            let scaled = block(&base.samples().iter().map(|y| c * y).collect::<Vec<_>>());
            for (a, b) in reference.iter().zip(all_estimates(&scaled)) {
                assert!(
                    (a.gamma_hat - b.gamma_hat).abs() <= 1e-12 * a.gamma_hat.max(1.0),
                    "method {:?} c={c}: {} vs {}",
                    a.method,
                    a.gamma_hat,
                    b.gamma_hat
                );
            }
        }
    }

    #[test]
    fn estimates_are_sign_invariant() {
        // Flipping any subset of signs changes nothing, bit for bit; this is
        // the testable face of prior-independence.
        let p = ChannelParams::new(1.0, 0.8, 0.5).unwrap();
        let base = generate_block(&p, 256, 18).unwrap();
        let reference = all_estimates(&base);
        let rng = CounterRng::new(1234);
        for trial in 0..4u64 {
            let flipped: Vec<f64> = base
                .samples()
                .iter()
                .enumerate()
                .map(|(i, &y)| {
                    if rng.bits(trial * 1000 + i as u64) & 1 == 1 {
                        -y
                    } else {
                        y
                    }
                })
                .collect();
            for (a, b) in reference.iter().zip(all_estimates(&block(&flipped))) {
                assert_eq!(a.gamma_hat, b.gamma_hat, "method {:?}", a.method);
            }
        }
    }

    // ── Log-likelihood ───────────────────────────────────────────────

    #[test]
    fn gradients_match_finite_differences() {
        let p = ChannelParams::new(1.0, 1.0, 0.5).unwrap();
        let b = generate_block(&p, 100, 29).unwrap();
        let (mu, sigma) = (0.8, 1.1);
        let ll = log_likelihood(&b, mu, sigma).unwrap();
        let h = 1e-6;
        let fd_mu = (log_likelihood(&b, mu + h, sigma).unwrap().value
            - log_likelihood(&b, mu - h, sigma).unwrap().value)
            / (2.0 * h);
        let fd_sigma = (log_likelihood(&b, mu, sigma + h).unwrap().value
            - log_likelihood(&b, mu, sigma - h).unwrap().value)
            / (2.0 * h);
        assert!(
            (ll.grad_mu - fd_mu).abs() <= 1e-6 * fd_mu.abs().max(1.0),
            "grad_mu={} fd={}",
            ll.grad_mu,
            fd_mu
        );
        assert!(
            (ll.grad_sigma - fd_sigma).abs() <= 1e-6 * fd_sigma.abs().max(1.0),
            "grad_sigma={} fd={}",
            ll.grad_sigma,
            fd_sigma
        );
    }

    #[test]
    fn gradients_vanish_at_the_ml_fixed_point() {
        let p = ChannelParams::new(1.0, 0.7, 0.5).unwrap();
        let b = generate_block(&p, 2000, 31).unwrap();
        let m = sample_moments(&b);
        let opts = EstimateOptions {
            max_iter: 400,
            ml_tol: 1e-14,
            constants: REF,
        };
        let (_, traj) = estimate_ml(&b, &opts);
        let mu = *traj.mu_hats.last().unwrap();
        let sigma = (m.m2 - mu * mu).sqrt();
        let ll = log_likelihood(&b, mu, sigma).unwrap();
        let n = b.len() as f64;
        assert!(ll.grad_mu.abs() < 1e-6 * n, "grad_mu={}", ll.grad_mu);
        assert!(ll.grad_sigma.abs() < 1e-6 * n, "grad_sigma={}", ll.grad_sigma);
    }

    #[test]
    fn zero_amplitude_reduces_to_gaussian_likelihood() {
        let b = block(&[0.3, -1.2, 0.7, 2.1, -0.4]);
        let sigma = 1.3;
        let ll = log_likelihood(&b, 0.0, sigma).unwrap();
        let n = b.len() as f64;
        let sum_y2: f64 = b.samples().iter().map(|y| y * y).sum();
        let expected =
            -0.5 * n * (2.0 * std::f64::consts::PI * sigma * sigma).ln() - sum_y2 / (2.0 * sigma * sigma);
        assert!((ll.value - expected).abs() < 1e-12);
        assert_eq!(ll.grad_mu, 0.0);
    }

    #[test]
    fn log_likelihood_rejects_non_positive_sigma() {
        let b = block(&[1.0]);
        assert!(log_likelihood(&b, 1.0, 0.0).is_err());
        assert!(log_likelihood(&b, 1.0, -1.0).is_err());
    }

    // ── Derived parameters ───────────────────────────────────────────

    #[test]
    fn derive_params_half_snr() {
        let d = derive_params(0.5, 0.0, 2.0).unwrap();
        assert!((d.mu_hat - 1.0).abs() < 1e-15);
        assert!((d.sigma_hat - 1.0).abs() < 1e-15);
        assert!((d.lambda_hat - 2.0).abs() < 1e-15);
        assert_eq!(d.q_hat, 0.5);
        assert!(!d.q_flagged);
    }

    #[test]
    fn derive_params_recovers_certain_prior() {
        // With q = 1 the first moment equals μ; feeding exact moments and
        // the true SNR back recovers q̂ = 1.
        let p = ChannelParams::new(1.0, 1.0, 1.0).unwrap();
        let m = exact_moments(&p);
        let d = derive_params(0.5, m.m1, m.m2).unwrap();
        assert!((d.q_hat - 1.0).abs() < 1e-12, "q={}", d.q_hat);
        assert!(!d.q_flagged);
    }

    #[test]
    fn derive_params_zero_snr_is_flagged() {
        let d = derive_params(0.0, 0.1, 1.0).unwrap();
        assert_eq!(d.mu_hat, 0.0);
        assert_eq!(d.sigma_hat, 1.0);
        assert_eq!(d.lambda_hat, 0.0);
        assert_eq!(d.q_hat, 0.5);
        assert!(d.q_flagged);
    }

    #[test]
    fn derive_params_partition_and_consistency() {
        // μ̂² + σ̂² reassembles M₂; λ̂ = 2μ̂/σ̂².
        for gamma in [0.1, 0.5, 2.0, 50.0] {
            let m2 = 1.7;
            let d = derive_params(gamma, 0.3, m2).unwrap();
            assert!((d.mu_hat * d.mu_hat + d.sigma_hat * d.sigma_hat - m2).abs() <= 1e-12);
            let lambda = 2.0 * d.mu_hat / (d.sigma_hat * d.sigma_hat);
            assert!((d.lambda_hat - lambda).abs() <= 1e-10 * lambda.max(1.0));
        }
    }

    #[test]
    fn derive_params_clamps_wild_prior() {
        // Small γ̂M₂ makes the prior formula explode; it is clamped + flagged.
        let d = derive_params(1e-6, 1.0, 1.0).unwrap();
        assert_eq!(d.q_hat, 1.0);
        assert!(d.q_flagged);
    }

    // ── Symbol and channel metrics ───────────────────────────────────

    #[test]
    fn symbol_metrics_at_zero() {
        let s = symbol_metrics(2.0, 0.0);
        assert_eq!(s.llr, 0.0);
        assert_eq!(s.inst_ber, 0.5);
        assert_eq!(s.inst_mi, 0.0);
    }

    #[test]
    fn symbol_metrics_saturate() {
        let s = symbol_metrics(50.0, 1.0);
        assert!(s.inst_ber < 1e-21, "ber={}", s.inst_ber);
        assert!((s.inst_mi - 1.0).abs() < 1e-15, "mi={}", s.inst_mi);
        // Stays finite far beyond any practical LLR.
        let far = symbol_metrics(1e4, 1.0);
        assert!(far.inst_ber >= 0.0 && far.inst_mi <= 1.0);
        let far_neg = symbol_metrics(1e4, -1.0);
        assert!(far_neg.inst_mi.is_finite());
    }

    #[test]
    fn inst_ber_is_even_in_the_llr() {
        let a = symbol_metrics(3.7, 1.0);
        let b = symbol_metrics(3.7, -1.0);
        assert_eq!(a.inst_ber, b.inst_ber);
    }

    #[test]
    fn channel_metrics_anchors() {
        let quad = QuadratureSpec::default();
        let m0 = channel_metrics(0.0, &quad).unwrap();
        assert_eq!(m0.avg_ber, 0.5);
        assert_eq!(m0.avg_mi, 0.0);
        let m = channel_metrics(0.5, &quad).unwrap();
        assert!((m.avg_ber - 0.158655253931457).abs() < 1e-12);
        let m1 = channel_metrics(1.0, &quad).unwrap();
        let m2 = channel_metrics(2.0, &quad).unwrap();
        assert!(m1.avg_ber > m2.avg_ber);
        assert!(m1.avg_mi < m2.avg_mi);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_str(m.as_str()).unwrap(), m);
        }
        assert!(Method::from_str("bogus").is_err());
    }
}

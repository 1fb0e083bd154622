//! Channel parameterization and synthetic sample generation.
//!
//! The canonical parameter triple is (μ, σ, q): signal amplitude, noise
//! standard deviation, and the a-priori probability of the +1 symbol. SNR
//! and the channel reliability constant are derived views, never stored, so
//! inconsistent triples cannot be constructed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// True channel state for BPSK over AWGN: y = μ·x + σ·w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    mu: f64,
    sigma: f64,
    prior_q: f64,
}

impl ChannelParams {
    /// Build from the canonical triple. `sigma = 0` (noiseless) is accepted
    /// here because such blocks are useful test fixtures; quantities that
    /// need 1/σ² reject it lazily when read.
    pub fn new(mu: f64, sigma: f64, prior_q: f64) -> Result<Self> {
        if !mu.is_finite() || mu < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be finite and non-negative, got {mu}"
            )));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noise std-dev must be finite and non-negative, got {sigma}"
            )));
        }
        if mu == 0.0 && sigma == 0.0 {
            return Err(Error::InvalidParameter(
                "amplitude and noise std-dev cannot both be zero".into(),
            ));
        }
        if !(0.0..=1.0).contains(&prior_q) {
            return Err(Error::InvalidParameter(format!(
                "prior probability must lie in [0, 1], got {prior_q}"
            )));
        }
        Ok(Self { mu, sigma, prior_q })
    }

    /// Build from one of the supported specification forms.
    pub fn from_spec(spec: ParamSpec, prior_q: f64) -> Result<Self> {
        match spec {
            ParamSpec::MuSigma { mu, sigma } => {
                if !(sigma > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "noise std-dev must be positive, got {sigma}"
                    )));
                }
                if !(mu > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "amplitude must be positive, got {mu}"
                    )));
                }
                Self::new(mu, sigma, prior_q)
            }
            ParamSpec::GammaLinear { gamma, m2_scale } => {
                if !(gamma >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "SNR must be non-negative, got {gamma}"
                    )));
                }
                if !(m2_scale > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "second-moment scale must be positive, got {m2_scale}"
                    )));
                }
                // M₂ = μ² + σ² and μ² = 2γσ² pin both amplitudes.
                let sigma = (m2_scale / (1.0 + 2.0 * gamma)).sqrt();
                let mu = (2.0 * gamma * m2_scale / (1.0 + 2.0 * gamma)).sqrt();
                Self::new(mu, sigma, prior_q)
            }
            ParamSpec::GammaDb { gamma_db, m2_scale } => {
                if !gamma_db.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "SNR in dB must be finite, got {gamma_db}"
                    )));
                }
                Self::from_spec(
                    ParamSpec::GammaLinear {
                        gamma: 10f64.powf(gamma_db / 10.0),
                        m2_scale,
                    },
                    prior_q,
                )
            }
        }
    }

    /// Signal amplitude μ = √Es.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Noise standard deviation σ = √(N₀/2).
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// A-priori probability of the +1 symbol.
    pub fn prior_q(&self) -> f64 {
        self.prior_q
    }

    /// Linear SNR γ = μ²/(2σ²). Positive infinity for a noiseless channel.
    pub fn gamma(&self) -> f64 {
        self.mu * self.mu / (2.0 * self.sigma * self.sigma)
    }

    /// SNR in dB.
    pub fn gamma_db(&self) -> f64 {
        10.0 * self.gamma().log10()
    }

    /// Channel reliability constant λ = 2μ/σ². Rejected for σ = 0.
    pub fn lambda(&self) -> Result<f64> {
        if self.sigma == 0.0 {
            return Err(Error::InvalidParameter(
                "reliability constant is undefined for a noiseless channel".into(),
            ));
        }
        Ok(2.0 * self.mu / (self.sigma * self.sigma))
    }

    /// Symbol energy Es = μ².
    pub fn symbol_energy(&self) -> f64 {
        self.mu * self.mu
    }

    /// One-sided noise spectral density N₀ = 2σ².
    pub fn noise_density(&self) -> f64 {
        2.0 * self.sigma * self.sigma
    }

    /// Second moment of the observable, μ² + σ².
    pub fn second_moment(&self) -> f64 {
        self.mu * self.mu + self.sigma * self.sigma
    }
}

/// The supported ways of pinning a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamSpec {
    MuSigma { mu: f64, sigma: f64 },
    /// Linear SNR plus an absolute scale fixing μ² + σ².
    GammaLinear { gamma: f64, m2_scale: f64 },
    /// SNR in dB plus an absolute scale fixing μ² + σ².
    GammaDb { gamma_db: f64, m2_scale: f64 },
}

/// A block of observables plus its generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    samples: Vec<f64>,
    seed: u64,
    truth: Option<ChannelParams>,
}

impl SampleBlock {
    /// Wrap existing observables; must be non-empty and all finite.
    pub fn new(samples: Vec<f64>, seed: u64, truth: Option<ChannelParams>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBlock);
        }
        if let Some(index) = samples.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFiniteSample { index });
        }
        Ok(Self { samples, seed, truth })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction rejects empty blocks.
        false
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn truth(&self) -> Option<&ChannelParams> {
        self.truth.as_ref()
    }
}

/// Generate `n` observables y = μ·x + σ·w deterministically from `seed`.
///
/// Sample `k` consumes exactly the counter pair (2k, 2k+1) of the keyed
/// stream — one uniform for the symbol, one inverse-CDF normal for the
/// noise — so identical inputs are bit-identical on any thread count.
pub fn generate_block(params: &ChannelParams, n: usize, seed: u64) -> Result<SampleBlock> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "block length must be at least one".into(),
        ));
    }
    let rng = CounterRng::new(seed);
    let samples = (0..n)
        .map(|k| {
            let u = rng.uniform(2 * k as u64);
            let x = if u < params.prior_q { 1.0 } else { -1.0 };
            let w = rng.standard_normal(2 * k as u64 + 1);
            params.mu * x + params.sigma * w
        })
        .collect();
    Ok(SampleBlock {
        samples,
        seed,
        truth: Some(*params),
    })
}

/// Write a block as plain text: one observable per line, preceded by
/// `# key=value` comments carrying the generation metadata.
pub fn write_samples(block: &SampleBlock, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# seed={}", block.seed);
    if let Some(t) = &block.truth {
        let _ = writeln!(out, "# mu={}", t.mu);
        let _ = writeln!(out, "# sigma={}", t.sigma);
        let _ = writeln!(out, "# prior_q={}", t.prior_q);
    }
    for y in &block.samples {
        let _ = writeln!(out, "{y}");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a block written by [`write_samples`] (or any plain list of decimal
/// observables, one per line, with optional `# key=value` header comments).
pub fn read_samples(path: &Path) -> Result<SampleBlock> {
    let text = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    let mut seed = 0u64;
    let (mut mu, mut sigma, mut prior_q) = (None, None, None);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                match key {
                    "seed" => seed = value.parse().unwrap_or(seed),
                    "mu" => mu = value.parse().ok(),
                    "sigma" => sigma = value.parse().ok(),
                    "prior_q" => prior_q = value.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }
        let y: f64 = line.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("expected a decimal observable, got {line:?}"),
        })?;
        samples.push(y);
    }
    let truth = match (mu, sigma, prior_q) {
        (Some(m), Some(s), Some(q)) => Some(ChannelParams::new(m, s, q)?),
        _ => None,
    };
    SampleBlock::new(samples, seed, truth)
}

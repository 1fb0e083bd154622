//! Normalized Cramér-Rao lower bounds for the channel parameters, in both
//! non-data-aided (NDA) and data-aided (DA) form.
//!
//! The 2×2 Fisher information matrix in (μ, σ) coordinates has a closed-form
//! inverse whose entries depend on the SNR only through the deflation factor
//! f(γ); setting f = 0 recovers the data-aided bounds. Every parameter bound
//! is the quadratic form of its gradient against that inverse, normalized by
//! the squared parameter value.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::specfun::{fisher_deflation, j_function, q_function, QuadratureSpec};

/// Whether the transmitted symbols are treated as unknown (NDA) or known (DA).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundMode {
    Nda,
    Da,
}

impl BoundMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundMode::Nda => "nda",
            BoundMode::Da => "da",
        }
    }
}

/// Inverse Fisher information for N observations, in (μ, σ) coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherInverse {
    pub mode: BoundMode,
    pub mu_mu: f64,
    pub mu_sigma: f64,
    pub sigma_sigma: f64,
}

impl FisherInverse {
    /// Matrix entries as rows; the matrix is symmetric by construction.
    pub fn entries(&self) -> [[f64; 2]; 2] {
        [
            [self.mu_mu, self.mu_sigma],
            [self.mu_sigma, self.sigma_sigma],
        ]
    }

    /// Quadratic form gᵀ·J⁻¹·g of a gradient (∂g/∂μ, ∂g/∂σ).
    pub fn quadratic_form(&self, grad_mu: f64, grad_sigma: f64) -> f64 {
        grad_mu * grad_mu * self.mu_mu
            + 2.0 * grad_mu * grad_sigma * self.mu_sigma
            + grad_sigma * grad_sigma * self.sigma_sigma
    }
}

fn deflation_for(mode: BoundMode, gamma: f64, quad: &QuadratureSpec) -> Result<f64> {
    match mode {
        BoundMode::Nda => fisher_deflation(gamma, quad),
        BoundMode::Da => Ok(0.0),
    }
}

/// Closed-form inverse Fisher matrix:
/// J⁻¹ = σ²/(N·(2−2f−8γf)) · [[2−8γf, −√(8γ)f], [−√(8γ)f, 1−f]].
pub fn fisher_inverse(
    gamma: f64,
    sigma: f64,
    n: usize,
    mode: BoundMode,
    quad: &QuadratureSpec,
) -> Result<FisherInverse> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Fisher inverse requires finite gamma > 0, got {gamma}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Fisher inverse requires sigma > 0, got {sigma}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let f = deflation_for(mode, gamma, quad)?;
    let d = 2.0 - 2.0 * f - 8.0 * gamma * f;
    // Positive for every gamma > 0 since the Fisher matrix is positive
    // definite there; a violation would mean the deflation quadrature broke.
    assert!(d > 0.0, "Fisher denominator {d} not positive at gamma={gamma}");
    let c = sigma * sigma / (n as f64 * d);
    Ok(FisherInverse {
        mode,
        mu_mu: c * (2.0 - 8.0 * gamma * f),
        mu_sigma: -c * (8.0 * gamma).sqrt() * f,
        sigma_sigma: c * (1.0 - f),
    })
}

/// All normalized bounds at one (γ, N) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbBundle {
    pub gamma: f64,
    pub n: usize,
    pub mode: BoundMode,
    pub ncrlb_mu: f64,
    pub ncrlb_sigma: f64,
    pub ncrlb_gamma: f64,
    pub ncrlb_lambda: f64,
    pub ncrlb_ber: f64,
    pub ncrlb_mi: f64,
}

/// Normalized CRLBs for amplitude, noise std-dev, SNR, reliability constant,
/// BER, and mutual information.
///
/// The first five are closed forms in γ, N, and f(γ). The MI bound has no
/// closed derivative, so dJ(√(8γ))/dγ is taken by central finite difference
/// with the quadrature tolerance tightened to 1e-12 to keep differencing
/// noise below 1e-6.
pub fn ncrlb_bundle(gamma: f64, n: usize, mode: BoundMode, quad: &QuadratureSpec) -> Result<CrlbBundle> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bounds require finite gamma > 0, got {gamma}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    let f = deflation_for(mode, gamma, quad)?;
    let d = 2.0 - 2.0 * f - 8.0 * gamma * f;
    assert!(d > 0.0, "Fisher denominator {d} not positive at gamma={gamma}");
    let nf = n as f64;

    let ncrlb_mu = (1.0 - 4.0 * gamma * f) / (gamma * nf * d);
    let ncrlb_sigma = (1.0 - f) / (nf * d);
    let ncrlb_gamma = (4.0 + 4.0 * gamma - 4.0 * gamma * f) / (gamma * nf * d);
    let ncrlb_lambda = (1.0 + 4.0 * gamma) / (gamma * nf * d);

    let q = q_function((2.0 * gamma).sqrt());
    let ncrlb_ber = (-2.0 * gamma).exp() / (PI * nf * q * q) * (1.0 + gamma - gamma * f) / d;

    let tight = QuadratureSpec {
        abs_tol: 1e-12,
        rel_tol: 1e-12,
        ..*quad
    };
    let mi = j_function((8.0 * gamma).sqrt(), &tight)?;
    let step = (1e-5 * gamma.max(1e-3)).min(0.5 * gamma);
    let mi_hi = j_function((8.0 * (gamma + step)).sqrt(), &tight)?;
    let mi_lo = j_function((8.0 * (gamma - step)).sqrt(), &tight)?;
    let dmi = (mi_hi - mi_lo) / (2.0 * step);
    let ncrlb_mi = (dmi / mi) * (dmi / mi) * gamma * gamma * ncrlb_gamma;

    Ok(CrlbBundle {
        gamma,
        n,
        mode,
        ncrlb_mu,
        ncrlb_sigma,
        ncrlb_gamma,
        ncrlb_lambda,
        ncrlb_ber,
        ncrlb_mi,
    })
}

/// Normalized bound for an arbitrary function g(μ, σ) with value `delta`:
/// (1/δ²)·∇gᵀ·J⁻¹·∇g.
pub fn ncrlb_of_function(
    delta: f64,
    grad_mu: f64,
    grad_sigma: f64,
    fisher_inv: &FisherInverse,
) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter(
            "normalization value delta must be finite and non-zero".into(),
        ));
    }
    Ok(fisher_inv.quadratic_form(grad_mu, grad_sigma) / (delta * delta))
}

//! Blind channel-parameter estimation for BPSK over AWGN.
//!
//! Given only matched-filter observables y = μ·x + σ·w — no pilots, no
//! decoded symbols — this crate estimates the SNR and everything derived
//! from it: signal amplitude, noise variance, channel reliability constant,
//! symbol prior, and per-symbol soft metrics (LLR, instantaneous error
//! probability, instantaneous mutual information).
//!
//! What's inside:
//!
//! - [`model`]: channel parameterization and deterministic sample generation.
//! - [`specfun`]: the Gaussian Q-function, ten Brink's J-function, the
//!   Fisher deflation integral, and the absolute-moment ratio curve with its
//!   inverses.
//! - [`moments`]: sample and analytic moments.
//! - [`estimators`]: the five SNR estimators (CM, ML, MM, P2, AM), the
//!   likelihood surface, derived parameters, and soft metrics.
//! - [`crlb`]: normalized Cramér-Rao bounds, non-data-aided and data-aided.
//! - [`calibrate`]: Nelder-Mead simplex and the fit re-deriving the ratio
//!   approximation constants.
//! - [`harness`]: reproducible Monte Carlo NMSE/NB benchmarking with CSV
//!   output.
//!
//! All randomness flows through the counter-based generator in [`rng`], so
//! every result is a pure function of its seeds: reruns are byte-identical
//! regardless of thread count.

pub mod calibrate;
pub mod crlb;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod model;
pub mod moments;
pub mod rng;
pub mod specfun;

pub use error::{Error, Result};
pub use specfun::GAMMA_CAP;

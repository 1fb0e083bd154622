//! Deterministic Monte Carlo benchmark engine.
//!
//! A cell is one (SNR, block length) point evaluated over L independent
//! trials. Within a trial every requested estimator sees the same block, so
//! method comparisons are paired. Trial seeds are a keyed hash of
//! (master seed, SNR, block length, trial index); together with fixed-order
//! compensated aggregation this makes results byte-identical for any worker
//! count.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::crlb::{ncrlb_bundle, BoundMode};
use crate::error::{Error, Result};
use crate::estimators::{estimate_from_moments, ml_from_moments, EstimateOptions, Method, SnrEstimate};
use crate::model::{generate_block, ChannelParams, ParamSpec};
use crate::moments::{sample_moments, CompensatedSum};
use crate::rng::derive_key;
use crate::specfun::QuadratureSpec;

/// Exact header of the benchmark CSV.
pub const CSV_HEADER: &str =
    "snr_db,n,trials,method,nmse,nb,mean_gamma_hat,clamp_rate,ncrlb_nda,ncrlb_da";

/// One benchmark cell: an SNR/block-length point and its trial budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    pub gamma_db: f64,
    pub n: usize,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub prior_q: f64,
    pub ml_iters: usize,
}

impl CellConfig {
    /// Cell with the default prior (1/2) and ML iteration budget (10).
    pub fn new(gamma_db: f64, n: usize, trials: usize, methods: Vec<Method>, master_seed: u64) -> Self {
        Self {
            gamma_db,
            n,
            trials,
            methods,
            master_seed,
            prior_q: 0.5,
            ml_iters: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trial count must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("block length must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("method set is empty".into()));
        }
        if !self.gamma_db.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "SNR in dB must be finite, got {}",
                self.gamma_db
            )));
        }
        Ok(())
    }
}

/// Normalized mean squared error and normalized bias of a batch of SNR
/// estimates against the true linear SNR:
/// NMSE = (1/L)Σ(γ̂ⱼ−γ)²/γ², NB = (1/L)Σ(γ̂ⱼ−γ)/γ.
pub fn nmse_nb(estimates: &[f64], gamma_true: f64) -> Result<(f64, f64)> {
    if !(gamma_true > 0.0) || !gamma_true.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "true SNR must be finite and positive, got {gamma_true}"
        )));
    }
    if estimates.is_empty() {
        return Err(Error::InvalidParameter("no estimates to aggregate".into()));
    }
    let mut sq = CompensatedSum::new();
    let mut lin = CompensatedSum::new();
    for &g in estimates {
        let d = (g - gamma_true) / gamma_true;
        sq.add(d * d);
        lin.add(d);
    }
    let l = estimates.len() as f64;
    Ok((sq.total() / l, lin.total() / l))
}

/// Aggregated per-method statistics of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodStats {
    pub method: Method,
    pub nmse: f64,
    pub nb: f64,
    pub mean_gamma_hat: f64,
    /// Fraction of trials on which the estimate was floored or capped.
    pub clamp_rate: f64,
}

/// Results of one completed cell, with the SNR bounds attached for reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub gamma_db: f64,
    pub n: usize,
    pub trials: usize,
    pub stats: Vec<MethodStats>,
    /// Non-data-aided normalized SNR bound at this (γ, N).
    pub ncrlb_nda: f64,
    /// Data-aided normalized SNR bound at this (γ, N).
    pub ncrlb_da: f64,
}

/// Run one cell: generate a fresh block per trial, run every requested
/// estimator on that same block, and aggregate in trial order.
pub fn run_cell(config: &CellConfig) -> Result<CellResult> {
    config.validate()?;
    let params = ChannelParams::from_spec(
        ParamSpec::GammaDb {
            gamma_db: config.gamma_db,
            m2_scale: 1.0,
        },
        config.prior_q,
    )?;
    let gamma_true = params.gamma();
    let opts = EstimateOptions {
        max_iter: config.ml_iters,
        ..Default::default()
    };
    let cell_key = derive_key(
        derive_key(config.master_seed, config.gamma_db.to_bits()),
        config.n as u64,
    );

    let per_trial: Vec<Result<Vec<SnrEstimate>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = derive_key(cell_key, trial as u64);
            let block = generate_block(&params, config.n, seed)?;
            let moments = sample_moments(&block);
            config
                .methods
                .iter()
                .map(|&method| match method {
                    Method::Ml => Ok(ml_from_moments(&block, &moments, &opts).0),
                    _ => estimate_from_moments(&moments, method, &opts.constants),
                })
                .collect()
        })
        .collect();

    let mut trials: Vec<Vec<SnrEstimate>> = Vec::with_capacity(config.trials);
    for (index, outcome) in per_trial.into_iter().enumerate() {
        match outcome {
            Ok(estimates) => trials.push(estimates),
            Err(e) => {
                return Err(Error::CellTrial {
                    trial: index,
                    source: Box::new(e),
                })
            }
        }
    }

    let l = config.trials as f64;
    let stats = config
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let mut sq = CompensatedSum::new();
            let mut lin = CompensatedSum::new();
            let mut mean = CompensatedSum::new();
            let mut clamps = 0usize;
            for t in &trials {
                let est = &t[k];
                let d = (est.gamma_hat - gamma_true) / gamma_true;
                sq.add(d * d);
                lin.add(d);
                mean.add(est.gamma_hat);
                clamps += est.clamped as usize;
            }
            MethodStats {
                method,
                nmse: sq.total() / l,
                nb: lin.total() / l,
                mean_gamma_hat: mean.total() / l,
                clamp_rate: clamps as f64 / l,
            }
        })
        .collect();

    let quad = QuadratureSpec::default();
    let ncrlb_nda = ncrlb_bundle(gamma_true, config.n, BoundMode::Nda, &quad)?.ncrlb_gamma;
    let ncrlb_da = ncrlb_bundle(gamma_true, config.n, BoundMode::Da, &quad)?.ncrlb_gamma;

    Ok(CellResult {
        gamma_db: config.gamma_db,
        n: config.n,
        trials: config.trials,
        stats,
        ncrlb_nda,
        ncrlb_da,
    })
}

/// Outcome of one cell inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Completed(CellResult),
    Failed {
        gamma_db: f64,
        n: usize,
        message: String,
    },
}

/// An executed sweep: one outcome per requested cell, in request order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub outcomes: Vec<CellOutcome>,
}

/// One CSV data row: a (cell, method) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub snr_db: f64,
    pub n: usize,
    pub trials: usize,
    pub method: Method,
    pub nmse: f64,
    pub nb: f64,
    pub mean_gamma_hat: f64,
    pub clamp_rate: f64,
    pub ncrlb_nda: f64,
    pub ncrlb_da: f64,
}

/// Run every cell; per-cell failures are recorded and the remaining cells
/// still run.
pub fn run_sweep(configs: &[CellConfig]) -> Result<SweepReport> {
    if configs.is_empty() {
        return Err(Error::InvalidParameter("sweep has no cells".into()));
    }
    let outcomes = configs
        .iter()
        .map(|config| match run_cell(config) {
            Ok(result) => CellOutcome::Completed(result),
            Err(e) => CellOutcome::Failed {
                gamma_db: config.gamma_db,
                n: config.n,
                message: e.to_string(),
            },
        })
        .collect();
    Ok(SweepReport { outcomes })
}

impl SweepReport {
    pub fn any_failed(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| matches!(o, CellOutcome::Failed { .. }))
    }

    pub fn failures(&self) -> Vec<(f64, usize, &str)> {
        self.outcomes
            .iter()
            .filter_map(|o| match o {
                CellOutcome::Failed { gamma_db, n, message } => Some((*gamma_db, *n, message.as_str())),
                _ => None,
            })
            .collect()
    }

    /// Flatten completed cells into CSV rows, one per (cell, method).
    pub fn rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for outcome in &self.outcomes {
            let cell = match outcome {
                CellOutcome::Completed(c) => c,
                CellOutcome::Failed { .. } => continue,
            };
            for s in &cell.stats {
                rows.push(CsvRow {
                    snr_db: cell.gamma_db,
                    n: cell.n,
                    trials: cell.trials,
                    method: s.method,
                    nmse: s.nmse,
                    nb: s.nb,
                    mean_gamma_hat: s.mean_gamma_hat,
                    clamp_rate: s.clamp_rate,
                    ncrlb_nda: cell.ncrlb_nda,
                    ncrlb_da: cell.ncrlb_da,
                });
            }
        }
        rows
    }

    /// Serialize to CSV. Floats use the shortest representation that parses
    /// back to the identical value, so the output round-trips losslessly.
    /// An optional `# config:` provenance comment goes on top.
    pub fn to_csv(&self, config_comment: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(comment) = config_comment {
            let _ = writeln!(out, "# config: {comment}");
        }
        let _ = writeln!(out, "{CSV_HEADER}");
        for r in self.rows() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.snr_db,
                r.n,
                r.trials,
                r.method,
                r.nmse,
                r.nb,
                r.mean_gamma_hat,
                r.clamp_rate,
                r.ncrlb_nda,
                r.ncrlb_da
            );
        }
        out
    }
}

/// Parse a benchmark CSV produced by [`SweepReport::to_csv`] back into rows.
/// Comment lines are skipped; the header must match exactly.
pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != CSV_HEADER {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 10 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad float {s:?}"),
            })
        };
        let parse_u = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad count {s:?}"),
            })
        };
        rows.push(CsvRow {
            snr_db: parse_f(fields[0])?,
            n: parse_u(fields[1])?,
            trials: parse_u(fields[2])?,
            method: fields[3].parse()?,
            nmse: parse_f(fields[4])?,
            nb: parse_f(fields[5])?,
            mean_gamma_hat: parse_f(fields[6])?,
            clamp_rate: parse_f(fields[7])?,
            ncrlb_nda: parse_f(fields[8])?,
            ncrlb_da: parse_f(fields[9])?,
        });
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(rows)
}

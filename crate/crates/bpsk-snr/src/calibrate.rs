//! Derivative-free simplex minimizer and the fit that re-derives the
//! constants of the closed-form absolute-moment ratio approximation.

use crate::error::{Error, Result};
use crate::specfun::{am_ratio, AmFitConstants, AmRatioMethod};

/// Nelder-Mead tunables. Defaults are the standard coefficient set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Convergence threshold on the simplex diameter (infinity norm).
    pub x_tol: f64,
    /// Spread threshold under which an *initial* simplex counts as already
    /// converged and returns immediately.
    pub f_tol: f64,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 10_000,
            x_tol: 1e-9,
            f_tol: 1e-9,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

impl SimplexOptions {
    fn validate(&self, dim: usize) -> Result<()> {
        if !(self.reflection > 0.0)
            || !(self.expansion > 1.0)
            || !(self.contraction > 0.0 && self.contraction < 1.0)
            || !(self.shrink > 0.0 && self.shrink < 1.0)
        {
            return Err(Error::InvalidParameter(
                "simplex coefficients outside their admissible ranges".into(),
            ));
        }
        if !(self.x_tol > 0.0) || !(self.f_tol > 0.0) {
            return Err(Error::InvalidParameter(
                "simplex tolerances must be positive".into(),
            ));
        }
        if self.max_evals < dim + 1 {
            return Err(Error::InvalidParameter(format!(
                "evaluation budget {} below the {} needed for the initial simplex",
                self.max_evals,
                dim + 1
            )));
        }
        Ok(())
    }
}

/// Outcome of a simplex descent.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x_min: Vec<f64>,
    pub f_min: f64,
    pub evals: usize,
    /// False when the budget ran out first; `x_min` is then best-so-far.
    pub converged: bool,
}

/// Standard Nelder-Mead simplex descent. Deterministic given
/// (objective, x0, opts). The objective must be finite on the initial
/// simplex; later non-finite values are treated as +∞ and rejected.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> Result<SimplexResult> {
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty start point".into()));
    }
    opts.validate(dim)?;

    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus one vertex per coordinate, nudged by 5%
    // (absolute 2.5e-4 at zero).
    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    vertices.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * 1.05 } else { 2.5e-4 };
        vertices.push(v);
    }
    let mut values: Vec<f64> = Vec::with_capacity(dim + 1);
    for v in &vertices {
        let fv = eval(v, &mut evals);
        if !fv.is_finite() {
            return Err(Error::NonFiniteObjective {
                context: format!("initial simplex vertex {v:?}"),
            });
        }
        values.push(fv);
    }

    let mut first_check = true;
    loop {
        // Order best → worst (stable, so ties keep insertion order).
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let diameter = vertices
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&vertices[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        // Convergence is geometric: stop once the simplex has collapsed.
        // The objective spread alone cannot bound the solution error (a
        // simplex straddling a minimum symmetrically shows near-zero spread
        // while still far from it), so f_tol only short-circuits an initial
        // simplex that is already flat to within tolerance.
        let spread = values[worst] - values[best];
        let f_converged = first_check && spread <= opts.f_tol;
        first_check = false;
        if diameter <= opts.x_tol || f_converged {
            return Ok(SimplexResult {
                x_min: vertices[best].clone(),
                f_min: values[best],
                evals,
                converged: true,
            });
        }
        if evals >= opts.max_evals {
            return Ok(SimplexResult {
                x_min: vertices[best].clone(),
                f_min: values[best],
                evals,
                converged: false,
            });
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0f64; dim];
        for (i, v) in vertices.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let blend = |from: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
            from.iter()
                .zip(towards)
                .map(|(a, b)| a + t * (b - a))
                .collect()
        };

        // Reflection.
        let reflected = blend(&centroid, &vertices[worst], -opts.reflection);
        let f_reflected = eval(&reflected, &mut evals);

        if f_reflected < values[best] {
            // Expansion.
            let expanded = blend(&centroid, &reflected, opts.expansion);
            let f_expanded = eval(&expanded, &mut evals);
            if f_expanded < f_reflected {
                vertices[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                vertices[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[second_worst] {
            vertices[worst] = reflected;
            values[worst] = f_reflected;
        } else if f_reflected < values[worst] {
            // Outside contraction.
            let contracted = blend(&centroid, &reflected, opts.contraction);
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted <= f_reflected {
                vertices[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                shrink(&mut vertices, &mut values, best, opts.shrink, &mut eval, &mut evals);
            }
        } else {
            // Inside contraction.
            let contracted = blend(&centroid, &vertices[worst], opts.contraction);
            let f_contracted = eval(&contracted, &mut evals);
            if f_contracted < values[worst] {
                vertices[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                shrink(&mut vertices, &mut values, best, opts.shrink, &mut eval, &mut evals);
            }
        }
    }
}

fn shrink<E: FnMut(&[f64], &mut usize) -> f64>(
    vertices: &mut [Vec<f64>],
    values: &mut [f64],
    best: usize,
    factor: f64,
    eval: &mut E,
    evals: &mut usize,
) {
    let anchor = vertices[best].clone();
    for i in 0..vertices.len() {
        if i == best {
            continue;
        }
        for (x, a) in vertices[i].iter_mut().zip(&anchor) {
            *x = a + factor * (*x - a);
        }
        values[i] = eval(&vertices[i], evals);
    }
}

/// SNR abscissae used when fitting the ratio approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct FitGrid {
    gamma_points: Vec<f64>,
}

impl FitGrid {
    /// Strictly increasing positive SNR values; must be non-empty.
    pub fn new(gamma_points: Vec<f64>) -> Result<Self> {
        if gamma_points.is_empty() {
            return Err(Error::InvalidParameter("fit grid is empty".into()));
        }
        if gamma_points.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "fit grid values must be finite and positive".into(),
            ));
        }
        if gamma_points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "fit grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { gamma_points })
    }

    /// `count` log-spaced points covering [min, max].
    pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(min > 0.0) || !(max > min) {
            return Err(Error::InvalidParameter(format!(
                "log grid needs 0 < min < max and count >= 2, got [{min}, {max}] x {count}"
            )));
        }
        let (lo, hi) = (min.log10(), max.log10());
        let pts = (0..count)
            .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (count - 1) as f64))
            .collect();
        Self::new(pts)
    }

    pub fn points(&self) -> &[f64] {
        &self.gamma_points
    }

    pub fn len(&self) -> usize {
        self.gamma_points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for FitGrid {
    /// 200 log-spaced points over [1e-2, 1e2].
    fn default() -> Self {
        Self::log_spaced(1e-2, 1e2, 200).expect("default grid is valid")
    }
}

/// Result of re-deriving the ratio-approximation constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsFit {
    pub constants: AmFitConstants,
    /// Mean squared ratio-space residual over the grid.
    pub mse: f64,
    pub evals: usize,
    pub converged: bool,
    /// Fewer grid points than unknowns: the minimizer is non-unique.
    pub underdetermined: bool,
}

/// Penalty returned for inadmissible constant signs, keeping the simplex
/// inside the region where the approximation is monotone.
const SIGN_PENALTY: f64 = 1e6;

/// Fit (h1, h2, h3) by minimizing the mean squared difference between the
/// exact ratio curve and its closed-form approximation over `grid`, started
/// from the reference constants.
pub fn fit_am_constants(grid: &FitGrid, opts: &SimplexOptions) -> Result<ConstantsFit> {
    let targets: Vec<(f64, f64)> = grid
        .points()
        .iter()
        .map(|&g| (g, am_ratio(g, AmRatioMethod::Exact)))
        .collect();
    let objective = |x: &[f64]| -> f64 {
        let c = AmFitConstants {
            h1: x[0],
            h2: x[1],
            h3: x[2],
        };
        if !c.is_admissible() {
            return SIGN_PENALTY;
        }
        let mut acc = 0.0;
        for &(g, target) in &targets {
            let d = am_ratio(g, AmRatioMethod::Fitted(c)) - target;
            acc += d * d;
        }
        acc / targets.len() as f64
    };
    let start = AmFitConstants::REFERENCE;
    let result = nelder_mead(objective, &[start.h1, start.h2, start.h3], opts)?;
    let constants = AmFitConstants::new(result.x_min[0], result.x_min[1], result.x_min[2])?;
    Ok(ConstantsFit {
        constants,
        mse: result.f_min,
        evals: result.evals,
        converged: result.converged,
        underdetermined: grid.len() < 3,
    })
}

//! Least-squares fit of the six parameters to an empirical CCDF in log-log space,
//! with bootstrap standard errors.
//!
//! The objective is the mean squared difference of `log10` CCDFs on a log-spaced income
//! grid spanning the data. It is minimized by a Nelder-Mead simplex in log-parameter
//! space (positivity for free), restarted from jittered copies of a heuristic guess.

mod bootstrap;
mod guess;
mod nelder_mead;

use std::f64::consts::LN_10;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CcdfPoint, EmpiricalCcdf};
use crate::error::{Error, Result};
use crate::model::{log_grid, normalize, NormalizedModel, DEFAULT_QUAD_TOL};
use crate::params::{Params, PARAM_NAMES};

pub use bootstrap::{bootstrap_errors, bootstrap_errors_with, MIN_BOOTSTRAP_RESAMPLES};
pub use guess::{initial_guess, MIN_GUESS_POINTS};

pub const DEFAULT_TAIL_TRIM: usize = 20;

/// Box constraints, one positive interval per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lower: Params,
    pub upper: Params,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            lower: Params {
                t_low: 1.0,
                t_high: 1.0,
                m0: 1.0,
                m1: 1.0,
                alpha: 0.05,
                alpha1: 0.05,
            },
            upper: Params {
                t_low: 1e12,
                t_high: 1e12,
                m0: 1e12,
                m1: 1e12,
                alpha: 20.0,
                alpha1: 20.0,
            },
        }
    }
}

impl ParamBounds {
    pub fn validate(&self) -> Result<()> {
        self.lower
            .validate()
            .and_then(|_| self.upper.validate())
            .map_err(|e| Error::Config(format!("bounds must be positive: {e}")))?;
        let (lo, hi) = (self.lower.to_array(), self.upper.to_array());
        for ((name, l), h) in PARAM_NAMES.iter().zip(lo).zip(hi) {
            if !(l < h) {
                return Err(Error::Config(format!("empty bound interval for {name}: [{l}, {h}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &Params) -> bool {
        let (lo, hi, v) = (self.lower.to_array(), self.upper.to_array(), p.to_array());
        (0..6).all(|i| lo[i] <= v[i] && v[i] <= hi[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Points of the log-spaced grid the CCDFs are compared on.
    pub grid_points: usize,
    /// Fit five parameters with `T1 = m1` enforced.
    pub tie_t1_m1: bool,
    pub bounds: ParamBounds,
    pub restarts: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    /// Convergence threshold on the simplex diameter in log-parameter space.
    pub opt_tol: f64,
    pub quad_tol: f64,
    /// Objective evaluations allowed per simplex run.
    pub max_evaluations: usize,
    /// The comparison grid ends at the `tail_trim`-th largest income instead of the
    /// maximum, keeping the sparsest order statistics out of the objective.
    pub tail_trim: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            grid_points: 200,
            tie_t1_m1: false,
            bounds: ParamBounds::default(),
            restarts: 4,
            bootstrap_resamples: 200,
            seed: 0,
            opt_tol: 1e-6,
            quad_tol: DEFAULT_QUAD_TOL,
            max_evaluations: 4000,
            tail_trim: DEFAULT_TAIL_TRIM,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 10 {
            return Err(Error::Config(format!("grid_points must be >= 10, got {}", self.grid_points)));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if !(self.opt_tol > 0.0) {
            return Err(Error::Config(format!("opt_tol must be > 0, got {}", self.opt_tol)));
        }
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-6) {
            return Err(Error::Config(format!("quad_tol must be in (0, 1e-6], got {}", self.quad_tol)));
        }
        if self.max_evaluations < 10 {
            return Err(Error::Config("max_evaluations must be >= 10".into()));
        }
        self.bounds.validate()
    }
}

/// Per-parameter standard deviations, keyed like [`Params`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamErrors {
    #[serde(rename = "T")]
    pub t_low: f64,
    #[serde(rename = "T1")]
    pub t_high: f64,
    pub m0: f64,
    pub m1: f64,
    pub alpha: f64,
    pub alpha1: f64,
}

impl ParamErrors {
    pub fn to_array(self) -> [f64; 6] {
        [self.t_low, self.t_high, self.m0, self.m1, self.alpha, self.alpha1]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            t_low: v[0],
            t_high: v[1],
            m0: v[2],
            m1: v[3],
            alpha: v[4],
            alpha1: v[5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Parameters that ended on a bound.
    pub bound_saturated: Vec<String>,
    /// Best objective with a single law, `T1 = T` and `alpha1 = alpha` (then `m1` drops out).
    pub single_law_objective: f64,
    /// See [`ObjectiveGrid::noise_floor`].
    pub noise_floor: f64,
    /// The second branch improves on the single law by less than the noise floor:
    /// `m1` and the high-branch parameters are not identified.
    pub degenerate_ridge: bool,
    pub evaluations: usize,
    /// Income range covered by the comparison grid.
    pub grid_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Params,
    /// Bootstrap standard deviations, when computed.
    pub errors: Option<ParamErrors>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
    pub diagnostics: FitDiagnostics,
    pub config: FitConfig,
}

/// The empirical side of the objective, precomputed once per CCDF.
#[derive(Debug, Clone)]
pub struct ObjectiveGrid {
    grid: Vec<f64>,
    target: Vec<f64>,
    noise_floor: f64,
}

impl ObjectiveGrid {
    /// Log-spaced grid from the smallest positive income to the `tail_trim`-th largest
    /// (`1` is the maximum), with the empirical CCDF interpolated linearly in `(ln m, ln p)`.
    pub fn new(ccdf: &EmpiricalCcdf, grid_points: usize, tail_trim: usize) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::Config("objective grid needs at least 2 points".into()));
        }
        let pts = positive_points(ccdf);
        if pts.is_empty() {
            return Err(Error::InsufficientData("no positive incomes in the CCDF".into()));
        }
        let top = pts[pts.len() - tail_trim.clamp(1, pts.len())].m;
        let grid = log_grid(pts[0].m, top, grid_points);
        let target: Vec<f64> = grid.iter().map(|&m| interpolate_ln_p(pts, m) / LN_10).collect();
        // The smallest Weibull position is 1/(n+1), weighted or not.
        let n = 1.0 / ccdf.points()[ccdf.len() - 1].p - 1.0;
        let noise_floor = target
            .iter()
            .map(|t| {
                let p = 10f64.powf(*t);
                (1.0 - p) / (n * p * LN_10 * LN_10)
            })
            .sum::<f64>()
            / grid.len() as f64;
        Ok(Self {
            grid,
            target,
            noise_floor,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Interpolated empirical `log10 p` at each grid point.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Expected objective of the true law from binomial sampling noise alone,
    /// `mean (1 - p) / (n p ln(10)^2)` over the grid.
    pub fn noise_floor(&self) -> f64 {
        self.noise_floor
    }

    pub fn evaluate(&self, model: &NormalizedModel) -> Result<f64> {
        let ccdf = model.ccdf_grid(&self.grid)?;
        let sum: f64 = ccdf
            .iter()
            .zip(&self.target)
            .map(|(c, t)| (c.log10() - t).powi(2))
            .sum();
        Ok(sum / self.grid.len() as f64)
    }

    fn evaluate_params(&self, params: &Params, quad_tol: f64) -> f64 {
        normalize(*params, quad_tol)
            .and_then(|m| self.evaluate(&m))
            .unwrap_or(f64::INFINITY)
    }
}

fn positive_points(ccdf: &EmpiricalCcdf) -> &[CcdfPoint] {
    let pts = ccdf.points();
    let first = pts.partition_point(|q| q.m <= 0.0);
    &pts[first..]
}

/// `ln p` at `m`, linear in `ln m` between neighbouring points and flat outside.
pub(crate) fn interpolate_ln_p(pts: &[CcdfPoint], m: f64) -> f64 {
    let i = pts.partition_point(|q| q.m < m);
    if i == 0 {
        return pts[0].p.ln();
    }
    if i == pts.len() {
        return pts[i - 1].p.ln();
    }
    let (a, b) = (pts[i - 1], pts[i]);
    if b.m == m {
        return b.p.ln();
    }
    let t = (m.ln() - a.m.ln()) / (b.m.ln() - a.m.ln());
    a.p.ln() + t * (b.p.ln() - a.p.ln())
}

/// Mean squared `log10` CCDF error of `params` against `ccdf` on `grid_points` points,
/// with the default tail trim.
pub fn objective(params: &Params, ccdf: &EmpiricalCcdf, grid_points: usize) -> Result<f64> {
    let model = normalize(*params, DEFAULT_QUAD_TOL)?;
    ObjectiveGrid::new(ccdf, grid_points, DEFAULT_TAIL_TRIM)?.evaluate(&model)
}

/// Maps parameters to the optimizer's log coordinates; with the tie, `T1` is dropped.
#[derive(Debug, Clone, Copy)]
struct Space {
    tie: bool,
}

impl Space {
    fn to_x(self, p: &Params) -> Vec<f64> {
        let v = p.to_array();
        let idx: &[usize] = if self.tie { &[0, 2, 3, 4, 5] } else { &[0, 1, 2, 3, 4, 5] };
        idx.iter().map(|&i| v[i].ln()).collect()
    }

    fn to_params(self, x: &[f64]) -> Params {
        let e: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        if self.tie {
            Params::from_array([e[0], e[2], e[1], e[2], e[3], e[4]])
        } else {
            Params::from_array([e[0], e[1], e[2], e[3], e[4], e[5]])
        }
    }

    fn bounds(self, b: &ParamBounds) -> (Vec<f64>, Vec<f64>) {
        let mut lo = b.lower;
        let mut hi = b.upper;
        if self.tie {
            lo.m1 = lo.m1.max(lo.t_high);
            hi.m1 = hi.m1.min(hi.t_high);
        }
        (self.to_x(&lo), self.to_x(&hi))
    }
}

#[derive(Debug, Clone)]
struct Run {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
}

/// Two simplex passes: a coarse one from `x0`, then a fresh small simplex at its result.
fn descend<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], lower: &[f64], upper: &[f64], config: &FitConfig) -> Run {
    let mut run = Run {
        x: x0.to_vec(),
        value: f64::INFINITY,
        iterations: 0,
        evaluations: 0,
        converged: false,
    };
    for step in [0.2, 0.02] {
        let out = nelder_mead::minimize(
            f,
            &run.x,
            lower,
            upper,
            nelder_mead::Options {
                tol: config.opt_tol,
                max_evaluations: config.max_evaluations,
                initial_step: step,
            },
        );
        run = Run {
            x: out.x,
            value: out.value,
            iterations: run.iterations + out.iterations,
            evaluations: run.evaluations + out.evaluations,
            converged: out.converged,
        };
    }
    run
}

/// Fits `ccdf` from [`initial_guess`] and `config.restarts - 1` jittered copies of it.
pub fn fit(ccdf: &EmpiricalCcdf, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let guess = initial_guess(ccdf)?;
    fit_from(ccdf, config, &guess, config.restarts)
}

/// Single simplex descent from `start`, without restarts.
pub fn refine(ccdf: &EmpiricalCcdf, config: &FitConfig, start: &Params) -> Result<FitResult> {
    config.validate()?;
    fit_from(ccdf, config, start, 1)
}

fn fit_from(ccdf: &EmpiricalCcdf, config: &FitConfig, start: &Params, restarts: usize) -> Result<FitResult> {
    start.validate()?;
    let grid = ObjectiveGrid::new(ccdf, config.grid_points, config.tail_trim)?;
    let space = Space { tie: config.tie_t1_m1 };
    let (lower, upper) = space.bounds(&config.bounds);
    let f = |x: &[f64]| grid.evaluate_params(&space.to_params(x), config.quad_tol);

    let mut x0 = space.to_x(start);
    if config.tie_t1_m1 {
        // the tie replaces a free T1 by m1
        x0 = space.to_x(&Params { t_high: start.m1, ..*start });
    }
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut x = x0.clone();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(k as u64);
                for v in &mut x {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += 0.3 * z;
                }
            }
            descend(&f, &x, &lower, &upper, config)
        })
        .collect();

    let evaluations: usize = runs.iter().map(|r| r.evaluations).sum();
    let mut best = runs
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one restart");
    let mut extra_evaluations = 0;
    if !best.converged && best.value.is_finite() {
        let polish = descend(&f, &best.x, &lower, &upper, config);
        extra_evaluations = polish.evaluations;
        if polish.value <= best.value {
            best = Run {
                iterations: best.iterations + polish.iterations,
                ..polish
            };
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Domain("objective is not finite anywhere the fit searched".into()));
    }

    let params = space.to_params(&best.x);
    let saturated = bound_saturation(space, &best.x, &lower, &upper);
    let single = single_law(&grid, config, &params);

    Ok(FitResult {
        params,
        errors: None,
        objective: best.value,
        iterations: best.iterations,
        converged: best.converged,
        restarts_used: restarts,
        diagnostics: FitDiagnostics {
            bound_saturated: saturated,
            single_law_objective: single.value,
            noise_floor: grid.noise_floor,
            degenerate_ridge: single.value - best.value < grid.noise_floor,
            evaluations: evaluations + extra_evaluations + single.evaluations,
            grid_range: (grid.grid[0], grid.grid[grid.grid.len() - 1]),
        },
        config: config.clone(),
    })
}

/// Refits `(T, m0, alpha)` with the high branch collapsed onto the low one.
fn single_law(grid: &ObjectiveGrid, config: &FitConfig, fitted: &Params) -> Run {
    let collapse = |x: &[f64]| Params {
        t_low: x[0].exp(),
        t_high: x[0].exp(),
        m0: x[1].exp(),
        m1: fitted.m1,
        alpha: x[2].exp(),
        alpha1: x[2].exp(),
    };
    let (lo, hi) = (&config.bounds.lower, &config.bounds.upper);
    let lower = [lo.t_low.max(lo.t_high).ln(), lo.m0.ln(), lo.alpha.max(lo.alpha1).ln()];
    let upper = [hi.t_low.min(hi.t_high).ln(), hi.m0.ln(), hi.alpha.min(hi.alpha1).ln()];
    let x0 = [fitted.t_low.ln(), fitted.m0.ln(), fitted.alpha.ln()];
    if lower.iter().zip(&upper).any(|(l, h)| l > h) {
        // bounds leave no room for a single law
        return Run {
            x: x0.to_vec(),
            value: f64::INFINITY,
            iterations: 0,
            evaluations: 0,
            converged: false,
        };
    }
    let f = |x: &[f64]| grid.evaluate_params(&collapse(x), config.quad_tol);
    descend(&f, &x0, &lower, &upper, config)
}

fn bound_saturation(space: Space, x: &[f64], lower: &[f64], upper: &[f64]) -> Vec<String> {
    let names: &[&str] = if space.tie {
        &["T", "m0", "m1", "alpha", "alpha1"]
    } else {
        &PARAM_NAMES
    };
    names
        .iter()
        .zip(x)
        .zip(lower.iter().zip(upper))
        .filter(|((_, v), (lo, hi))| (**v - **lo) < 1e-6 || (**hi - **v) < 1e-6)
        .map(|((n, _), _)| n.to_string())
        .collect()
}

//! Kalman ODE filter on a fixed grid.
//!
//! The state of a `d`-dimensional problem is stored as a `(q+1)×d` mean
//! (column `j` holds `x_j, x_j', …, x_j^(q)`) and a single `(q+1)×(q+1)`
//! covariance. Transition, measurement model and initial covariance are the
//! same for every dimension, so all `d` Kalman gains coincide and one
//! covariance suffices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::priors::{StateSpacePrior, TransitionPair};
use crate::problems::IVProblem;

/// Innovation variances at or below this are treated as zero.
pub const INNOVATION_FLOOR: f64 = 1e-14;
/// Largest residual tolerated when the innovation variance vanishes.
pub const DEGENERATE_RESIDUAL_TOL: f64 = 1e-8;

const GRID_TOL: f64 = 0.5e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub t: f64,
    /// `(q+1)×d`.
    pub mean: DMatrix<f64>,
    /// `(q+1)×(q+1)`, shared by all dimensions.
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    /// The solution estimate, row 0 of the mean.
    pub fn solution(&self) -> DVector<f64> {
        self.mean.row(0).transpose()
    }

    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }
}

/// Observes the first derivative coordinate with scalar noise variance `R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    r: f64,
}

impl MeasurementModel {
    /// Index of the observed coordinate (`H = e₁ᵀ`).
    pub const OBSERVED: usize = 1;

    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid(
                "R",
                format!("noise variance must be >= 0, got {r}"),
            ));
        }
        Ok(Self { r })
    }

    pub fn exact() -> Self {
        Self { r: 0.0 }
    }

    pub fn noise(&self) -> f64 {
        self.r
    }

    /// The row vector `H`.
    pub fn selector(&self, state_len: usize) -> DVector<f64> {
        let mut h = DVector::zeros(state_len);
        h[Self::OBSERVED] = 1.0;
        h
    }
}

/// How the posterior covariance is formed from the gain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceUpdate {
    /// `P = P⁻ − K S Kᵀ`.
    #[default]
    Standard,
    /// `P = (I − K H) P⁻ (I − K H)ᵀ + K R Kᵀ`.
    Joseph,
}

/// Exact measurement inconsistent with a vanishing innovation variance.
#[derive(Clone, Copy, Debug, PartialEq, Error)]
#[error("innovation variance {s:e} with residual {residual:e}")]
pub struct Divergence {
    pub s: f64,
    pub residual: f64,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Mean `(x₀, f(0, x₀), 0, …, 0)` per dimension; covariance zero except the
/// `{1..q}×{1..q}` block, which is `p0_scale·I`.
pub fn initialize(problem: &IVProblem, q: usize, p0_scale: f64) -> Result<GaussianState> {
    if q == 0 {
        return Err(Error::invalid("q", "must be at least 1"));
    }
    if !(p0_scale >= 0.0 && p0_scale.is_finite()) {
        return Err(Error::invalid(
            "p0_scale",
            format!("must be >= 0, got {p0_scale}"),
        ));
    }
    let d = problem.dim();
    let x0 = problem.x0();
    let f0 = problem.eval(0.0, x0);
    let mut mean = DMatrix::zeros(q + 1, d);
    mean.row_mut(0).copy_from(&x0.transpose());
    mean.row_mut(1).copy_from(&f0.transpose());
    let mut cov = DMatrix::zeros(q + 1, q + 1);
    for i in 1..=q {
        cov[(i, i)] = p0_scale;
    }
    Ok(GaussianState { t: 0.0, mean, cov })
}

pub fn predict(state: &GaussianState, tp: &TransitionPair) -> GaussianState {
    let a = &tp.transition;
    let cov = a * &state.cov * a.transpose() + &tp.process_noise;
    GaussianState {
        t: state.t + tp.h,
        mean: a * &state.mean,
        cov: symmetrize(&cov),
    }
}

/// Conditions the prediction on `z = H X + r` for every dimension at once.
///
/// With a vanishing innovation variance the update is skipped when the
/// residuals are negligible and reported as [`Divergence`] otherwise.
pub fn update(
    pred: &GaussianState,
    z: &DVector<f64>,
    mm: &MeasurementModel,
    method: CovarianceUpdate,
) -> std::result::Result<GaussianState, Divergence> {
    let obs = MeasurementModel::OBSERVED;
    let residual = z - pred.mean.row(obs).transpose();
    let s = pred.cov[(obs, obs)] + mm.r;

    if s <= INNOVATION_FLOOR {
        let worst = residual.amax();
        if worst > DEGENERATE_RESIDUAL_TOL {
            return Err(Divergence { s, residual: worst });
        }
        return Ok(pred.clone());
    }

    let gain: DVector<f64> = pred.cov.column(obs) / s;
    let mean = &pred.mean + &gain * residual.transpose();
    let cov = match method {
        CovarianceUpdate::Standard => &pred.cov - &gain * gain.transpose() * s,
        CovarianceUpdate::Joseph => {
            let n = pred.cov.nrows();
            let mut ikh = DMatrix::identity(n, n);
            for i in 0..n {
                ikh[(i, obs)] -= gain[i];
            }
            &ikh * &pred.cov * ikh.transpose() + &gain * gain.transpose() * mm.r
        }
    };
    Ok(GaussianState {
        t: pred.t,
        mean,
        cov: symmetrize(&cov),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub h: f64,
    pub r: f64,
    pub p0_scale: f64,
    pub covariance_update: CovarianceUpdate,
}

impl SolverOptions {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            r: 0.0,
            p0_scale: 1.0,
            covariance_update: CovarianceUpdate::Standard,
        }
    }
}

/// Filtering distributions on the grid `t_n = n h`, `n = 0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterTrajectory {
    pub prior: StateSpacePrior,
    pub h: f64,
    pub r: f64,
    pub states: Vec<GaussianState>,
}

impl FilterTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn dim(&self) -> usize {
        self.states[0].mean.ncols()
    }

    pub fn state_len(&self) -> usize {
        self.states[0].mean.nrows()
    }

    /// Estimate of solution component `j` along the grid.
    pub fn solution_component(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.mean[(0, j)]).collect()
    }
}

/// Number of steps `N` with `N h = T`, rejecting grids that miss `T`.
pub fn grid_steps(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(
            "h",
            format!("step size must be positive, got {h}"),
        ));
    }
    let ratio = t_end / h;
    let n = ratio.round();
    if (ratio - n).abs() > GRID_TOL || n < 1.0 {
        return Err(Error::invalid(
            "h",
            format!("T = {t_end} is not an integer multiple of h = {h}"),
        ));
    }
    Ok(n as usize)
}

pub fn solve_ivp(
    problem: &IVProblem,
    prior: &StateSpacePrior,
    h: f64,
    r: f64,
) -> Result<FilterTrajectory> {
    let opts = SolverOptions {
        r,
        ..SolverOptions::new(h)
    };
    solve_ivp_with(problem, prior, &opts)
}

pub fn solve_ivp_with(
    problem: &IVProblem,
    prior: &StateSpacePrior,
    opts: &SolverOptions,
) -> Result<FilterTrajectory> {
    let n_steps = grid_steps(problem.t_end(), opts.h)?;
    let mm = MeasurementModel::new(opts.r)?;
    let tp = prior.transition(opts.h)?;

    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(initialize(problem, prior.q(), opts.p0_scale)?);
    for n in 1..=n_steps {
        let t = n as f64 * opts.h;
        let mut pred = predict(&states[n - 1], &tp);
        pred.t = t;
        let x_pred = pred.solution();
        let z = problem.eval(t, &x_pred);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField {
                t,
                input: x_pred.as_slice().to_vec(),
            });
        }
        let post = update(&pred, &z, &mm, opts.covariance_update).map_err(|d| {
            Error::FilterDivergence {
                step: n,
                t,
                s: d.s,
                residual: d.residual,
            }
        })?;
        states.push(post);
    }
    Ok(FilterTrajectory {
        prior: *prior,
        h: opts.h,
        r: opts.r,
        states,
    })
}

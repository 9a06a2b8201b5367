//! Error metrics, local convergence order, integrated-process variances and
//! exact prior sampling.
//!
//! The variance formulas here take a *positive* mean-reversion rate
//! `theta_pos > 0` (drift `−theta_pos·X`), whereas [`crate::priors`] stores
//! the signed drift entry `θ < 0`. Convert with `theta = -theta_pos`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterTrajectory;
use crate::priors::StateSpacePrior;
use crate::problems::{IVProblem, ReferenceTrajectory};

/// Errors below this are excluded from order fits.
pub const ORDER_FIT_FLOOR: f64 = 1e-14;

const TIME_MATCH_TOL: f64 = 1e-9;

/// Per-dimension errors of the solution estimate (mean row 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub max_abs: Vec<f64>,
    pub rmse: Vec<f64>,
    pub terminal: Vec<f64>,
}

impl ErrorReport {
    /// Largest max-abs error over the given components.
    pub fn max_abs_over(&self, components: &[usize]) -> f64 {
        components
            .iter()
            .map(|&j| self.max_abs[j])
            .fold(0.0, f64::max)
    }
}

pub fn error_report(
    traj: &FilterTrajectory,
    reference: &ReferenceTrajectory,
) -> Result<ErrorReport> {
    if traj.states.len() != reference.len() {
        return Err(Error::GridMismatch(format!(
            "filter has {} points, reference has {}",
            traj.states.len(),
            reference.len()
        )));
    }
    let d = traj.dim();
    let mut max_abs = vec![0.0; d];
    let mut sq = vec![0.0; d];
    let mut terminal = vec![0.0; d];
    for (state, (&t, x)) in traj
        .states
        .iter()
        .zip(reference.times.iter().zip(&reference.states))
    {
        if (state.t - t).abs() > TIME_MATCH_TOL {
            return Err(Error::GridMismatch(format!(
                "filter time {} against reference time {t}",
                state.t
            )));
        }
        if x.len() != d {
            return Err(Error::GridMismatch(format!(
                "reference dimension {} against filter dimension {d}",
                x.len()
            )));
        }
        for j in 0..d {
            let e = (state.mean[(0, j)] - x[j]).abs();
            max_abs[j] = f64::max(max_abs[j], e);
            sq[j] += e * e;
            terminal[j] = e;
        }
    }
    let n = reference.len() as f64;
    Ok(ErrorReport {
        max_abs,
        rmse: sq.into_iter().map(|s| (s / n).sqrt()).collect(),
        terminal,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OrderFit {
    /// Every one-step error vanished; no fit is possible or needed.
    Exact,
    /// Least-squares line through `(ln h, ln error)`.
    Fitted { slope: f64, intercept: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub step_sizes: Vec<f64>,
    pub errors: Vec<f64>,
    pub fit: OrderFit,
}

impl OrderEstimate {
    pub fn slope(&self) -> Option<f64> {
        match self.fit {
            OrderFit::Fitted { slope, .. } => Some(slope),
            OrderFit::Exact => None,
        }
    }
}

/// Error of a single prediction step from the Taylor-exact state
/// `(x(0), x'(0), …, x^(q)(0))`, for each step size in `hs`.
pub fn local_order_estimate(
    prior: &StateSpacePrior,
    problem: &IVProblem,
    hs: &[f64],
) -> Result<OrderEstimate> {
    if hs.len() < 4 {
        return Err(Error::invalid(
            "hs",
            format!("need at least 4 step sizes, got {}", hs.len()),
        ));
    }
    if hs.iter().any(|&h| !(h > 0.0 && h <= 0.5)) {
        return Err(Error::invalid("hs", "step sizes must lie in (0, 0.5]"));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(
            "hs",
            "step sizes must be strictly decreasing",
        ));
    }
    if !problem.has_analytic() {
        return Err(Error::NoAnalyticSolution(problem.name().to_string()));
    }

    let q = prior.q();
    let d = problem.dim();
    let mut start = DMatrix::zeros(q + 1, d);
    for k in 0..=q {
        let dk = problem.exact_derivative(k, 0.0).expect("checked above");
        start.row_mut(k).copy_from(&dk.transpose());
    }

    let mut errors = Vec::with_capacity(hs.len());
    for &h in hs {
        let tp = prior.transition(h)?;
        let predicted: DVector<f64> = (&tp.transition * &start).row(0).transpose();
        let exact = problem.exact_derivative(0, h).expect("checked above");
        errors.push((predicted - exact).norm());
    }

    let points: Vec<(f64, f64)> = hs
        .iter()
        .zip(&errors)
        .filter(|(_, &e)| e >= ORDER_FIT_FLOOR)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let fit = if points.is_empty() {
        OrderFit::Exact
    } else if points.len() < 2 {
        return Err(Error::invalid(
            "hs",
            "fewer than two step sizes give errors above the fit floor",
        ));
    } else {
        let (slope, intercept) = least_squares_line(&points);
        OrderFit::Fitted { slope, intercept }
    };
    Ok(OrderEstimate {
        step_sizes: hs.to_vec(),
        errors,
        fit,
    })
}

fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `Var(∫₀ᵀ X_s ds)` for a zero-started OU process with drift `−theta_pos·X`:
/// `σ²/(2θ³) (2θT + 2(e^(−θT) − 1) − (1 − e^(−θT))²)`.
pub fn iou_integral_variance(theta_pos: f64, sigma2: f64, t_end: f64) -> Result<f64> {
    if !(theta_pos > 0.0 && theta_pos.is_finite()) {
        return Err(Error::invalid(
            "theta_pos",
            format!("must be positive, got {theta_pos}"),
        ));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(
            "T",
            format!("must be positive, got {t_end}"),
        ));
    }
    let x = theta_pos * t_end;
    // e^(−x) − 1 via expm1 keeps the small-x cancellation harmless
    let em1 = (-x).exp_m1();
    Ok(sigma2 / (2.0 * theta_pos.powi(3)) * (2.0 * x + 2.0 * em1 - em1 * em1))
}

/// `Var(∫₀ᵀ W_s ds) = σ² T³ / 3`.
pub fn wiener_integral_variance(sigma2: f64, t_end: f64) -> f64 {
    sigma2 * t_end.powi(3) / 3.0
}

/// Exact prior draws on the grid `t_k = k h`, all started at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorSamples {
    pub times: Vec<f64>,
    /// One `(n_steps+1)×(q+1)` matrix per path; row `k` is the state at `t_k`.
    pub paths: Vec<DMatrix<f64>>,
}

impl PriorSamples {
    /// Values of one state coordinate at the final time, one per path.
    pub fn terminal(&self, coord: usize) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| p[(p.nrows() - 1, coord)])
            .collect()
    }
}

/// Lower factor `G` with `G Gᵀ = Q`, falling back to an eigenvalue-clipped
/// square root when Cholesky rejects `Q`.
fn noise_factor(q: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = Cholesky::new(q.clone()) {
        return ch.l();
    }
    let eig = SymmetricEigen::new(q.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots)
}

/// Draws `x_{k+1} ~ N(A x_k, Q)` from `x_0 = 0`.
///
/// Path `i` is driven by a ChaCha8 stream keyed on `(seed, i)`, so any path
/// can be regenerated independently of the others.
pub fn sample_prior(
    prior: &StateSpacePrior,
    h: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PriorSamples> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "need at least one path"));
    }
    let tp = prior.transition(h)?;
    let factor = noise_factor(&tp.process_noise);
    let n = prior.state_len();

    let paths = (0..n_paths)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut path = DMatrix::zeros(n_steps + 1, n);
            let mut x = DVector::zeros(n);
            for k in 1..=n_steps {
                let xi = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                x = &tp.transition * x + &factor * xi;
                path.row_mut(k).copy_from(&x.transpose());
            }
            path
        })
        .collect();
    Ok(PriorSamples {
        times: (0..=n_steps).map(|k| k as f64 * h).collect(),
        paths,
    })
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Smallest eigenvalue of the symmetrized matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

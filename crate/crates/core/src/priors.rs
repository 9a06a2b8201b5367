//! Gauss–Markov priors for the solution and its first `q` derivatives.
//!
//! Both priors share the drift structure
//!
//! ```text
//!     | 0 1 0 ... 0 |        | 0 |
//!     | 0 0 1 ... 0 |        | . |
//! F = |     ...     |,   L = | 0 |
//!     | 0 0 ... 0 1 |        | σ |
//!     | 0 0 ... 0 θ |
//! ```
//!
//! with `θ = 0` for the q-times integrated Wiener process (IWP) and `θ < 0`
//! for the q-times integrated Ornstein–Uhlenbeck process (IOUP). The exact
//! discretization over a step `h` is `A(h) = exp(F h)` and
//! `Q(h) = ∫₀ʰ exp(Fτ) L Lᵀ exp(Fτ)ᵀ dτ`; closed forms are given for both
//! priors and [`quadrature_transition`] evaluates the same integrals
//! numerically for any drift.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which process drives the `q`-th derivative coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    /// Wiener process (integrated `q` times).
    Iwp,
    /// Mean-reverting Ornstein–Uhlenbeck process (integrated `q` times).
    Ioup,
}

impl PriorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PriorKind::Iwp => "iwp",
            PriorKind::Ioup => "ioup",
        }
    }
}

impl std::fmt::Display for PriorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Continuous-time prior `dX = F X dt + L dW` over `(x, x', …, x^(q))`.
///
/// `theta` follows the mean-reverting convention `θ < 0`; it is stored as
/// `0.0` for [`PriorKind::Iwp`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpacePrior {
    q: usize,
    kind: PriorKind,
    theta: f64,
    sigma2: f64,
}

impl StateSpacePrior {
    pub fn iwp(q: usize, sigma2: f64) -> Result<Self> {
        check_order(q)?;
        check_sigma2(sigma2)?;
        Ok(Self {
            q,
            kind: PriorKind::Iwp,
            theta: 0.0,
            sigma2,
        })
    }

    pub fn ioup(q: usize, theta: f64, sigma2: f64) -> Result<Self> {
        check_order(q)?;
        check_theta(theta)?;
        check_sigma2(sigma2)?;
        Ok(Self {
            q,
            kind: PriorKind::Ioup,
            theta,
            sigma2,
        })
    }

    /// Builds a prior of the given kind; `theta` is ignored for IWP.
    pub fn new(kind: PriorKind, q: usize, theta: f64, sigma2: f64) -> Result<Self> {
        match kind {
            PriorKind::Iwp => Self::iwp(q, sigma2),
            PriorKind::Ioup => Self::ioup(q, theta, sigma2),
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Number of state coordinates per ODE dimension, `q + 1`.
    pub fn state_len(&self) -> usize {
        self.q + 1
    }

    pub fn drift_and_diffusion(&self) -> (DMatrix<f64>, DVector<f64>) {
        drift_and_diffusion(self)
    }

    /// Exact one-step discretization over step `h`.
    pub fn transition(&self, h: f64) -> Result<TransitionPair> {
        match self.kind {
            PriorKind::Iwp => iwp_transition(self.q, h, self.sigma2),
            PriorKind::Ioup => ioup_transition(self.q, h, self.theta, self.sigma2),
        }
    }
}

fn check_order(q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::invalid("q", "must be at least 1"));
    }
    Ok(())
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(
            "sigma2",
            format!("must be positive and finite, got {sigma2}"),
        ));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta < 0.0 && theta.is_finite()) {
        return Err(Error::invalid(
            "theta",
            format!("must be negative and finite, got {theta}"),
        ));
    }
    Ok(())
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(
            "h",
            format!("step size must be positive, got {h}"),
        ));
    }
    Ok(())
}

/// Discretized dynamics `x_{n+1} ~ N(A x_n, Q)` over a fixed step.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionPair {
    /// Mean map `A(h)`.
    pub transition: DMatrix<f64>,
    /// Process-noise covariance `Q(h)`.
    pub process_noise: DMatrix<f64>,
    pub h: f64,
}

impl TransitionPair {
    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }
}

/// Drift matrix `F` and diffusion vector `L = (0, …, 0, σ)ᵀ`.
pub fn drift_and_diffusion(prior: &StateSpacePrior) -> (DMatrix<f64>, DVector<f64>) {
    let n = prior.q + 1;
    let mut drift = DMatrix::zeros(n, n);
    for i in 0..prior.q {
        drift[(i, i + 1)] = 1.0;
    }
    if prior.kind == PriorKind::Ioup {
        drift[(prior.q, prior.q)] = prior.theta;
    }
    let mut diffusion = DVector::zeros(n);
    diffusion[prior.q] = prior.sigma2.sqrt();
    (drift, diffusion)
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Closed-form IWP discretization:
/// `A_ij = 1{j≥i} h^(j−i)/(j−i)!` and
/// `Q_ij = σ² h^(2q+1−i−j) / ((2q+1−i−j)(q−i)!(q−j)!)`.
pub fn iwp_transition(q: usize, h: f64, sigma2: f64) -> Result<TransitionPair> {
    check_order(q)?;
    check_step(h)?;
    check_sigma2(sigma2)?;
    let n = q + 1;
    let transition = DMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            h.powi((j - i) as i32) / factorial(j - i)
        } else {
            0.0
        }
    });
    let process_noise = DMatrix::from_fn(n, n, |i, j| {
        let p = 2 * q + 1 - i - j;
        sigma2 * h.powi(p as i32) / (p as f64 * factorial(q - i) * factorial(q - j))
    });
    Ok(TransitionPair {
        transition,
        process_noise,
        h,
    })
}

/// Closed-form IOUP discretization for `θ < 0`.
///
/// Columns `j < q` of `A` coincide with the IWP polynomial entries; column `q`
/// holds `θ^(i−q) (e^(θh) − Σ_{k<q−i} (θh)^k/k!)`. For `|θh| < 1` the
/// remainders are evaluated as their convergent tail series, so the
/// `θ → 0` limit recovers the IWP entries to working precision.
pub fn ioup_transition(q: usize, h: f64, theta: f64, sigma2: f64) -> Result<TransitionPair> {
    check_order(q)?;
    check_step(h)?;
    check_theta(theta)?;
    check_sigma2(sigma2)?;
    let n = q + 1;
    let transition = DMatrix::from_fn(n, n, |i, j| {
        if j < i {
            0.0
        } else if j < q {
            h.powi((j - i) as i32) / factorial(j - i)
        } else {
            exp_remainder(q - i, theta, h)
        }
    });

    let small = (theta * h).abs() < 1.0;
    let mut process_noise = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if i == q && j == q {
                sigma2 * (2.0 * theta * h).exp_m1() / (2.0 * theta)
            } else if small {
                sigma2 * ioup_noise_series(q - i, q - j, theta, h)
            } else {
                sigma2 * ioup_noise_closed(q - i, q - j, theta, h)
            };
            process_noise[(i, j)] = v;
            process_noise[(j, i)] = v;
        }
    }
    Ok(TransitionPair {
        transition,
        process_noise,
        h,
    })
}

/// `θ^(−m) (e^(θh) − Σ_{k<m} (θh)^k/k!)`, i.e. `Σ_{k≥0} θ^k h^(k+m)/(k+m)!`.
pub(crate) fn exp_remainder(m: usize, theta: f64, h: f64) -> f64 {
    let x = theta * h;
    if m == 0 {
        return x.exp();
    }
    if x.abs() < 1.0 {
        // tail series, term_k = θ^k h^(k+m) / (k+m)!
        let mut term = h.powi(m as i32) / factorial(m);
        let mut sum = term;
        for k in 0..200 {
            term *= x / (k + m + 1) as f64;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let mut partial = 0.0;
        let mut term = 1.0;
        for k in 0..m {
            if k > 0 {
                term *= x / k as f64;
            }
            partial += term;
        }
        (x.exp() - partial) / theta.powi(m as i32)
    }
}

/// `∫₀ʰ φ_a(τ) φ_b(τ) dτ` with `φ_m(τ) = Σ_{k≥0} θ^k τ^(k+m)/(k+m)!`,
/// expanded as a double power series grouped by total degree.
fn ioup_noise_series(a: usize, b: usize, theta: f64, h: f64) -> f64 {
    let base = a + b + 1;
    let mut sum = 0.0;
    let mut theta_pow = 1.0;
    for n in 0..120 {
        let coeff: f64 = (0..=n)
            .map(|k| 1.0 / (factorial(k + a) * factorial(n - k + b)))
            .sum();
        let p = n + base;
        let term = theta_pow * h.powi(p as i32) / p as f64 * coeff;
        sum += term;
        if n > 0 && term.abs() < 1e-17 * sum.abs() {
            break;
        }
        theta_pow *= theta;
    }
    sum
}

/// Neumaier-compensated accumulator.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Closed form for `|θh| ≥ 1`, with `a = q−i`, `b = q−j`:
///
/// `θ^(−a−b) { (e^(2θh)−1)/(2θ) − Σ_{k<a} I_k − Σ_{k<b} I_k
///            + Σ_{k1<a} Σ_{k2<b} θ^(k1+k2) h^(k1+k2+1) / (k1! k2! (k1+k2+1)) }`
///
/// where `I_k = θ^(k−1) e^(θh) h^k / k! − I_{k−1}` and `I_0 = (e^(θh)−1)/θ`.
fn ioup_noise_closed(a: usize, b: usize, theta: f64, h: f64) -> f64 {
    let e = (theta * h).exp();
    let kmax = a.max(b);
    let mut integrals = Vec::with_capacity(kmax);
    if kmax > 0 {
        integrals.push((theta * h).exp_m1() / theta);
        for k in 1..kmax {
            let prev = integrals[k - 1];
            integrals.push(theta.powi(k as i32 - 1) * e * h.powi(k as i32) / factorial(k) - prev);
        }
    }

    let mut acc = CompensatedSum::default();
    acc.add((2.0 * theta * h).exp_m1() / (2.0 * theta));
    for &ik in &integrals[..a] {
        acc.add(-ik);
    }
    for &ik in &integrals[..b] {
        acc.add(-ik);
    }
    for k1 in 0..a {
        for k2 in 0..b {
            let p = k1 + k2 + 1;
            acc.add(
                theta.powi((k1 + k2) as i32) * h.powi(p as i32)
                    / (factorial(k1) * factorial(k2) * p as f64),
            );
        }
    }
    acc.value() / theta.powi((a + b) as i32)
}

/// `exp(M)` by scaling and squaring of the order-13 Taylor polynomial, with
/// the scaling chosen so that `‖M/2^s‖∞ ≤ 0.5`.
pub fn expm_series(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = inf_norm(m);
    let mut s = 0i32;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let scaled = m / 2f64.powi(s);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=13 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Numerical discretization of an arbitrary drift/diffusion pair:
/// `A = exp(F h)` and `Q` by `n_quad`-point Gauss–Legendre quadrature of
/// `exp(Fτ) L Lᵀ exp(Fτ)ᵀ` over `[0, h]`, returned symmetrized.
pub fn quadrature_transition(
    drift: &DMatrix<f64>,
    diffusion: &DVector<f64>,
    h: f64,
    n_quad: usize,
) -> Result<TransitionPair> {
    if !drift.is_square() {
        return Err(Error::NonSquareDrift {
            rows: drift.nrows(),
            cols: drift.ncols(),
        });
    }
    if diffusion.len() != drift.nrows() {
        return Err(Error::DiffusionShape {
            expected: drift.nrows(),
            got: diffusion.len(),
        });
    }
    check_step(h)?;
    if n_quad < 16 {
        return Err(Error::invalid(
            "n_quad",
            format!("need at least 16 nodes, got {n_quad}"),
        ));
    }

    let n = drift.nrows();
    let rule = GaussLegendre::new(NonZeroUsize::new(n_quad).expect("n_quad >= 16"));
    let mut noise = DMatrix::zeros(n, n);
    for &(node, weight) in rule.as_node_weight_pairs() {
        let tau = 0.5 * h * (node + 1.0);
        let g = expm_series(&(drift * tau)) * diffusion;
        noise += (&g * g.transpose()) * (0.5 * h * weight);
    }
    let process_noise = (&noise + noise.transpose()) * 0.5;
    Ok(TransitionPair {
        transition: expm_series(&(drift * h)),
        process_noise,
        h,
    })
}

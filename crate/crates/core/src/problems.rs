//! Test initial value problems and a fixed-step RK4 reference integrator.
//!
//! Every problem is stored in first-order form `x' = f(t, x)`; the Van der
//! Pol oscillator is order-reduced to `(x, x')`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VectorField = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type StateFunctional = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
/// `(k, t) ↦ x^(k)(t)`, the k-th time derivative of the exact solution.
pub type AnalyticDerivatives = Arc<dyn Fn(usize, f64) -> DVector<f64> + Send + Sync>;

/// Registry names accepted by [`make_problem`].
pub const PROBLEM_NAMES: [&str; 5] = ["exp", "neg_exp", "orbit", "van_der_pol", "decay_chain"];

pub const DEFAULT_ECCENTRICITY: f64 = 0.1;
pub const DEFAULT_VDP_MU: f64 = 1.0;
pub const DEFAULT_VDP_DX0: f64 = 1.0;
pub const DEFAULT_REFERENCE_STEP: f64 = 1e-4;

/// A named conserved or monitored quantity of the state.
#[derive(Clone)]
pub struct Invariant {
    pub name: String,
    pub eval: StateFunctional,
}

#[derive(Clone)]
pub struct IVProblem {
    name: String,
    x0: DVector<f64>,
    t_end: f64,
    f: VectorField,
    invariants: Vec<Invariant>,
    analytic: Option<AnalyticDerivatives>,
}

impl fmt::Debug for IVProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IVProblem")
            .field("name", &self.name)
            .field("x0", &self.x0.as_slice())
            .field("t_end", &self.t_end)
            .field(
                "invariants",
                &self
                    .invariants
                    .iter()
                    .map(|i| i.name.as_str())
                    .collect::<Vec<_>>(),
            )
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl IVProblem {
    pub fn new<F>(name: impl Into<String>, x0: DVector<f64>, t_end: f64, f: F) -> Result<Self>
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        if x0.is_empty() {
            return Err(Error::invalid(
                "x0",
                "initial value must have at least one component",
            ));
        }
        check_horizon(t_end)?;
        let f: VectorField = Arc::new(f);
        let f0 = f(0.0, &x0);
        if f0.len() != x0.len() || f0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField {
                t: 0.0,
                input: x0.as_slice().to_vec(),
            });
        }
        Ok(Self {
            name: name.into(),
            x0,
            t_end,
            f,
            invariants: Vec::new(),
            analytic: None,
        })
    }

    pub fn with_invariant<G>(mut self, name: impl Into<String>, g: G) -> Self
    where
        G: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        self.invariants.push(Invariant {
            name: name.into(),
            eval: Arc::new(g),
        });
        self
    }

    pub fn with_analytic<G>(mut self, g: G) -> Self
    where
        G: Fn(usize, f64) -> DVector<f64> + Send + Sync + 'static,
    {
        self.analytic = Some(Arc::new(g));
        self
    }

    pub fn with_horizon(mut self, t_end: f64) -> Result<Self> {
        check_horizon(t_end)?;
        self.t_end = t_end;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, x)
    }

    pub fn invariants(&self) -> &[Invariant] {
        &self.invariants
    }

    /// k-th derivative of the exact solution at `t`, if known in closed form.
    pub fn exact_derivative(&self, k: usize, t: f64) -> Option<DVector<f64>> {
        self.analytic.as_ref().map(|g| g(k, t))
    }

    pub fn has_analytic(&self) -> bool {
        self.analytic.is_some()
    }
}

fn check_horizon(t_end: f64) -> Result<()> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(
            "T",
            format!("horizon must be positive, got {t_end}"),
        ));
    }
    Ok(())
}

/// Optional overrides for [`make_problem`]; `None` selects the default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Orbit eccentricity.
    pub eps: Option<f64>,
    /// Van der Pol damping.
    pub mu: Option<f64>,
    /// Van der Pol initial velocity `x'(0)`.
    pub vdp_dx0: Option<f64>,
    /// Horizon `T`.
    pub t_end: Option<f64>,
}

/// Default horizon per registered problem.
pub fn default_horizon(name: &str) -> Option<f64> {
    match name {
        "exp" | "neg_exp" | "orbit" | "decay_chain" => Some(10.0),
        "van_der_pol" => Some(20.0),
        _ => None,
    }
}

pub fn make_problem(name: &str, params: &ProblemParams) -> Result<IVProblem> {
    let t_end = match params.t_end {
        Some(t) => t,
        None => default_horizon(name).ok_or_else(|| Error::UnknownProblem(name.to_string()))?,
    };
    match name {
        "exp" => linear_scalar("exp", 1.0, t_end),
        "neg_exp" => linear_scalar("neg_exp", -1.0, t_end),
        "orbit" => orbit(params.eps.unwrap_or(DEFAULT_ECCENTRICITY), t_end),
        "van_der_pol" => van_der_pol(
            params.mu.unwrap_or(DEFAULT_VDP_MU),
            params.vdp_dx0.unwrap_or(DEFAULT_VDP_DX0),
            t_end,
        ),
        "decay_chain" => decay_chain(t_end),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `x' = rate·x`, `x(0) = 1`.
fn linear_scalar(name: &str, rate: f64, t_end: f64) -> Result<IVProblem> {
    Ok(
        IVProblem::new(name, DVector::from_element(1, 1.0), t_end, move |_, x| {
            x * rate
        })?
        .with_analytic(move |k, t| {
            DVector::from_element(1, rate.powi(k as i32) * (rate * t).exp())
        }),
    )
}

/// Two-body orbit with eccentricity `eps`, state `(y0, y1, y2, y3)` =
/// (position, velocity).
pub fn orbit(eps: f64, t_end: f64) -> Result<IVProblem> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(
            "eps",
            format!("eccentricity must lie in (0, 1), got {eps}"),
        ));
    }
    let x0 = DVector::from_vec(vec![
        1.0 - eps,
        0.0,
        0.0,
        ((1.0 + eps) / (1.0 - eps)).sqrt(),
    ]);
    let problem = IVProblem::new("orbit", x0, t_end, |_, y| {
        let r2 = y[0] * y[0] + y[1] * y[1];
        let r3 = r2 * r2.sqrt();
        DVector::from_vec(vec![y[2], y[3], -y[0] / r3, -y[1] / r3])
    })?
    .with_invariant("energy", |y| {
        0.5 * (y[2] * y[2] + y[3] * y[3]) - 1.0 / (y[0] * y[0] + y[1] * y[1]).sqrt()
    })
    .with_invariant("angular_momentum", |y| y[0] * y[3] - y[1] * y[2]);
    Ok(problem)
}

/// `x'' − μ(1 − x²)x' + x = 0`, `x(0) = 0`, reduced to `(x, x')`.
pub fn van_der_pol(mu: f64, dx0: f64, t_end: f64) -> Result<IVProblem> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::invalid(
            "mu",
            format!("must be finite and non-negative, got {mu}"),
        ));
    }
    if !dx0.is_finite() {
        return Err(Error::invalid("vdp_dx0", "must be finite"));
    }
    IVProblem::new(
        "van_der_pol",
        DVector::from_vec(vec![0.0, dx0]),
        t_end,
        move |_, y| DVector::from_vec(vec![y[1], mu * (1.0 - y[0] * y[0]) * y[1] - y[0]]),
    )
}

/// Ten-compartment decay chain `x' = M x` with `M` lower bidiagonal:
/// diagonal `(−1, …, −9, 0)`, subdiagonal `(1, …, 9)`, `x(0) = e₀`.
pub fn decay_chain(t_end: f64) -> Result<IVProblem> {
    const N: usize = 10;
    let mut x0 = DVector::zeros(N);
    x0[0] = 1.0;
    IVProblem::new("decay_chain", x0, t_end, |_, x| {
        DVector::from_fn(N, |i, _| {
            let outflow = if i < N - 1 {
                -((i + 1) as f64) * x[i]
            } else {
                0.0
            };
            let inflow = if i > 0 { i as f64 * x[i - 1] } else { 0.0 };
            outflow + inflow
        })
    })
    .map(|p| p.with_invariant("total", |x| x.sum()))
}

/// States of the reference solution at the requested times.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl ReferenceTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Component `j` along the grid.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[j]).collect()
    }
}

const GRID_TOL: f64 = 0.5e-9;

/// Classical fourth-order Runge–Kutta with fixed step `h_fine`, sampled at
/// `query_times` (each an integer multiple of `h_fine` inside `[0, T]`).
pub fn rk_reference(
    problem: &IVProblem,
    h_fine: f64,
    query_times: &[f64],
) -> Result<ReferenceTrajectory> {
    if !(h_fine > 0.0 && h_fine.is_finite()) {
        return Err(Error::invalid(
            "h_fine",
            format!("must be positive, got {h_fine}"),
        ));
    }
    let mut steps = Vec::with_capacity(query_times.len());
    for &t in query_times {
        if !(t >= -GRID_TOL && t <= problem.t_end() + GRID_TOL) {
            return Err(Error::invalid(
                "query_times",
                format!("{t} lies outside [0, T]"),
            ));
        }
        let k = (t / h_fine).round();
        if (t - k * h_fine).abs() > GRID_TOL {
            return Err(Error::invalid(
                "query_times",
                format!("{t} is not a multiple of h_fine = {h_fine}"),
            ));
        }
        steps.push(k as usize);
    }

    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by_key(|&i| steps[i]);

    let mut states = vec![DVector::zeros(0); steps.len()];
    let mut x = problem.x0().clone();
    let mut n = 0usize;
    for i in order {
        while n < steps[i] {
            let t = n as f64 * h_fine;
            x = rk4_step(problem, t, &x, h_fine);
            n += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteReference {
                    t: n as f64 * h_fine,
                });
            }
        }
        states[i] = x.clone();
    }
    Ok(ReferenceTrajectory {
        times: query_times.to_vec(),
        states,
    })
}

fn rk4_step(problem: &IVProblem, t: f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = problem.eval(t, x);
    let k2 = problem.eval(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = problem.eval(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = problem.eval(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

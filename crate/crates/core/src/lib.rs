//! Probabilistic ODE solvers built on Gaussian filtering.
//!
//! The solution of `x' = f(t, x)` and its first `q` derivatives are modelled
//! by a Gauss–Markov prior, either the q-times integrated Wiener process or
//! the q-times integrated Ornstein–Uhlenbeck process, and conditioned on
//! evaluations of `f` with a Kalman filter on a fixed grid.
//!
//! ```
//! use odefilter::filter::solve_ivp;
//! use odefilter::priors::StateSpacePrior;
//! use odefilter::problems::{make_problem, ProblemParams};
//!
//! let problem = make_problem("neg_exp", &ProblemParams::default())?;
//! let prior = StateSpacePrior::ioup(2, -1.5, 100.0)?;
//! let traj = solve_ivp(&problem, &prior, 0.5, 0.0)?;
//! assert_eq!(traj.states.len(), 21);
//! # Ok::<(), odefilter::Error>(())
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod filter;
pub mod priors;
pub mod problems;

pub use error::{Error, Result};

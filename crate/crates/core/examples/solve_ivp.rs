// Filter x' = -x under both priors and compare against the RK4 reference.
//
//     cargo run --example solve_ivp

use odefilter::analysis::error_report;
use odefilter::filter::solve_ivp;
use odefilter::priors::StateSpacePrior;
use odefilter::problems::{make_problem, rk_reference, ProblemParams, DEFAULT_REFERENCE_STEP};

pub fn run_example() -> odefilter::Result<()> {
    let problem = make_problem("neg_exp", &ProblemParams::default())?;
    let h = 0.5;
    for prior in [
        StateSpacePrior::iwp(2, 100.0)?,
        StateSpacePrior::ioup(2, -1.5, 100.0)?,
    ] {
        let traj = solve_ivp(&problem, &prior, h, 0.0)?;
        let reference = rk_reference(&problem, DEFAULT_REFERENCE_STEP, &traj.times())?;
        let report = error_report(&traj, &reference)?;
        println!("{}: max-abs error {:.4e}", prior.kind(), report.max_abs[0]);
        for state in traj.states.iter().step_by(4) {
            println!(
                "  t={:>4.1}  mean={:>10.6}  sd={:.2e}  exact={:.6}",
                state.t,
                state.mean[(0, 0)],
                state.cov[(0, 0)].sqrt(),
                (-state.t).exp()
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odefilter::Result<()> {
    run_example()
}

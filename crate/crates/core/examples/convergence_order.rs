// Local order of one prediction step: the error should shrink like h^(q+1).
//
//     cargo run --example convergence_order

use odefilter::analysis::local_order_estimate;
use odefilter::priors::StateSpacePrior;
use odefilter::problems::{make_problem, ProblemParams};

pub fn run_example() -> odefilter::Result<()> {
    let hs = [0.2, 0.1, 0.05, 0.025, 0.0125];
    let problem = make_problem("exp", &ProblemParams::default())?;
    for q in 1..=3 {
        for prior in [
            StateSpacePrior::iwp(q, 1.0)?,
            StateSpacePrior::ioup(q, -1.5, 1.0)?,
        ] {
            let est = local_order_estimate(&prior, &problem, &hs)?;
            let slope = est
                .slope()
                .map_or("exact".to_string(), |s| format!("{s:.3}"));
            println!(
                "{:<4} q={q}  slope {slope}  (expected {})",
                prior.kind(),
                q + 1
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odefilter::Result<()> {
    run_example()
}

// Exact draws from the OU and Wiener priors; terminal variances approach
// sigma^2 / (2 |theta|) and sigma^2 T.
//
//     cargo run --example prior_samples

use odefilter::analysis::{sample_prior, sample_variance};
use odefilter::priors::StateSpacePrior;

pub fn run_example() -> odefilter::Result<()> {
    let ou = StateSpacePrior::ioup(1, -1.0, 1.0)?;
    let samples = sample_prior(&ou, 0.1, 100, 2000, 1)?;
    println!(
        "OU at T=10: variance {:.4} (stationary 0.5)",
        sample_variance(&samples.terminal(1))
    );

    let wiener = StateSpacePrior::iwp(1, 1.0)?;
    let samples = sample_prior(&wiener, 0.1, 10, 2000, 1)?;
    println!(
        "Wiener at T=1: variance {:.4} (exact 1)",
        sample_variance(&samples.terminal(1))
    );
    println!(
        "integrated Wiener at T=1: variance {:.4} (exact 1/3)",
        sample_variance(&samples.terminal(0))
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> odefilter::Result<()> {
    run_example()
}

// Var of the integrated OU process against the integrated Wiener process.
//
//     cargo run --example variance_inequality

use odefilter::analysis::{iou_integral_variance, wiener_integral_variance};

pub fn run_example() -> odefilter::Result<()> {
    println!(
        "{:>6} {:>6} {:>14} {:>14}",
        "theta", "T", "integrated OU", "integrated W"
    );
    for theta in [0.1, 1.0, 5.0] {
        for t in [0.1, 1.0, 10.0] {
            println!(
                "{theta:>6} {t:>6} {:>14.6e} {:>14.6e}",
                iou_integral_variance(theta, 1.0, t)?,
                wiener_integral_variance(1.0, t)
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odefilter::Result<()> {
    run_example()
}

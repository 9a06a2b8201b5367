// Exact discretizations of the IWP and IOUP priors over one step, checked
// against the quadrature oracle.
//
//     cargo run --example transition_matrices

use odefilter::priors::{quadrature_transition, StateSpacePrior};

pub fn run_example() -> odefilter::Result<()> {
    let h = 0.5;
    for prior in [
        StateSpacePrior::iwp(2, 1.0)?,
        StateSpacePrior::ioup(2, -1.5, 1.0)?,
    ] {
        let tp = prior.transition(h)?;
        let (f, l) = prior.drift_and_diffusion();
        let oracle = quadrature_transition(&f, &l, h, 64)?;
        println!(
            "{} q={} theta={} h={h}",
            prior.kind(),
            prior.q(),
            prior.theta()
        );
        println!("A(h) ={}", tp.transition);
        println!("Q(h) ={}", tp.process_noise);
        println!(
            "max |closed form - quadrature|: A {:.1e}, Q {:.1e}\n",
            (&tp.transition - &oracle.transition).amax(),
            (&tp.process_noise - &oracle.process_noise).amax()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odefilter::Result<()> {
    run_example()
}

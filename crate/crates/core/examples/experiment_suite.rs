// Every test problem under both priors, with per-experiment CSV/JSON output
// and a summary of which prior wins.
//
//     cargo run --release --example experiment_suite [OUT_DIR]

use std::path::{Path, PathBuf};

use odefilter::cli::run_suite;

pub fn run_example() -> odefilter::Result<()> {
    run_into(&std::env::temp_dir().join("odefilter-suite"))
}

pub fn run_into(out: &Path) -> odefilter::Result<()> {
    let summary = run_suite(out, None)?;
    for row in summary.rows.iter().step_by(2) {
        let other = summary
            .row(&row.problem, odefilter::priors::PriorKind::Ioup)
            .unwrap();
        println!(
            "{:<12} iwp {:>10.3e}  ioup {:>10.3e}  winner {:<5} expected {}",
            row.problem,
            row.max_abs_error.unwrap_or(f64::NAN),
            other.max_abs_error.unwrap_or(f64::NAN),
            row.winner.map_or("-", |w| w.as_str()),
            row.expected
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> odefilter::Result<()> {
    match std::env::args().nth(1) {
        Some(dir) => run_into(&PathBuf::from(dir)),
        None => run_example(),
    }
}

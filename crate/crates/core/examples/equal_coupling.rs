//! Realization-averaged decay of the central oscillation at equal coupling,
//! next to the closed-form and finite-N analytic curves.
//!
//! cargo run --release --example equal_coupling -- [realizations] [out.csv]

use std::path::PathBuf;
use std::time::Instant;

use centralspin::experiments::{run, Experiment, ExperimentConfig};

fn main() -> centralspin::Result<()> {
    let mut args = std::env::args().skip(1);
    let realizations = args.next().map(|s| s.parse().expect("realization count")).unwrap_or(20);
    let output = args.next().map(PathBuf::from);
    let config = ExperimentConfig { experiment: Experiment::EqualCoupling, realizations, output, ..Default::default() };
    let grid = config.resolved_grid()?;
    println!(
        "N = {}, J0 = {}, J = {}, {} realizations, t_max = {:.3}, {} samples",
        config.n_bath, config.j0, config.j, realizations, grid.t_max, grid.n_samples
    );
    let start = Instant::now();
    let report = run(&config)?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    println!("elapsed {:.1?}", start.elapsed());
    for p in &report.outputs {
        println!("wrote {}", p.display());
    }
    Ok(())
}

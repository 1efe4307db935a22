//! Jittered couplings: the plateau sinks below 1/3 once the bath spin stops
//! being conserved.
//!
//! cargo run --release --example random_coupling -- [jitter] [realizations]

use centralspin::experiments::{run_equal_coupling, run_random_coupling, Experiment, ExperimentConfig};

fn main() -> centralspin::Result<()> {
    let mut args = std::env::args().skip(1);
    let jitter: f64 = args.next().map(|s| s.parse().expect("jitter")).unwrap_or(0.3);
    let realizations = args.next().map(|s| s.parse().expect("realizations")).unwrap_or(8);
    let base = ExperimentConfig { n_bath: 11, realizations, ..Default::default() };
    let equal = run_equal_coupling(&base)?;
    let random = run_random_coupling(&ExperimentConfig { jitter, experiment: Experiment::RandomCoupling, ..base })?;
    println!("equal couplings:  tail {:.4}, bath <S^2> drift {:.1e}", equal.envelope.tail_mean, equal.diagnostics.max_bath_spin_drift);
    println!("jitter {jitter}:      tail {:.4}, bath <S^2> drift {:.1e}", random.envelope.tail_mean, random.diagnostics.max_bath_spin_drift);
    Ok(())
}

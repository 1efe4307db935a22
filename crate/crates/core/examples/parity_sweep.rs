//! The same equal-coupling bath seen by one, two and three central spins.
//! Odd central spin loses the oscillation; even keeps a third of it.
//!
//! cargo run --release --example parity_sweep -- [N] [realizations]

use centralspin::experiments::{run_parity_sweep, ExperimentConfig};

fn main() -> centralspin::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().expect("integer argument"));
    let n_bath = args.next().unwrap_or(11);
    let realizations = args.next().unwrap_or(4);
    let config = ExperimentConfig { n_bath, realizations, ..Default::default() };
    for (nc, e) in run_parity_sweep(&config)? {
        match (&e.envelope, &e.oscillation_envelope) {
            (Some(raw), Some(osc)) => println!(
                "n_c = {nc}: period {:.4}, |<s1z>| tail {:.4}, oscillation tail {:.4} ± {:.4}",
                e.period.unwrap_or_default(),
                raw.tail_mean,
                osc.tail_mean,
                osc.tail_stddev
            ),
            _ => println!("n_c = {nc}: no oscillation, <s1z> at t_max {:.4}", e.series.values.last().unwrap_or(&0.0)),
        }
    }
    Ok(())
}

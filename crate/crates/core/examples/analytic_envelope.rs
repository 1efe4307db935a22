//! Closed-form decay law and the finite-N multiplet sum, sampled on the
//! default grid and written as CSV to stdout.
//!
//! cargo run --example analytic_envelope -- [N] > curves.csv

use centralspin::analytic::{envelope, envelope_minimum, sigma1z_closed_form, AnalyticParams, Semianalytic};
use centralspin::experiments::default_grid;

fn main() -> centralspin::Result<()> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().expect("bath size")).unwrap_or(13);
    let (j0, j) = (8.0, 0.128);
    let p = AnalyticParams::new(n as u32, j / j0, j0)?;
    let semi = Semianalytic::new(p)?;
    let grid = default_grid(2, n, j0, j)?;
    eprintln!(
        "envelope minimum {:.6} at raw t = {:.4}; {} bath multiplets",
        envelope_minimum(),
        p.minimum_time() / j0,
        semi.sectors().len()
    );
    println!("t,closed_form,semianalytic,envelope");
    for t in grid.times() {
        println!("{t},{},{},{}", sigma1z_closed_form(&p, t), semi.evaluate(t), envelope(&p, t * j0));
    }
    Ok(())
}

//! Bath spin weights P(S) for N spins, exact next to the Gaussian form.
//!
//! cargo run --example weights -- 13

use centralspin::spin_algebra::{multiplet_degeneracy, weight_gaussian, WeightTable};

fn main() -> centralspin::Result<()> {
    let n: u32 = std::env::args().nth(1).map(|s| s.parse().expect("bath size")).unwrap_or(13);
    let table = WeightTable::new(n)?;
    println!("{:>6} {:>10} {:>14} {:>12}", "S", "multiplets", "P(S)", "gaussian");
    for (k, e) in table.entries.iter().enumerate() {
        let g = multiplet_degeneracy(n, k as u32)?;
        println!("{:>6} {:>10} {:>14.10} {:>12.8}", e.spin.to_string(), g, e.weight, weight_gaussian(n, e.spin.value()));
    }
    println!("sum = {:.15}", table.total());
    Ok(())
}

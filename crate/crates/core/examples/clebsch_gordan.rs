//! Channel amplitudes of |S, Sz> ⊗ |1, 0> on L = S-1, S, S+1, exact and in
//! the large-S limit.

use centralspin::spin_algebra::{cg_decompose_exact, cg_decompose_large_s, subspace_probability_third, HalfIntSpin};

fn main() -> centralspin::Result<()> {
    for s in [1u32, 2, 5, 50] {
        let spin = HalfIntSpin::integer(s);
        println!("S = {spin}   multiplet average of the L = S weight: {:.6}", subspace_probability_third(&[spin])?);
        for m in spin.projections().filter(|m| m.value().abs() <= 2.0 || m.value().abs() == f64::from(s)) {
            let exact = cg_decompose_exact(spin, m)?;
            let large = cg_decompose_large_s(spin, m)?;
            println!("  Sz = {:>4}  exact {:>9.5?}  large-S {:>9.5?}", m.value(), exact.as_array(), large.as_array());
        }
    }
    Ok(())
}

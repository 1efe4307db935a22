//! Chebyshev and Krylov propagation against dense diagonalization on a random
//! 10-spin system.

use centralspin::dense::DenseSystem;
use centralspin::hilbert::{HamiltonianSpec, StateVector};
use centralspin::propagator::{propagate, Method, PropagatorConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> centralspin::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = HamiltonianSpec::new(2, 8.0, (0..8).map(|_| rng.gen_range(0.05..0.2)).collect())?;
    let psi = StateVector::random(spec.n_spins(), &mut rng);
    let dense = DenseSystem::new(&spec)?;
    for t in [0.5, 5.0, 50.0] {
        let want = dense.evolve(&psi, t)?;
        for method in [Method::Chebyshev, Method::Krylov] {
            for tol in [1e-6, 1e-10] {
                let cfg = PropagatorConfig::default().with_method(method).with_tolerance(tol);
                let got = propagate(&psi, &spec, t, &cfg)?;
                println!("t = {t:>5}  {method:<9?} tol {tol:.0e}  max error {:.2e}", got.max_abs_diff(&want));
            }
        }
    }
    Ok(())
}

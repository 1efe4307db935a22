//! Single trajectory, checkpointed halfway and resumed from the snapshot file.

use centralspin::hilbert::{build_initial_state, default_central_pattern, expectation_sigma_z, BathMeasure, HamiltonianSpec, StateVector};
use centralspin::propagator::{Propagator, PropagatorConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> centralspin::Result<()> {
    let spec = HamiltonianSpec::equal(2, 8.0, 10, 0.128)?;
    let bath = BathMeasure::Haar.sample(spec.n_bath(), &mut ChaCha8Rng::seed_from_u64(3));
    let psi0 = build_initial_state(&spec, &bath, &default_central_pattern(2))?;
    let p = Propagator::new(&spec, PropagatorConfig::default())?;

    let half = p.propagate(&psi0, 2.5)?;
    let path = std::env::temp_dir().join("centralspin_snapshot.bin");
    half.write_snapshot(std::io::BufWriter::new(std::fs::File::create(&path)?))?;
    let resumed = StateVector::read_snapshot(std::io::BufReader::new(std::fs::File::open(&path)?))?;
    let split = p.propagate(&resumed, 2.5)?;
    let direct = p.propagate(&psi0, 5.0)?;

    println!("snapshot {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());
    println!("<s1z>(5) resumed {:.12}, direct {:.12}", expectation_sigma_z(&split, 0)?, expectation_sigma_z(&direct, 0)?);
    println!("max amplitude difference {:.1e}", split.max_abs_diff(&direct));
    std::fs::remove_file(&path)?;
    Ok(())
}

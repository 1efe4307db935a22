//! Combinatorics and Clebsch-Gordan amplitudes against brute-force
//! diagonalization of small spin systems.

use centralspin::dense::symmetric_eigen;
use centralspin::hilbert::{
    bath_spin_distribution, bath_spin_squared, build_initial_state, BathMeasure, HamiltonianSpec, Orientation, StateVector,
    SwapOperator,
};
use centralspin::spin_algebra::{cg_decompose_exact, multiplet_degeneracy, weight_exact, HalfIntSpin};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dense `S^2` of `n` spin-1/2 from the kernel, column by column.
fn dense_total_spin(n: usize) -> DMatrix<f64> {
    let mut op = SwapOperator::new(n);
    op.add_constant(0.75 * n as f64);
    for i in 0..n {
        for j in i + 1..n {
            op.add_heisenberg(i, j, 1.0);
        }
    }
    let dim = 1 << n;
    let mut m = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let col = op.apply(&StateVector::basis(n, x).unwrap()).unwrap();
        for (y, a) in col.amplitudes().iter().enumerate() {
            m[(y, x)] = a.re;
        }
    }
    m
}

fn spin_of_eigenvalue(e: f64) -> HalfIntSpin {
    // e = S(S+1), twice S = sqrt(4e + 1) - 1
    HalfIntSpin::from_twice(((4.0 * e + 1.0).sqrt() - 1.0).round() as u32)
}

#[test]
fn four_spin_multiplets_by_diagonalization() {
    let eig = symmetric_eigen(&dense_total_spin(4)).unwrap();
    let mut states = std::collections::BTreeMap::new();
    for &e in eig.values.iter() {
        *states.entry(spin_of_eigenvalue(e)).or_insert(0u32) += 1;
    }
    for (s, count) in states {
        let k = (4 - s.twice_value()) / 2;
        assert_eq!(count % s.multiplicity(), 0);
        assert_eq!(u128::from(count / s.multiplicity()), multiplet_degeneracy(4, k).unwrap(), "S = {s}");
        // probability of S for the maximally mixed state
        let w = f64::from(count) / 16.0;
        assert!((w - weight_exact(4, s).unwrap()).abs() < 1e-15);
    }
}

#[test]
fn two_spin_weights() {
    assert_eq!(weight_exact(2, HalfIntSpin::ONE).unwrap(), 0.75);
    assert_eq!(weight_exact(2, HalfIntSpin::ZERO).unwrap(), 0.25);
}

/// `L^2` on the `(2S+1) x 3` product space, bath index major, spin-1 index
/// minor, both in descending projection.
fn coupled_l_squared(twice_s: u32) -> DMatrix<f64> {
    let sm = |twice: u32| {
        let d = twice as usize + 1;
        let j = f64::from(twice) / 2.0;
        let mut z = DMatrix::zeros(d, d);
        let mut p = DMatrix::zeros(d, d);
        for i in 0..d {
            let m = j - i as f64;
            z[(i, i)] = m;
            if i > 0 {
                p[(i - 1, i)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
            }
        }
        (z, p)
    };
    let (bz, bp) = sm(twice_s);
    let (cz, cp) = sm(2);
    let ib = DMatrix::<f64>::identity(bz.nrows(), bz.nrows());
    let ic = DMatrix::<f64>::identity(3, 3);
    let s = f64::from(twice_s) / 2.0;
    let sdotc = bz.kronecker(&cz) + (bp.kronecker(&cp.transpose()) + bp.transpose().kronecker(&cp)) * 0.5;
    ib.kronecker(&ic) * (s * (s + 1.0) + 2.0) + sdotc * 2.0
}

#[test]
fn clebsch_gordan_matches_l_squared_eigenvectors() {
    for twice_s in 1..=12u32 {
        let s = HalfIntSpin::from_twice(twice_s);
        let eig = symmetric_eigen(&coupled_l_squared(twice_s)).unwrap();
        for (bi, m) in s.projections().collect::<Vec<_>>().into_iter().rev().enumerate() {
            let idx = 3 * bi + 1;
            let cg = cg_decompose_exact(s, m).unwrap();
            let mut weights = [0.0; 3];
            for (k, &e) in eig.values.iter().enumerate() {
                let l = spin_of_eigenvalue(e).twice_value() as i64;
                let slot = ((l - twice_s as i64) / 2 + 1) as usize;
                weights[slot] += eig.vectors[(idx, k)].powi(2);
            }
            for (w, a) in weights.iter().zip(cg.as_array()) {
                assert!((w - a * a).abs() < 1e-10, "S = {s}, m = {}: {weights:?} vs {cg:?}", m.value());
            }
            assert!((cg.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}

/// `⟨psi| P_S |psi⟩` with `P_S` the matrix-free spectral projector of the
/// bath `S^2`.
fn projector_weights(spec: &HamiltonianSpec, psi: &StateVector) -> Vec<f64> {
    let nb = spec.n_bath();
    let s2 = bath_spin_squared(spec);
    let spins: Vec<f64> = (0..=nb / 2).map(|k| nb as f64 / 2.0 - k as f64).collect();
    spins
        .iter()
        .map(|&s| {
            let mut v = psi.clone();
            for &other in &spins {
                if other == s {
                    continue;
                }
                let sv = s2.apply(&v).unwrap();
                let shift = other * (other + 1.0);
                let denom = s * (s + 1.0) - shift;
                let amps: Vec<C64> =
                    sv.amplitudes().iter().zip(v.amplitudes()).map(|(a, b)| (a - b * shift) / denom).collect();
                v = StateVector::from_amplitudes(psi.n_spins(), amps).unwrap();
            }
            psi.inner(&v).re
        })
        .collect()
}

#[test]
fn bath_spin_distribution_matches_projectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for nb in [1usize, 2, 3, 5, 8] {
        for _ in 0..4 {
            let spec = HamiltonianSpec::equal(1, 1.0, nb, 0.1).unwrap();
            let bath = BathMeasure::Haar.sample(nb, &mut rng);
            let psi = build_initial_state(&spec, &bath, &[Orientation::Up]).unwrap();
            let want = projector_weights(&spec, &psi);
            let got = bath_spin_distribution(&bath);
            assert_eq!(got.len(), want.len());
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "N = {nb}: {got:?} vs {want:?}");
            }
        }
    }
}

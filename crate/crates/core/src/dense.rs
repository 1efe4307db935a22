//! Dense reference evolution for small systems.
//!
//! The matrix is assembled element by element from the ladder form
//! `s_i·s_j = s^z_i s^z_j + (s^+_i s^-_j + s^-_i s^+_j) / 2`, which shares no
//! code with the SWAP kernel in [`crate::hilbert`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{HamiltonianSpec, StateVector};

/// Largest system the dense oracle accepts (4096 x 4096).
pub const DENSE_MAX_SPINS: usize = 12;

/// Real symmetric matrix of `H` in the product basis.
pub fn dense_hamiltonian(spec: &HamiltonianSpec) -> Result<DMatrix<f64>> {
    let n = spec.n_spins();
    if n > DENSE_MAX_SPINS {
        return Err(Error::domain(format!("dense matrix for {n} spins exceeds cap of {DENSE_MAX_SPINS}")));
    }
    let nc = spec.n_central;
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    // j0 C^2 = j0 (3/4 n_c + 2 Σ_{i<j} c_i·c_j); bath 2 J_k c_i·s_k
    for i in 0..nc {
        for j in i + 1..nc {
            pairs.push((i, j, 2.0 * spec.j0));
        }
    }
    for (k, &jk) in spec.bath_couplings.iter().enumerate() {
        for i in 0..nc {
            pairs.push((i, nc + k, 2.0 * jk));
        }
    }
    let dim = 1usize << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let diag0 = 0.75 * nc as f64 * spec.j0;
    for x in 0..dim {
        h[(x, x)] += diag0;
        for &(i, j, w) in &pairs {
            let bi = (x >> i) & 1;
            let bj = (x >> j) & 1;
            let zz = if bi == bj { 0.25 } else { -0.25 };
            h[(x, x)] += w * zz;
            if bi != bj {
                // s+_i s-_j or s-_i s+_j flips both, matrix element 1
                let y = x ^ (1 << i) ^ (1 << j);
                h[(y, x)] += w * 0.5;
            }
        }
    }
    Ok(h)
}

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending; column `k`
/// of `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of a real symmetric matrix, checked by reconstruction.
pub fn symmetric_eigen(h: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = h.nrows();
    let scale = h.amax().max(1.0);
    let tolerance = 1e-10 * scale;
    let m = faer::Mat::<f64>::from_fn(n, n, |i, j| h[(i, j)]);
    let eig = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::Convergence { order: n, residual: f64::INFINITY, tolerance })?;
    let (u, s) = (eig.U(), eig.S());
    let r = &m * u - u * s;
    let residual = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| r[(i, j)].abs()).fold(0.0, f64::max);
    if residual > tolerance {
        return Err(Error::Convergence { order: n, residual, tolerance });
    }
    let s = s.column_vector();
    let values = DVector::from_fn(n, |k, _| s[k]);
    let vectors = DMatrix::from_fn(n, n, |i, k| u[(i, k)]);
    Ok(SymmetricEigen { values, vectors })
}

/// Eigendecomposition of `H`, reusable for many evolution times.
pub struct DenseSystem {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DenseSystem {
    pub fn new(spec: &HamiltonianSpec) -> Result<Self> {
        let h = dense_hamiltonian(spec)?;
        let eig = symmetric_eigen(&h)?;
        Ok(Self { eigenvalues: eig.values, eigenvectors: eig.vectors })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `e^{-iHt} psi`.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        let dim = self.eigenvalues.len();
        if psi.dim() != dim {
            return Err(Error::domain(format!("state dimension {} vs dense dimension {dim}", psi.dim())));
        }
        let v = &self.eigenvectors;
        let amps = psi.amplitudes();
        let mut coeff = vec![C64::new(0.0, 0.0); dim];
        for (k, c) in coeff.iter_mut().enumerate() {
            let col = v.column(k);
            let proj: C64 = col.iter().zip(amps).map(|(&vk, a)| a * vk).sum();
            *c = proj * C64::from_polar(1.0, -self.eigenvalues[k] * t);
        }
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for (k, c) in coeff.iter().enumerate() {
            for (o, &vk) in out.iter_mut().zip(v.column(k).iter()) {
                *o += c * vk;
            }
        }
        StateVector::from_amplitudes(psi.n_spins(), out)
    }
}

/// `e^{-iHt} psi0` by full diagonalization; `n_spins <= 12`.
pub fn dense_oracle(spec: &HamiltonianSpec, psi0: &StateVector, t: f64) -> Result<StateVector> {
    DenseSystem::new(spec)?.evolve(psi0, t)
}

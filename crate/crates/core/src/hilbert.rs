//! Bit-encoded product basis for `n_central + N` spins 1/2.
//!
//! Basis index bit `i` set means spin `i` is up. Central spins occupy bits
//! `0..n_central`, the bath the bits above them. Every Heisenberg pair term is
//! written with the spin-1/2 identity `2 s_i·s_j = SWAP_ij - 1/2`, so an
//! isotropic Hamiltonian becomes `constant + Σ w_p SWAP_p` and is applied
//! without ever storing a matrix.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_SPINS: usize = 24;

/// Output amplitudes handled per rayon task.
const CHUNK: usize = 1 << 12;

const EQUAL_COUPLING_TOL: f64 = 1e-15;

/// Central spins coupled to each other with strength `j0` and to bath spin `k`
/// with strength `bath_couplings[k]`:
/// `H = j0 C^2 + 2 Σ_k J_k C·s_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub n_central: usize,
    pub j0: f64,
    pub bath_couplings: Vec<f64>,
    #[serde(default = "default_max_spins")]
    pub max_spins: usize,
}

fn default_max_spins() -> usize {
    DEFAULT_MAX_SPINS
}

impl HamiltonianSpec {
    pub fn new(n_central: usize, j0: f64, bath_couplings: Vec<f64>) -> Result<Self> {
        Self::with_max_spins(n_central, j0, bath_couplings, DEFAULT_MAX_SPINS)
    }

    pub fn with_max_spins(
        n_central: usize,
        j0: f64,
        bath_couplings: Vec<f64>,
        max_spins: usize,
    ) -> Result<Self> {
        let spec = Self { n_central, j0, bath_couplings, max_spins };
        spec.validate()?;
        Ok(spec)
    }

    /// All bath couplings equal to `j`.
    pub fn equal(n_central: usize, j0: f64, n_bath: usize, j: f64) -> Result<Self> {
        Self::new(n_central, j0, vec![j; n_bath])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_central == 0 {
            return Err(Error::domain("at least one central spin is required"));
        }
        if self.n_spins() > self.max_spins {
            return Err(Error::domain(format!(
                "{} spins exceed the configured maximum of {}",
                self.n_spins(),
                self.max_spins
            )));
        }
        if self.max_spins >= usize::BITS as usize {
            return Err(Error::domain("max_spins does not fit a basis index"));
        }
        if !self.j0.is_finite() || self.bath_couplings.iter().any(|j| !j.is_finite()) {
            return Err(Error::domain("couplings must be finite"));
        }
        Ok(())
    }

    pub fn n_bath(&self) -> usize {
        self.bath_couplings.len()
    }

    pub fn n_spins(&self) -> usize {
        self.n_central + self.n_bath()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    pub fn is_equal_coupling(&self) -> bool {
        match self.bath_couplings.first() {
            None => true,
            Some(&j) => self.bath_couplings.iter().all(|&x| (x - j).abs() <= EQUAL_COUPLING_TOL),
        }
    }

    /// Short stable fingerprint of the parameters (FNV-1a over the raw bits).
    pub fn digest(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(&(self.n_central as u64).to_le_bytes());
        eat(&self.j0.to_bits().to_le_bytes());
        for j in &self.bath_couplings {
            eat(&j.to_bits().to_le_bytes());
        }
        format!("{h:016x}")
    }

    /// The same system in units where `j0 = 1`: couplings divided by `j0`.
    pub fn rescaled(&self) -> Result<Self> {
        if self.j0 == 0.0 {
            return Err(Error::domain("cannot rescale with j0 = 0"));
        }
        let bath = self.bath_couplings.iter().map(|j| j / self.j0).collect();
        Self::with_max_spins(self.n_central, 1.0, bath, self.max_spins)
    }
}

/// Normalized amplitudes over the `2^n_spins` product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_spins: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn basis(n_spins: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_spins;
        if index >= dim {
            return Err(Error::domain(format!("basis index {index} outside 2^{n_spins}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_spins, amps })
    }

    /// Wrap raw amplitudes; the length must be `2^n_spins`. No normalization is
    /// applied.
    pub fn from_amplitudes(n_spins: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n_spins {
            return Err(Error::domain(format!(
                "{} amplitudes do not match {n_spins} spins",
                amps.len()
            )));
        }
        Ok(Self { n_spins, amps })
    }

    /// Random state, uniformly distributed on the unit sphere.
    pub fn random<R: Rng + ?Sized>(n_spins: usize, rng: &mut R) -> Self {
        let dim = 1usize << n_spins;
        let mut amps: Vec<C64> = (0..dim).map(|_| C64::new(gauss(rng), gauss(rng))).collect();
        let n = norm(&amps);
        amps.iter_mut().for_each(|a| *a /= n);
        Self { n_spins, amps }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amps)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        self.amps.iter_mut().for_each(|a| *a /= n);
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest `|self_i - other_i|`.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Snapshot: 8-byte little-endian spin count, then interleaved `(re, im)`
    /// little-endian `f64` pairs.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&(self.n_spins as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * self.amps.len());
        for a in &self.amps {
            buf.extend_from_slice(&a.re.to_le_bytes());
            buf.extend_from_slice(&a.im.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 8];
        input.read_exact(&mut header)?;
        let n_spins = u64::from_le_bytes(header) as usize;
        if n_spins >= usize::BITS as usize - 5 {
            return Err(Error::domain(format!("snapshot header claims {n_spins} spins")));
        }
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        let dim = 1usize << n_spins;
        if body.len() != 16 * dim {
            return Err(Error::domain(format!(
                "snapshot body has {} bytes, expected {}",
                body.len(),
                16 * dim
            )));
        }
        let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8-byte slice"));
        let amps = body.chunks_exact(16).map(|c| C64::new(f(&c[..8]), f(&c[8..]))).collect();
        Ok(Self { n_spins, amps })
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn gauss<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller
    let u: f64 = 1.0 - rng.gen::<f64>();
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (TAU * v).cos()
}

/// Direction of a single spin-1/2 pure state on the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    theta: f64,
    phi: f64,
}

impl BlochAngles {
    pub const UP: Self = Self { theta: 0.0, phi: 0.0 };
    pub const DOWN: Self = Self { theta: PI, phi: 0.0 };

    /// `theta ∈ [0, π]`, `phi ∈ [0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !(0.0..TAU).contains(&phi) {
            return Err(Error::domain(format!("Bloch angles out of range: ({theta}, {phi})")));
        }
        Ok(Self { theta, phi })
    }

    /// Haar-uniform single-spin state.
    pub fn random_haar<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..TAU);
        Self { theta: z.acos(), phi }
    }

    /// The opposite direction.
    pub fn antipodal(self) -> Self {
        let phi = self.phi + PI;
        Self { theta: PI - self.theta, phi: if phi >= TAU { phi - TAU } else { phi } }
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn phi(self) -> f64 {
        self.phi
    }

    /// Amplitudes `[down, up]`, i.e. indexed by the basis bit.
    pub fn spinor(self) -> [C64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [C64::from_polar(s, self.phi), C64::new(c, 0.0)]
    }

    /// Unit Bloch vector.
    pub fn bloch_vector(self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Distribution from which random bath product states are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BathMeasure {
    /// Independent Haar-uniform spins.
    #[default]
    Haar,
    /// Independent fair coin flips between up and down.
    Basis,
}

impl BathMeasure {
    pub fn sample<R: Rng + ?Sized>(self, n_bath: usize, rng: &mut R) -> Vec<BlochAngles> {
        (0..n_bath)
            .map(|_| match self {
                BathMeasure::Haar => BlochAngles::random_haar(rng),
                BathMeasure::Basis => {
                    if rng.gen::<bool>() {
                        BlochAngles::UP
                    } else {
                        BlochAngles::DOWN
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Up,
    Down,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Up => Orientation::Down,
            Orientation::Down => Orientation::Up,
        }
    }

    fn angles(self) -> BlochAngles {
        match self {
            Orientation::Up => BlochAngles::UP,
            Orientation::Down => BlochAngles::DOWN,
        }
    }
}

/// Alternating `up, down, up, ...`; for two central spins this is `|↑↓⟩`.
pub fn default_central_pattern(n_central: usize) -> Vec<Orientation> {
    (0..n_central)
        .map(|i| if i % 2 == 0 { Orientation::Up } else { Orientation::Down })
        .collect()
}

/// Product state: central spins in the given up/down pattern, bath spins along
/// the given Bloch directions.
pub fn build_initial_state(
    spec: &HamiltonianSpec,
    bath_states: &[BlochAngles],
    central_pattern: &[Orientation],
) -> Result<StateVector> {
    if bath_states.len() != spec.n_bath() {
        return Err(Error::domain(format!(
            "{} bath states for {} bath spins",
            bath_states.len(),
            spec.n_bath()
        )));
    }
    if central_pattern.len() != spec.n_central {
        return Err(Error::domain(format!(
            "central pattern of length {} for {} central spins",
            central_pattern.len(),
            spec.n_central
        )));
    }
    let spinors: Vec<[C64; 2]> = central_pattern
        .iter()
        .map(|o| o.angles())
        .chain(bath_states.iter().copied())
        .map(BlochAngles::spinor)
        .collect();
    let mut amps = Vec::with_capacity(spec.dim());
    amps.push(C64::new(1.0, 0.0));
    for spinor in &spinors {
        // spin i is bit i: the new bit is the high half
        let len = amps.len();
        amps.extend_from_within(..);
        for a in &mut amps[..len] {
            *a *= spinor[0];
        }
        for a in &mut amps[len..] {
            *a *= spinor[1];
        }
    }
    StateVector::from_amplitudes(spec.n_spins(), amps)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SwapTerm {
    lo: u32,
    hi: u32,
    mask: usize,
    weight: f64,
}

/// Operator of the form `constant + Σ_p w_p SWAP_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapOperator {
    n_spins: usize,
    constant: f64,
    terms: Vec<SwapTerm>,
}

impl SwapOperator {
    pub fn new(n_spins: usize) -> Self {
        Self { n_spins, constant: 0.0, terms: Vec::new() }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// Add `weight · SWAP_ij`.
    pub fn add_swap(&mut self, i: usize, j: usize, weight: f64) {
        assert!(i != j && i < self.n_spins && j < self.n_spins);
        if weight == 0.0 {
            return;
        }
        let (lo, hi) = (i.min(j) as u32, i.max(j) as u32);
        self.terms.push(SwapTerm { lo, hi, mask: (1 << lo) | (1 << hi), weight });
    }

    /// Add `weight · 2 s_i·s_j = weight · (SWAP_ij - 1/2)`.
    pub fn add_heisenberg(&mut self, i: usize, j: usize, weight: f64) {
        self.add_swap(i, j, weight);
        self.constant -= 0.5 * weight;
    }

    /// Interval guaranteed to contain the spectrum: each SWAP has eigenvalues
    /// `±1`.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let spread: f64 = self.terms.iter().map(|t| t.weight.abs()).sum();
        (self.constant - spread, self.constant + spread)
    }

    /// `out = self · psi`. Each output amplitude is written by exactly one
    /// task, so the result does not depend on the thread count.
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) {
        assert_eq!(psi.len(), 1 << self.n_spins);
        assert_eq!(out.len(), psi.len());
        let terms = &self.terms;
        let constant = self.constant;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, block)| {
            let base = c * CHUNK;
            for (off, o) in block.iter_mut().enumerate() {
                let x = base + off;
                let mut acc = psi[x] * constant;
                for t in terms {
                    let differ = ((x >> t.lo) ^ (x >> t.hi)) & 1;
                    let y = x ^ (t.mask & differ.wrapping_neg());
                    acc += psi[y] * t.weight;
                }
                *o = acc;
            }
        });
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.n_spins != self.n_spins {
            return Err(Error::domain(format!(
                "state has {} spins, operator acts on {}",
                psi.n_spins, self.n_spins
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); psi.dim()];
        self.apply_into(&psi.amps, &mut out);
        Ok(StateVector { n_spins: self.n_spins, amps: out })
    }

    /// `⟨psi|self|psi⟩`, real because the operator is Hermitian.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        let h = self.apply(psi)?;
        Ok(psi.inner(&h).re)
    }
}

/// `H = j0 C^2 + 2 Σ_k J_k C·s_k` in SWAP form.
pub fn hamiltonian_operator(spec: &HamiltonianSpec) -> SwapOperator {
    let nc = spec.n_central;
    let mut op = SwapOperator::new(spec.n_spins());
    // C^2 = (3/4) n_c + Σ_{i<j} 2 c_i·c_j
    op.add_constant(0.75 * nc as f64 * spec.j0);
    for i in 0..nc {
        for j in i + 1..nc {
            op.add_heisenberg(i, j, spec.j0);
        }
    }
    for (k, &jk) in spec.bath_couplings.iter().enumerate() {
        for i in 0..nc {
            op.add_heisenberg(i, nc + k, jk);
        }
    }
    op
}

/// Total spin squared of the central spins, `C^2`.
pub fn central_spin_squared(spec: &HamiltonianSpec) -> SwapOperator {
    let nc = spec.n_central;
    let mut op = SwapOperator::new(spec.n_spins());
    op.add_constant(0.75 * nc as f64);
    for i in 0..nc {
        for j in i + 1..nc {
            op.add_heisenberg(i, j, 1.0);
        }
    }
    op
}

/// Total spin squared of the bath, `S^2`.
pub fn bath_spin_squared(spec: &HamiltonianSpec) -> SwapOperator {
    let (nc, nb) = (spec.n_central, spec.n_bath());
    let mut op = SwapOperator::new(spec.n_spins());
    op.add_constant(0.75 * nb as f64);
    for k in 0..nb {
        for l in k + 1..nb {
            op.add_heisenberg(nc + k, nc + l, 1.0);
        }
    }
    op
}

pub fn apply_hamiltonian(spec: &HamiltonianSpec, psi: &StateVector) -> Result<StateVector> {
    if psi.n_spins != spec.n_spins() {
        return Err(Error::domain(format!(
            "state has {} spins, Hamiltonian acts on {}",
            psi.n_spins,
            spec.n_spins()
        )));
    }
    hamiltonian_operator(spec).apply(psi)
}

/// Interval containing the spectrum of `H`.
pub fn spectral_bounds(spec: &HamiltonianSpec) -> (f64, f64) {
    hamiltonian_operator(spec).spectral_bounds()
}

/// Upper bound on the spectral radius of `H`.
pub fn hamiltonian_norm_bound(spec: &HamiltonianSpec) -> f64 {
    let (lo, hi) = spectral_bounds(spec);
    lo.abs().max(hi.abs())
}

/// `⟨σ^z⟩` of one site.
pub fn expectation_sigma_z(psi: &StateVector, site: usize) -> Result<f64> {
    if site >= psi.n_spins {
        return Err(Error::domain(format!("site {site} outside {} spins", psi.n_spins)));
    }
    let bit = 1usize << site;
    Ok(psi
        .amps
        .iter()
        .enumerate()
        .map(|(x, a)| if x & bit != 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum())
}

/// Number of up spins in a basis state: the magnetization sector label.
pub fn total_sz_sector(basis_index: usize, n_spins: usize) -> u32 {
    let mask = if n_spins >= usize::BITS as usize { usize::MAX } else { (1usize << n_spins) - 1 };
    (basis_index & mask).count_ones()
}

/// Probability of each magnetization sector, indexed by the number of up
/// spins.
pub fn sector_weights(psi: &StateVector) -> Vec<f64> {
    let mut w = vec![0.0; psi.n_spins + 1];
    for (x, a) in psi.amps.iter().enumerate() {
        w[total_sz_sector(x, psi.n_spins) as usize] += a.norm_sqr();
    }
    w
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Distribution of the total bath spin `S` in a product state of spins
/// pointing along the given directions, indexed by `k` with `S = N/2 - k`.
///
/// Uses the fact that the direction-averaged distribution of `S·n` is
/// `Q(M) = Σ_{S >= |M|} p_S / (2S + 1)`; for a product state the `S·n`
/// statistics along any axis are a Poisson-binomial count, and the sphere
/// average is done with a quadrature exact for polynomials of degree `N`.
pub fn bath_spin_distribution(bath_states: &[BlochAngles]) -> Vec<f64> {
    let n = bath_states.len();
    let vectors: Vec<[f64; 3]> = bath_states.iter().map(|b| b.bloch_vector()).collect();
    let nodes = gauss_legendre(n / 2 + 1);
    let n_phi = n + 1;
    // q[u] = sphere average of P(u spins up along the axis)
    let mut q = vec![0.0; n + 1];
    let mut counts = vec![0.0; n + 1];
    for &(z, wz) in &nodes {
        let rho = (1.0 - z * z).max(0.0).sqrt();
        for a in 0..n_phi {
            let phi = TAU * a as f64 / n_phi as f64;
            let axis = [rho * phi.cos(), rho * phi.sin(), z];
            counts.iter_mut().for_each(|c| *c = 0.0);
            counts[0] = 1.0;
            for (k, v) in vectors.iter().enumerate() {
                let p = 0.5 * (1.0 + axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2]);
                for u in (1..=k + 1).rev() {
                    counts[u] = counts[u] * (1.0 - p) + counts[u - 1] * p;
                }
                counts[0] *= 1.0 - p;
            }
            let w = 0.5 * wz / n_phi as f64;
            for (qu, cu) in q.iter_mut().zip(&counts) {
                *qu += w * cu;
            }
        }
    }
    // M = u - N/2; S = N/2 - k has p_S = (2S + 1)(Q(S) - Q(S + 1))
    (0..=n / 2)
        .map(|k| {
            let twice_s = n - 2 * k;
            let u = n - k; // M = S
            let above = if u < n { q[u + 1] } else { 0.0 };
            (twice_s + 1) as f64 * (q[u] - above)
        })
        .collect()
}

//! `ψ(t) = e^{-iHt} ψ(0)` without storing `H`.
//!
//! The default method is a Chebyshev expansion of the propagator over one
//! fixed step, with the spectrum mapped into `[-1, 1]` by the bounds from
//! [`crate::hilbert::spectral_bounds`]. Lanczos (Krylov) and dense
//! diagonalization are available for cross-checks.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dense::{symmetric_eigen, DenseSystem};
use crate::error::{Error, Result};
use crate::hilbert::{expectation_sigma_z, hamiltonian_operator, HamiltonianSpec, StateVector, SwapOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Chebyshev,
    Krylov,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub method: Method,
    /// Largest time advanced by a single expansion.
    pub step: f64,
    /// Truncation error bound per step, in the Euclidean norm.
    pub tolerance: f64,
    /// Cap on the polynomial order or Krylov dimension.
    pub max_order: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { method: Method::Chebyshev, step: 0.1, tolerance: 1e-12, max_order: 256 }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.step > 0.0) || self.max_order < 4 {
            return Err(Error::Config(format!(
                "propagator needs tolerance > 0, step > 0, max_order >= 4 (got {:?})",
                self
            )));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

/// Bessel functions `J_0(x) .. J_n(x)` by Miller's backward recurrence,
/// normalized with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = n.max(x.abs().ceil() as usize) + 30 + (x.abs().sqrt() * 10.0) as usize;
    let start = start + start % 2;
    let (mut j_next, mut j_cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..start).rev() {
        // J_k = (2(k+1)/x) J_{k+1} - J_{k+2}
        let j_k = 2.0 * (k + 1) as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_k;
        if k <= n {
            out[k] = j_k;
        }
        if k % 2 == 0 {
            norm += if k == 0 { j_k } else { 2.0 * j_k };
        }
        if j_cur.abs() > 1e250 {
            let scale = 1e-250;
            j_cur *= scale;
            j_next *= scale;
            norm *= scale;
            for v in out.iter_mut().skip(k) {
                *v *= scale;
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

enum Engine {
    Chebyshev { op: SwapOperator, center: f64, half_width: f64 },
    Krylov { op: SwapOperator },
    Dense(DenseSystem),
}

/// A Hamiltonian prepared for repeated propagation.
pub struct Propagator {
    engine: Engine,
    config: PropagatorConfig,
    n_spins: usize,
}

impl Propagator {
    pub fn new(spec: &HamiltonianSpec, config: PropagatorConfig) -> Result<Self> {
        config.validate()?;
        let engine = match config.method {
            Method::Chebyshev => {
                let op = hamiltonian_operator(spec);
                let (lo, hi) = op.spectral_bounds();
                let center = 0.5 * (lo + hi);
                // an exactly degenerate spectrum still needs a non-zero width
                let half_width = (0.5 * (hi - lo)).max(1e-12);
                Engine::Chebyshev { op, center, half_width }
            }
            Method::Krylov => Engine::Krylov { op: hamiltonian_operator(spec) },
            Method::Dense => Engine::Dense(DenseSystem::new(spec)?),
        };
        Ok(Self { engine, config, n_spins: spec.n_spins() })
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    /// Advance `psi` by `t >= 0` in place, splitting into steps of at most
    /// `config.step`.
    pub fn advance(&self, psi: &mut StateVector, t: f64) -> Result<()> {
        if psi.n_spins() != self.n_spins {
            return Err(Error::domain(format!(
                "state has {} spins, propagator {}",
                psi.n_spins(),
                self.n_spins
            )));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("propagation time must be finite and >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(());
        }
        if let Engine::Dense(sys) = &self.engine {
            *psi = sys.evolve(psi, t)?;
            return Ok(());
        }
        let n_steps = (t / self.config.step).ceil().max(1.0) as usize;
        let dt = t / n_steps as f64;
        for _ in 0..n_steps {
            match &self.engine {
                Engine::Chebyshev { op, center, half_width } => {
                    chebyshev_step(op, *center, *half_width, psi, dt, &self.config)?
                }
                Engine::Krylov { op } => krylov_step(op, psi, dt, &self.config)?,
                Engine::Dense(_) => unreachable!(),
            }
        }
        Ok(())
    }

    pub fn propagate(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        let mut out = psi.clone();
        self.advance(&mut out, t)?;
        Ok(out)
    }
}

/// Expansion order for `e^{-ixX}`: the first `k > x` where `|J_k|` and
/// `|J_{k+1}|` drop below `tolerance / 10`.
fn chebyshev_order(x: f64, config: &PropagatorConfig) -> Result<usize> {
    let coeffs = bessel_j_sequence(x, config.max_order + 1);
    let cutoff = config.tolerance / 10.0;
    // J_k decreases monotonically once k > x
    (1..=config.max_order)
        .find(|&k| k as f64 > x && coeffs[k].abs() < cutoff && coeffs[k + 1].abs() < cutoff)
        .ok_or(Error::Convergence {
            order: config.max_order,
            residual: 2.0 * coeffs[config.max_order].abs(),
            tolerance: config.tolerance,
        })
}

// (-i)^k
const MINUS_I_POW: [C64; 4] = [
    C64 { re: 1.0, im: 0.0 },
    C64 { re: 0.0, im: -1.0 },
    C64 { re: -1.0, im: 0.0 },
    C64 { re: 0.0, im: 1.0 },
];

fn chebyshev_step(
    op: &SwapOperator,
    center: f64,
    half_width: f64,
    psi: &mut StateVector,
    dt: f64,
    config: &PropagatorConfig,
) -> Result<()> {
    let x = half_width * dt;
    let order = chebyshev_order(x, config)?;
    let coeffs = bessel_j_sequence(x, order);

    let dim = psi.dim();
    let zero = C64::new(0.0, 0.0);
    let inv_a = 1.0 / half_width;
    let mut prev: Vec<C64> = psi.amplitudes().to_vec();
    let mut cur = vec![zero; dim];
    let mut next = vec![zero; dim];

    let mut acc: Vec<C64> = prev.iter().map(|v| v * coeffs[0]).collect();
    // T_1 = X psi, X = (H - c) / a
    op.apply_into(&prev, &mut cur);
    for (c, p) in cur.iter_mut().zip(&prev) {
        *c = (*c - p * center) * inv_a;
    }
    let w1 = MINUS_I_POW[1] * (2.0 * coeffs[1]);
    for (a, c) in acc.iter_mut().zip(&cur) {
        *a += c * w1;
    }
    for k in 2..order {
        op.apply_into(&cur, &mut next);
        let wk = MINUS_I_POW[k % 4] * (2.0 * coeffs[k]);
        for ((n, (c, p)), a) in next.iter_mut().zip(cur.iter().zip(&prev)).zip(acc.iter_mut()) {
            *n = (*n - c * center) * (2.0 * inv_a) - p;
            *a += *n * wk;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    let global = C64::from_polar(1.0, -center * dt);
    for (out, a) in psi.amplitudes_mut().iter_mut().zip(acc) {
        *out = a * global;
    }
    Ok(())
}

/// One Chebyshev step of length `offsets.last()` with dense output: the
/// vectors `T_k(X) psi` are kept, and the state at every offset is a
/// recombination of them with that offset's Bessel coefficients. `psi` ends
/// at the last offset.
fn chebyshev_block<F>(
    op: &SwapOperator,
    center: f64,
    half_width: f64,
    psi: &mut StateVector,
    offsets: &[f64],
    config: &PropagatorConfig,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &StateVector) -> Result<()>,
{
    let span = *offsets.last().expect("non-empty block");
    let order = chebyshev_order(half_width * span, config)?;
    let dim = psi.dim();
    let zero = C64::new(0.0, 0.0);
    let inv_a = 1.0 / half_width;

    let mut terms: Vec<Vec<C64>> = Vec::with_capacity(order);
    terms.push(psi.amplitudes().to_vec());
    if order > 1 {
        let mut t1 = vec![zero; dim];
        op.apply_into(&terms[0], &mut t1);
        for (c, p) in t1.iter_mut().zip(&terms[0]) {
            *c = (*c - p * center) * inv_a;
        }
        terms.push(t1);
    }
    for k in 2..order {
        let mut next = vec![zero; dim];
        op.apply_into(&terms[k - 1], &mut next);
        for (n, (c, p)) in next.iter_mut().zip(terms[k - 1].iter().zip(&terms[k - 2])) {
            *n = (*n - c * center) * (2.0 * inv_a) - p;
        }
        terms.push(next);
    }

    for (j, &dt) in offsets.iter().enumerate() {
        let coeffs = bessel_j_sequence(half_width * dt, order);
        let global = C64::from_polar(1.0, -center * dt);
        let out = psi.amplitudes_mut();
        let w0 = global * coeffs[0];
        for (o, t) in out.iter_mut().zip(&terms[0]) {
            *o = t * w0;
        }
        for (k, term) in terms.iter().enumerate().skip(1) {
            let wk = global * MINUS_I_POW[k % 4] * (2.0 * coeffs[k]);
            for (o, t) in out.iter_mut().zip(term) {
                *o += t * wk;
            }
        }
        visit(j, psi)?;
    }
    Ok(())
}

/// Memory allowed for stored Chebyshev vectors in dense-output mode.
const DENSE_OUTPUT_BUDGET_BYTES: usize = 1 << 28;

fn krylov_step(op: &SwapOperator, psi: &mut StateVector, dt: f64, config: &PropagatorConfig) -> Result<()> {
    let dim = psi.dim();
    let beta = psi.norm();
    if beta == 0.0 {
        return Ok(());
    }
    let zero = C64::new(0.0, 0.0);
    let mut basis: Vec<Vec<C64>> = vec![psi.amplitudes().iter().map(|a| a / beta).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut offdiag: Vec<f64> = Vec::new();
    let mut w = vec![zero; dim];
    let m_max = config.max_order.min(dim);
    let mut last_residual = f64::INFINITY;

    for j in 0..m_max {
        op.apply_into(&basis[j], &mut w);
        let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
        alpha.push(a);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for v in &basis {
                let proj: C64 = v.iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
                for (x, v) in w.iter_mut().zip(v) {
                    *x -= v * proj;
                }
            }
        }
        let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let m = j + 1;
        let small = small_exponential(&alpha, &offdiag, dt)?;
        // a posteriori estimate: beta * h_{m+1,m} * |[e^{-iT dt} e_1]_m|
        let residual = beta * b * small[m - 1].norm();
        last_residual = residual;
        if residual < config.tolerance || b < 1e-14 || m == dim {
            let mut out = vec![zero; dim];
            for (v, c) in basis.iter().zip(&small) {
                for (o, x) in out.iter_mut().zip(v) {
                    *o += x * c * beta;
                }
            }
            psi.amplitudes_mut().copy_from_slice(&out);
            return Ok(());
        }
        offdiag.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::Convergence { order: m_max, residual: last_residual, tolerance: config.tolerance })
}

/// `e^{-i T dt} e_1` for the symmetric tridiagonal `T`.
fn small_exponential(alpha: &[f64], offdiag: &[f64], dt: f64) -> Result<Vec<C64>> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = offdiag[i];
            t[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = symmetric_eigen(&t)?;
    Ok((0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let v = &eig.vectors;
                    C64::from_polar(v[(r, k)] * v[(0, k)], -eig.values[k] * dt)
                })
                .sum()
        })
        .collect())
}

/// `e^{-iHt} psi`.
pub fn propagate(psi: &StateVector, spec: &HamiltonianSpec, t: f64, config: &PropagatorConfig) -> Result<StateVector> {
    Propagator::new(spec, *config)?.propagate(psi, t)
}

/// Uniform grid `t_i = i t_max / (n_samples - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_samples: usize) -> Result<Self> {
        let g = Self { t_max, n_samples };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config(format!("time grid needs n_samples >= 2 and t_max > 0 (got {self:?})")));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.t_max / (self.n_samples - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_samples {
            self.t_max
        } else {
            i as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.time(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesMetadata {
    pub spec_digest: String,
    pub seed: Option<u64>,
    pub realizations: usize,
}

/// `⟨σ^z(t)⟩` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub metadata: SeriesMetadata,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, metadata: SeriesMetadata) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::domain("times and values differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("times must be strictly increasing"));
        }
        Ok(Self { times, values, metadata })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|self_i - other_i|`; the grids must match.
    pub fn max_abs_diff(&self, other: &TimeSeries) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::domain("series lengths differ"));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// CSV with header `t,sigma1z` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,sigma1z")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::domain("empty CSV"))??;
        if header.trim() != "t,sigma1z" {
            return Err(Error::domain(format!("unexpected CSV header {header:?}")));
        }
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let mut field = || -> Result<f64> {
                cols.next()
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::domain(format!("bad CSV row {}: {line:?}", i + 2)))
            };
            times.push(field()?);
            values.push(field()?);
        }
        Self::new(times, values, SeriesMetadata::default())
    }
}

/// Step `psi0` across `grid`, calling `visit(i, t_i, ψ(t_i))` at every sample
/// (including `t_0 = 0`).
///
/// With the Chebyshev method, the samples falling inside one propagation step
/// are all read off the same expansion; otherwise each grid interval is one
/// propagation reusing the state.
pub fn evolve_with<F>(
    propagator: &Propagator,
    psi0: &StateVector,
    grid: &TimeGrid,
    mut visit: F,
) -> Result<StateVector>
where
    F: FnMut(usize, f64, &StateVector) -> Result<()>,
{
    grid.validate()?;
    let mut psi = psi0.clone();
    visit(0, 0.0, &psi)?;

    if let Engine::Chebyshev { op, center, half_width } = &propagator.engine {
        let config = &propagator.config;
        let per_block = (config.step / grid.spacing()).floor() as usize;
        let order = chebyshev_order(half_width * config.step, config).unwrap_or(config.max_order);
        let fits = order.saturating_mul(psi.dim()).saturating_mul(16) <= DENSE_OUTPUT_BUDGET_BYTES;
        if per_block >= 2 && fits {
            let mut start = 0;
            while start + 1 < grid.n_samples {
                let end = (start + per_block).min(grid.n_samples - 1);
                let t0 = grid.time(start);
                let offsets: Vec<f64> = (start + 1..=end).map(|i| grid.time(i) - t0).collect();
                chebyshev_block(op, *center, *half_width, &mut psi, &offsets, config, |j, state| {
                    let i = start + 1 + j;
                    visit(i, grid.time(i), state)
                })
                .map_err(|e| match e {
                    Error::Convergence { .. } => Error::Trajectory { time: grid.time(end), source: Box::new(e) },
                    other => other,
                })?;
                start = end;
            }
            return Ok(psi);
        }
    }

    let mut t_prev = 0.0;
    for i in 1..grid.n_samples {
        let t = grid.time(i);
        propagator
            .advance(&mut psi, t - t_prev)
            .map_err(|e| Error::Trajectory { time: t, source: Box::new(e) })?;
        visit(i, t, &psi)?;
        t_prev = t;
    }
    Ok(psi)
}

/// `⟨σ^z_site(t)⟩` along the trajectory of `psi0`.
pub fn evolve_observable(
    spec: &HamiltonianSpec,
    psi0: &StateVector,
    grid: &TimeGrid,
    site: usize,
    config: &PropagatorConfig,
) -> Result<TimeSeries> {
    let propagator = Propagator::new(spec, *config)?;
    let mut values = Vec::with_capacity(grid.n_samples);
    evolve_with(&propagator, psi0, grid, |_, _, psi| {
        values.push(expectation_sigma_z(psi, site)?);
        Ok(())
    })?;
    let metadata = SeriesMetadata { spec_digest: spec.digest(), seed: None, realizations: 1 };
    TimeSeries::new(grid.times(), values, metadata)
}

//! Experiment runner: realization-averaged simulations, envelope extraction
//! and the artifacts (CSV plus a JSON sidecar) written for each run.
//!
//! Every realization draws its bath state from its own ChaCha8 stream of the
//! configured seed, so results do not depend on how realizations are spread
//! over threads; averages are summed in realization order.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{sample_curve, AnalyticParams, Curve};
use crate::error::{Error, Result};
use crate::hilbert::{
    bath_spin_squared, build_initial_state, default_central_pattern, expectation_sigma_z, hamiltonian_operator,
    sector_weights, BathMeasure, HamiltonianSpec, Orientation,
};
use crate::propagator::{evolve_with, Method, Propagator, PropagatorConfig, SeriesMetadata, TimeGrid, TimeSeries};
use crate::spin_algebra::{weight_gaussian, WeightTable};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest bath for which [`emit_weights`] writes a table.
pub const WEIGHTS_MAX_N: u32 = 60;

/// Samples per oscillation period on the default grid.
pub const SAMPLES_PER_PERIOD: f64 = 40.0;

/// `half_width * step` used when no propagator step is configured.
const AUTO_STEP_PHASE: f64 = 6.0;

/// Stream offset separating coupling draws from bath-state draws.
const COUPLING_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    EqualCoupling,
    RandomCoupling,
    ParitySweep,
    Weights,
    AnalyticCurve,
}

/// Full description of one run. Unset optional fields are derived from the
/// others when the run starts (see [`ExperimentConfig::resolved_grid`] and
/// [`ExperimentConfig::propagator_for`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_central: usize,
    pub n_bath: usize,
    pub j0: f64,
    /// Mean bath coupling.
    pub j: f64,
    /// Relative spread `δ`: couplings uniform in `[J(1-δ), J(1+δ)]`.
    pub jitter: f64,
    /// Explicit couplings, overriding `j` and `jitter`.
    pub couplings: Option<Vec<f64>>,
    pub central_pattern: Option<Vec<Orientation>>,
    pub seed: u64,
    pub realizations: usize,
    pub grid: Option<TimeGrid>,
    pub bath_state_measure: BathMeasure,
    pub propagator: Option<PropagatorConfig>,
    /// Central-spin counts visited by the parity sweep.
    pub parity_central: Vec<usize>,
    /// Curve written by the analytic experiment.
    pub curve: Curve,
    /// Conservation checks run on every `diagnostic_stride`-th sample.
    pub diagnostic_stride: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::EqualCoupling,
            n_central: 2,
            n_bath: 13,
            j0: 8.0,
            j: 0.128,
            jitter: 0.0,
            couplings: None,
            central_pattern: None,
            seed: 1,
            realizations: 20,
            grid: None,
            bath_state_measure: BathMeasure::Haar,
            propagator: None,
            parity_central: vec![1, 2, 3],
            curve: Curve::ClosedForm,
            diagnostic_stride: 10,
            output: None,
        }
    }
}

/// Angular frequency of the central oscillation for `n_central` spins:
/// the splitting `n_c (J0 - J)` between the two largest central multiplets.
pub fn oscillation_frequency(n_central: usize, j0: f64, j: f64) -> Option<f64> {
    (n_central >= 2).then(|| n_central as f64 * (j0 - j).abs())
}

pub fn oscillation_period(n_central: usize, j0: f64, j: f64) -> Option<f64> {
    oscillation_frequency(n_central, j0, j).filter(|w| *w > 0.0).map(|w| TAU / w)
}

/// Grid reaching three times the envelope minimum `sqrt(3/N)/J` with
/// [`SAMPLES_PER_PERIOD`] samples per oscillation. Without a bath the grid
/// covers ten periods.
pub fn default_grid(n_central: usize, n_bath: usize, j0: f64, j: f64) -> Result<TimeGrid> {
    let period = oscillation_period(n_central, j0, j).unwrap_or(TAU / j0.abs().max(f64::MIN_POSITIVE));
    let t_max = if n_bath > 0 && j != 0.0 {
        3.0 * (3.0 / n_bath as f64).sqrt() / j.abs()
    } else {
        10.0 * period
    };
    let n_samples = (t_max / period * SAMPLES_PER_PERIOD).ceil() as usize + 1;
    TimeGrid::new(t_max, n_samples)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        Ok(c)
    }

    /// Overlay the fields present in `text` onto `self`.
    pub fn merged_with_json(&self, text: &str) -> Result<Self> {
        let overlay: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
        if !overlay.is_object() {
            return Err(Error::Config("config JSON must be an object".into()));
        }
        let mut base = serde_json::to_value(self)?;
        merge_json(&mut base, overlay);
        serde_json::from_value(base).map_err(|e| Error::Config(format!("config JSON: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.diagnostic_stride == 0 {
            return bad("diagnostic_stride must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return bad(format!("jitter must lie in [0, 1), got {}", self.jitter));
        }
        if !self.j0.is_finite() || !self.j.is_finite() || self.j0 == 0.0 {
            return bad("j0 must be finite and nonzero, j finite".into());
        }
        if let Some(c) = &self.couplings {
            if c.len() != self.n_bath {
                return bad(format!("{} couplings given for {} bath spins", c.len(), self.n_bath));
            }
        }
        if let Some(p) = &self.central_pattern {
            if p.len() != self.n_central {
                return bad(format!("central pattern of length {} for {} central spins", p.len(), self.n_central));
            }
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if let Some(p) = &self.propagator {
            p.validate()?;
        }
        match self.experiment {
            Experiment::Weights if self.n_bath as u32 > WEIGHTS_MAX_N || self.n_bath == 0 => {
                bad(format!("weights need 1 <= N <= {WEIGHTS_MAX_N}, got {}", self.n_bath))
            }
            Experiment::ParitySweep => {
                if let Some(n) = self.parity_central.iter().find(|n| !(1..=3).contains(*n)) {
                    return bad(format!("parity sweep supports 1, 2 or 3 central spins, got {n}"));
                }
                if self.parity_central.is_empty() {
                    return bad("parity sweep needs at least one central spin count".into());
                }
                Ok(())
            }
            Experiment::AnalyticCurve if self.n_bath == 0 => bad("analytic curve needs N >= 1".into()),
            _ => Ok(()),
        }
    }

    /// Hamiltonian with the mean coupling (or the explicit couplings).
    pub fn base_spec(&self) -> Result<HamiltonianSpec> {
        self.spec_for(self.n_central)
    }

    fn spec_for(&self, n_central: usize) -> Result<HamiltonianSpec> {
        let couplings = self.couplings.clone().unwrap_or_else(|| vec![self.j; self.n_bath]);
        HamiltonianSpec::new(n_central, self.j0, couplings).map_err(config_error)
    }

    pub fn resolved_grid(&self) -> Result<TimeGrid> {
        match self.grid {
            Some(g) => Ok(g),
            None => default_grid(self.n_central.max(2), self.n_bath, self.j0, self.j),
        }
    }

    fn resolved_grid_for(&self, n_central: usize) -> Result<TimeGrid> {
        match self.grid {
            Some(g) => Ok(g),
            None => default_grid(n_central.max(2), self.n_bath, self.j0, self.j),
        }
    }

    /// The configured propagator, or a Chebyshev one whose step spans
    /// a fixed phase of the spectrum of `spec`.
    pub fn propagator_for(&self, spec: &HamiltonianSpec) -> PropagatorConfig {
        self.propagator.unwrap_or_else(|| {
            let (lo, hi) = hamiltonian_operator(spec).spectral_bounds();
            let half_width = ((hi - lo) / 2.0).max(f64::MIN_POSITIVE);
            PropagatorConfig { method: Method::Chebyshev, step: AUTO_STEP_PHASE / half_width, tolerance: 1e-10, max_order: 256 }
        })
    }

    fn pattern_for(&self, n_central: usize) -> Vec<Orientation> {
        match &self.central_pattern {
            Some(p) if p.len() == n_central => p.clone(),
            _ => default_central_pattern(n_central),
        }
    }

    /// Couplings used by realization `index`.
    pub fn couplings_for(&self, index: usize) -> Vec<f64> {
        if let Some(c) = &self.couplings {
            return c.clone();
        }
        if self.jitter == 0.0 {
            return vec![self.j; self.n_bath];
        }
        let mut rng = realization_rng(self.seed, COUPLING_STREAM + index as u64);
        (0..self.n_bath).map(|_| self.j * (1.0 + self.jitter * (2.0 * rng.gen::<f64>() - 1.0))).collect()
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Domain(msg) => Error::Config(msg),
        other => other,
    }
}

fn merge_json(base: &mut serde_json::Value, overlay: serde_json::Value) {
    match (base, overlay) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge_json(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

fn realization_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Largest deviations from the conserved quantities seen along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_norm_drift: f64,
    /// Largest `|⟨H⟩ - E0| / max(|E0|, 1)`.
    pub max_energy_drift: f64,
    /// Largest change in any magnetization sector probability.
    pub max_sector_leak: f64,
    /// Largest probability found in sectors that were empty at `t = 0`.
    pub max_sector_escape: f64,
    /// Largest change in the bath `⟨S^2⟩`.
    pub max_bath_spin_drift: f64,
}

impl Diagnostics {
    fn merge(self, o: Diagnostics) -> Diagnostics {
        Diagnostics {
            max_norm_drift: self.max_norm_drift.max(o.max_norm_drift),
            max_energy_drift: self.max_energy_drift.max(o.max_energy_drift),
            max_sector_leak: self.max_sector_leak.max(o.max_sector_leak),
            max_sector_escape: self.max_sector_escape.max(o.max_sector_escape),
            max_bath_spin_drift: self.max_bath_spin_drift.max(o.max_bath_spin_drift),
        }
    }
}

struct Realization {
    values: Vec<f64>,
    diagnostics: Diagnostics,
}

struct Trajectory<'a> {
    config: &'a ExperimentConfig,
    spec: HamiltonianSpec,
    pattern: Vec<Orientation>,
    grid: TimeGrid,
}

impl Trajectory<'_> {
    fn run(&self, index: usize) -> Result<Realization> {
        let config = self.config;
        let spec = HamiltonianSpec::new(self.spec.n_central, self.spec.j0, config.couplings_for(index))?;
        let mut rng = realization_rng(config.seed, index as u64);
        let bath = config.bath_state_measure.sample(spec.n_bath(), &mut rng);
        let psi0 = build_initial_state(&spec, &bath, &self.pattern)?;
        let propagator = Propagator::new(&spec, config.propagator_for(&spec))?;

        let h = hamiltonian_operator(&spec);
        let s2 = bath_spin_squared(&spec);
        let e0 = h.expectation(&psi0)?;
        let e_scale = e0.abs().max(1.0);
        let s2_0 = s2.expectation(&psi0)?;
        let sectors0 = sector_weights(&psi0);

        let last = self.grid.n_samples - 1;
        let mut values = vec![0.0; self.grid.n_samples];
        let mut d = Diagnostics::default();
        evolve_with(&propagator, &psi0, &self.grid, |i, _, psi| {
            values[i] = expectation_sigma_z(psi, 0)?;
            if i % config.diagnostic_stride == 0 || i == last {
                d.max_norm_drift = d.max_norm_drift.max((psi.norm() - 1.0).abs());
                d.max_energy_drift = d.max_energy_drift.max((h.expectation(psi)? - e0).abs() / e_scale);
                d.max_bath_spin_drift = d.max_bath_spin_drift.max((s2.expectation(psi)? - s2_0).abs());
                let w = sector_weights(psi);
                let leak = w.iter().zip(&sectors0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let escape: f64 = w.iter().zip(&sectors0).filter(|(_, &b)| b == 0.0).map(|(a, _)| a).sum();
                d.max_sector_leak = d.max_sector_leak.max(leak);
                d.max_sector_escape = d.max_sector_escape.max(escape);
            }
            Ok(())
        })?;
        Ok(Realization { values, diagnostics: d })
    }
}

/// Realization-averaged `⟨σ1z⟩` and the worst diagnostics over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub series: TimeSeries,
    pub diagnostics: Diagnostics,
}

fn average(runs: &[Realization], grid: &TimeGrid, metadata: SeriesMetadata) -> Result<TimeSeries> {
    let mut mean = vec![0.0; grid.n_samples];
    for r in runs {
        for (m, v) in mean.iter_mut().zip(&r.values) {
            *m += v;
        }
    }
    let n = runs.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    TimeSeries::new(grid.times(), mean, metadata)
}

fn run_ensemble(config: &ExperimentConfig, n_central: usize) -> Result<Ensemble> {
    let spec = config.spec_for(n_central)?;
    let grid = config.resolved_grid_for(n_central)?;
    let traj = Trajectory { config, spec: spec.clone(), pattern: config.pattern_for(n_central), grid };
    let results: Vec<Result<Realization>> = (0..config.realizations).into_par_iter().map(|i| traj.run(i)).collect();

    let mut done = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(r) if failure.is_none() => done.push(r),
            Ok(_) => {}
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    let metadata = |count: usize| SeriesMetadata { spec_digest: spec.digest(), seed: Some(config.seed), realizations: count };
    if let Some(e) = failure {
        if let (Some(out), false) = (&config.output, done.is_empty()) {
            let partial = average(&done, &grid, metadata(done.len()))?;
            write_series(&with_suffix(out, "partial"), &partial)?;
        }
        return Err(e);
    }
    let diagnostics = done.iter().fold(Diagnostics::default(), |d, r| d.merge(r.diagnostics));
    Ok(Ensemble { series: average(&done, &grid, metadata(done.len()))?, diagnostics })
}

/// Peaks of `|⟨σ1z⟩|` and statistics over the last third of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub peak_times: Vec<f64>,
    pub peak_values: Vec<f64>,
    pub tail_mean: f64,
    pub tail_stddev: f64,
}

impl EnvelopeResult {
    pub fn len(&self) -> usize {
        self.peak_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peak_times.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,peak")?;
        for (t, v) in self.peak_times.iter().zip(&self.peak_values) {
            writeln!(out, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

/// Local maxima of `|value|` at least `0.4 * period` apart.
pub fn extract_envelope(series: &TimeSeries, oscillation_period: f64) -> Result<EnvelopeResult> {
    let n = series.len();
    if n < 3 || !(oscillation_period > 0.0) {
        return Err(Error::domain("envelope needs at least 3 samples and a positive period"));
    }
    let dt = (series.times[n - 1] - series.times[0]) / (n - 1) as f64;
    if oscillation_period / dt < 8.0 - 1e-9 {
        return Err(Error::domain(format!(
            "grid resolves the period with {:.1} samples, at least 8 are needed",
            oscillation_period / dt
        )));
    }
    let a: Vec<f64> = series.values.iter().map(|v| v.abs()).collect();
    let min_gap = 0.4 * oscillation_period;
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 0..n - 1 {
        let rising = i == 0 || a[i] >= a[i - 1];
        if !(rising && a[i] > a[i + 1]) {
            continue;
        }
        let t = series.times[i];
        match peaks.last_mut() {
            Some(last) if t - last.0 < min_gap => {
                if a[i] > last.1 {
                    *last = (t, a[i]);
                }
            }
            _ => peaks.push((t, a[i])),
        }
    }
    if peaks.len() < 3 {
        return Err(Error::domain(format!("found {} envelope peaks, at least 3 are needed", peaks.len())));
    }
    let tail = &peaks[peaks.len() - peaks.len().div_ceil(3)..];
    let k = tail.len() as f64;
    let tail_mean = tail.iter().map(|p| p.1).sum::<f64>() / k;
    let tail_stddev = if tail.len() > 1 {
        (tail.iter().map(|p| (p.1 - tail_mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EnvelopeResult {
        peak_times: peaks.iter().map(|p| p.0).collect(),
        peak_values: peaks.iter().map(|p| p.1).collect(),
        tail_mean,
        tail_stddev,
    })
}

/// `series` minus its centered one-period moving average.
pub fn detrend(series: &TimeSeries, oscillation_period: f64) -> Result<TimeSeries> {
    let n = series.len();
    if n < 2 || !(oscillation_period > 0.0) {
        return Err(Error::domain("detrending needs at least 2 samples and a positive period"));
    }
    let dt = (series.times[n - 1] - series.times[0]) / (n - 1) as f64;
    let half = ((oscillation_period / dt) / 2.0).round().max(1.0) as usize;
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in series.values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            series.values[i] - (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect();
    TimeSeries::new(series.times.clone(), values, series.metadata.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualCouplingRun {
    pub numeric: TimeSeries,
    pub closed_form: TimeSeries,
    /// Finite-`N` multiplet sum; absent without a bath.
    pub semianalytic: Option<TimeSeries>,
    pub envelope: EnvelopeResult,
    pub closed_form_gap: f64,
    pub semianalytic_gap: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Averaged simulation at equal couplings next to the analytic curves at the
/// same raw times.
pub fn run_equal_coupling(config: &ExperimentConfig) -> Result<EqualCouplingRun> {
    config.validate()?;
    let spec = config.base_spec()?;
    if !spec.is_equal_coupling() || config.jitter != 0.0 {
        return Err(Error::Config("equal-coupling run needs equal couplings and zero jitter".into()));
    }
    if config.n_central != 2 {
        return Err(Error::Config("the analytic comparison is defined for two central spins".into()));
    }
    let grid = config.resolved_grid()?;
    let ens = run_ensemble(config, 2)?;
    let (closed_form, semianalytic) = if spec.n_bath() == 0 {
        let values = grid.times().iter().map(|t| (2.0 * spec.j0 * t).cos()).collect();
        (TimeSeries::new(grid.times(), values, SeriesMetadata::default())?, None)
    } else {
        let p = AnalyticParams::from_spec(&spec)?;
        (sample_curve(&p, &grid, Curve::ClosedForm)?, Some(sample_curve(&p, &grid, Curve::Semianalytic)?))
    };
    let period = oscillation_period(2, spec.j0, config.j).unwrap_or(TAU / (2.0 * spec.j0.abs()));
    let envelope = extract_envelope(&ens.series, period)?;
    let closed_form_gap = ens.series.max_abs_diff(&closed_form)?;
    let semianalytic_gap = semianalytic.as_ref().map(|s| ens.series.max_abs_diff(s)).transpose()?;
    Ok(EqualCouplingRun {
        numeric: ens.series,
        closed_form,
        semianalytic,
        envelope,
        closed_form_gap,
        semianalytic_gap,
        diagnostics: ens.diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomCouplingRun {
    pub series: TimeSeries,
    pub envelope: EnvelopeResult,
    pub diagnostics: Diagnostics,
}

/// Averaged simulation with couplings drawn per realization.
pub fn run_random_coupling(config: &ExperimentConfig) -> Result<RandomCouplingRun> {
    config.validate()?;
    let ens = run_ensemble(config, config.n_central)?;
    let period = oscillation_period(config.n_central.max(2), config.j0, config.j)
        .ok_or_else(|| Error::Config("no central oscillation for these parameters".into()))?;
    let envelope = extract_envelope(&ens.series, period)?;
    Ok(RandomCouplingRun { series: ens.series, envelope, diagnostics: ens.diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityEntry {
    pub n_central: usize,
    pub series: TimeSeries,
    /// `None` for a single central spin, which has no oscillation.
    pub period: Option<f64>,
    /// Peaks of `|⟨σ1z⟩|`.
    pub envelope: Option<EnvelopeResult>,
    /// Peaks of the oscillating part, after removing the one-period mean.
    pub oscillation_envelope: Option<EnvelopeResult>,
    pub diagnostics: Diagnostics,
}

/// The same equal-coupling bath seen by 1, 2 or 3 central spins.
pub fn run_parity_sweep(config: &ExperimentConfig) -> Result<BTreeMap<usize, ParityEntry>> {
    let mut c = config.clone();
    c.experiment = Experiment::ParitySweep;
    c.validate()?;
    if c.jitter != 0.0 || c.couplings.as_ref().is_some_and(|v| v.windows(2).any(|w| w[0] != w[1])) {
        return Err(Error::Config("parity sweep runs at equal coupling".into()));
    }
    let mut out = BTreeMap::new();
    for &nc in &c.parity_central {
        let ens = run_ensemble(&c, nc)?;
        let period = oscillation_period(nc, c.j0, c.j);
        let (envelope, oscillation_envelope) = match period {
            Some(p) => (Some(extract_envelope(&ens.series, p)?), Some(extract_envelope(&detrend(&ens.series, p)?, p)?)),
            None => (None, None),
        };
        out.insert(
            nc,
            ParityEntry { n_central: nc, series: ens.series, period, envelope, oscillation_envelope, diagnostics: ens.diagnostics },
        );
    }
    Ok(out)
}

/// CSV rows `twice_S,weight,gaussian` for a bath of `n` spins.
pub fn emit_weights(n: u32) -> Result<String> {
    if n == 0 || n > WEIGHTS_MAX_N {
        return Err(Error::domain(format!("weights table needs 1 <= N <= {WEIGHTS_MAX_N}, got {n}")));
    }
    let table = WeightTable::new(n)?;
    let mut s = String::from("twice_S,weight,gaussian\n");
    for e in &table.entries {
        let g = weight_gaussian(n, e.spin.value());
        s.push_str(&format!("{},{:.16e},{:.16e}\n", e.spin.twice_value(), e.weight, g));
    }
    Ok(s)
}

/// `run.csv` -> `run.<suffix>.csv`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    series.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

/// JSON record written next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Sidecar {
    pub version: &'static str,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub grid: Option<TimeGrid>,
    pub propagator: Option<PropagatorConfig>,
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn diag_json(d: &Diagnostics) -> serde_json::Value {
    serde_json::to_value(d).unwrap_or_default()
}

fn envelope_json(e: &EnvelopeResult) -> serde_json::Value {
    serde_json::json!({ "peaks": e.len(), "tail_mean": e.tail_mean, "tail_stddev": e.tail_stddev })
}

/// Execute `config` and, if it names an output path, write the CSV artifacts
/// and the JSON sidecar.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let out = config.output.clone();
    let mut outputs = Vec::new();
    let mut emit = |path: PathBuf, write: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        write(&path)?;
        outputs.push(path);
        Ok(())
    };
    let mut grid = None;
    let mut propagator = None;
    let summary = match config.experiment {
        Experiment::EqualCoupling | Experiment::RandomCoupling => {
            let spec = config.base_spec()?;
            grid = Some(config.resolved_grid()?);
            propagator = Some(config.propagator_for(&spec));
            if config.experiment == Experiment::EqualCoupling {
                let r = run_equal_coupling(config)?;
                if let Some(o) = &out {
                    emit(o.clone(), &|p| write_series(p, &r.numeric))?;
                    emit(with_suffix(o, "closed_form"), &|p| write_series(p, &r.closed_form))?;
                    if let Some(s) = &r.semianalytic {
                        emit(with_suffix(o, "semianalytic"), &|p| write_series(p, s))?;
                    }
                    emit(with_suffix(o, "envelope"), &|p| write_envelope(p, &r.envelope))?;
                }
                serde_json::json!({
                    "envelope": envelope_json(&r.envelope),
                    "closed_form_gap": r.closed_form_gap,
                    "semianalytic_gap": r.semianalytic_gap,
                    "diagnostics": diag_json(&r.diagnostics),
                })
            } else {
                let r = run_random_coupling(config)?;
                if let Some(o) = &out {
                    emit(o.clone(), &|p| write_series(p, &r.series))?;
                    emit(with_suffix(o, "envelope"), &|p| write_envelope(p, &r.envelope))?;
                }
                serde_json::json!({
                    "envelope": envelope_json(&r.envelope),
                    "jitter": config.jitter,
                    "diagnostics": diag_json(&r.diagnostics),
                })
            }
        }
        Experiment::ParitySweep => {
            let sweep = run_parity_sweep(config)?;
            let mut entries = serde_json::Map::new();
            for (nc, e) in &sweep {
                if let Some(o) = &out {
                    emit(with_suffix(o, &format!("nc{nc}")), &|p| write_series(p, &e.series))?;
                }
                entries.insert(
                    nc.to_string(),
                    serde_json::json!({
                        "period": e.period,
                        "envelope": e.envelope.as_ref().map(envelope_json),
                        "oscillation_envelope": e.oscillation_envelope.as_ref().map(envelope_json),
                        "diagnostics": diag_json(&e.diagnostics),
                    }),
                );
            }
            serde_json::Value::Object(entries)
        }
        Experiment::Weights => {
            let csv = emit_weights(config.n_bath as u32)?;
            if let Some(o) = &out {
                emit(o.clone(), &|p| Ok(std::fs::write(p, &csv)?))?;
            }
            serde_json::json!({ "n_bath": config.n_bath, "rows": csv.lines().count() - 1, "csv": csv })
        }
        Experiment::AnalyticCurve => {
            let g = config.resolved_grid()?;
            grid = Some(g);
            let p = AnalyticParams::new(config.n_bath as u32, config.j / config.j0, config.j0)?;
            let s = sample_curve(&p, &g, config.curve)?;
            if let Some(o) = &out {
                emit(o.clone(), &|path| write_series(path, &s))?;
            }
            serde_json::json!({
                "curve": config.curve,
                "samples": s.len(),
                "envelope_minimum_time": p.minimum_time() / config.j0,
            })
        }
    };
    if let Some(o) = &out {
        let sidecar = Sidecar {
            version: VERSION,
            seed: config.seed,
            config: config.clone(),
            grid,
            propagator,
            outputs: outputs.clone(),
            summary: summary.clone(),
        };
        let path = sidecar_path(o);
        std::fs::write(&path, serde_json::to_string_pretty(&sidecar)? + "\n")?;
        outputs.push(path);
    }
    Ok(RunReport { outputs, summary })
}

fn write_envelope(path: &Path, e: &EnvelopeResult) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    e.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::envelope;

    fn small(experiment: Experiment) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            n_bath: 6,
            j0: 1.0,
            j: 0.05,
            realizations: 3,
            grid: Some(TimeGrid::new(30.0, 601).unwrap()),
            ..Default::default()
        }
    }

    fn synthetic(f: impl Fn(f64) -> f64, t_max: f64, n: usize) -> TimeSeries {
        let g = TimeGrid::new(t_max, n).unwrap();
        TimeSeries::new(g.times(), g.times().iter().map(|&t| f(t)).collect(), SeriesMetadata::default()).unwrap()
    }

    #[test]
    fn envelope_of_pure_cosine() {
        let w = 3.0;
        let s = synthetic(|t| (w * t).cos(), 20.0, 20_001);
        let e = extract_envelope(&s, TAU / w).unwrap();
        assert!(e.len() > 15);
        assert!(e.peak_values.iter().all(|v| (v - 1.0).abs() < 1e-3 && *v <= 1.0 + 1e-9));
        assert!((e.tail_mean - 1.0).abs() < 1e-3);
    }

    #[test]
    fn envelope_tracks_synthetic_amplitude() {
        let p = AnalyticParams::rescaled(13, 0.016).unwrap();
        let w = p.frequency();
        let s = synthetic(|t| envelope(&p, t) * (w * t).cos(), 90.0, 90 * 40 / 3);
        let e = extract_envelope(&s, TAU / w).unwrap();
        for (t, v) in e.peak_times.iter().zip(&e.peak_values) {
            assert!((v - envelope(&p, *t)).abs() < 1e-2, "t = {t}");
        }
    }

    #[test]
    fn envelope_errors() {
        let s = synthetic(|_| 0.0, 10.0, 1001);
        assert!(extract_envelope(&s, 1.0).is_err());
        let s = synthetic(|t| t.cos(), 100.0, 101);
        assert!(extract_envelope(&s, TAU).is_err());
    }

    #[test]
    fn detrend_removes_offset() {
        let s = synthetic(|t| 0.25 + 0.1 * (3.0 * t).cos(), 40.0, 4001);
        let d = detrend(&s, TAU / 3.0).unwrap();
        let e = extract_envelope(&d, TAU / 3.0).unwrap();
        assert!((e.tail_mean - 0.1).abs() < 5e-3);
    }

    #[test]
    fn weights_csv() {
        let csv = emit_weights(2).unwrap();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "twice_S,weight,gaussian");
        assert!(rows[1..].iter().any(|r| r.starts_with("2,7.5000000000000000e-1,")));
        assert!(rows[1..].iter().any(|r| r.starts_with("0,2.5000000000000000e-1,")));
        assert!(emit_weights(61).is_err());
        let total: f64 = emit_weights(13)
            .unwrap()
            .lines()
            .skip(1)
            .map(|r| r.split(',').nth(1).unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_bath_is_undamped() {
        let c = ExperimentConfig { n_bath: 0, realizations: 1, grid: Some(TimeGrid::new(5.0, 401).unwrap()), ..small(Experiment::EqualCoupling) };
        let r = run_equal_coupling(&c).unwrap();
        assert!(r.closed_form_gap < 1e-8);
        assert!((r.envelope.tail_mean - 1.0).abs() < 1e-2);
    }

    #[test]
    fn zero_jitter_reproduces_equal_coupling() {
        let eq = run_equal_coupling(&small(Experiment::EqualCoupling)).unwrap();
        let rnd = run_random_coupling(&small(Experiment::RandomCoupling)).unwrap();
        assert_eq!(eq.numeric.values, rnd.series.values);
        assert!(eq.diagnostics.max_bath_spin_drift < 1e-8);
        let jittered = ExperimentConfig { jitter: 0.3, ..small(Experiment::RandomCoupling) };
        let r = run_random_coupling(&jittered).unwrap();
        assert!(r.diagnostics.max_bath_spin_drift > 1e-3);
        assert_ne!(jittered.couplings_for(0), jittered.couplings_for(1));
    }

    #[test]
    fn global_flip_negates_series() {
        use crate::hilbert::BlochAngles;
        use crate::propagator::evolve_observable;
        let spec = HamiltonianSpec::equal(2, 1.0, 5, 0.05).unwrap();
        let bath = BathMeasure::Haar.sample(5, &mut realization_rng(3, 0));
        let flipped_bath: Vec<BlochAngles> = bath.iter().map(|b| b.antipodal()).collect();
        let up_down = build_initial_state(&spec, &bath, &[Orientation::Up, Orientation::Down]).unwrap();
        let down_up = build_initial_state(&spec, &flipped_bath, &[Orientation::Down, Orientation::Up]).unwrap();
        let grid = TimeGrid::new(20.0, 401).unwrap();
        let cfg = PropagatorConfig::default();
        let a = evolve_observable(&spec, &up_down, &grid, 0, &cfg).unwrap();
        let b = evolve_observable(&spec, &down_up, &grid, 0, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn config_json_overlay_and_validation() {
        let base = ExperimentConfig::default();
        let c = base.merged_with_json(r#"{"n_bath": 5, "seed": 9}"#).unwrap();
        assert_eq!((c.n_bath, c.seed, c.j0), (5, 9, 8.0));
        assert!(base.merged_with_json(r#"{"bogus": 1}"#).is_err());
        let bad = ExperimentConfig { realizations: 0, ..base.clone() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ExperimentConfig { experiment: Experiment::ParitySweep, parity_central: vec![4], ..base.clone() };
        assert!(bad.validate().is_err());
        let g = default_grid(2, 13, 8.0, 0.128).unwrap();
        assert!((g.t_max - 11.26).abs() < 0.01);
        assert_eq!(g.n_samples, 1130);
    }
}

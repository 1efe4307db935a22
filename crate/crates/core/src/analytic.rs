//! Equal-coupling solution in closed and semi-analytic form.
//!
//! Times and couplings are in units of `J0` unless a function says it takes
//! raw time: with `j0 != 1` the raw time is rescaled as `t -> t * j0` and the
//! coupling stored in [`AnalyticParams::j`] is already `J / J0`.
//!
//! The closed form is
//! `A(t) cos 2(1 - J)t` with `A(t) = 1/3 + 2/3 (1 - N J^2 t^2) exp(-N J^2 t^2 / 2)`.
//! The semi-analytic form sums every bath multiplet `(S, Sz)` with exact
//! Clebsch-Gordan weights and exact level spacings, so it stays valid at small
//! `N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::HamiltonianSpec;
use crate::propagator::{SeriesMetadata, TimeGrid, TimeSeries};
use crate::spin_algebra::{allowed_spins, cg_exact_unchecked, weight_exact, CgTriple, HalfIntSpin, Projection};

/// `N J^2 t^2` at the envelope minimum.
pub const ENVELOPE_MINIMUM_ARGUMENT: f64 = 3.0;

/// Smallest value of the envelope, `1/3 - (4/3) e^{-3/2}`.
pub fn envelope_minimum() -> f64 {
    1.0 / 3.0 - 4.0 / 3.0 * (-1.5f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticParams {
    pub n_bath: u32,
    /// Equal coupling in units of `J0`.
    pub j: f64,
    /// Scale between raw and rescaled time.
    pub j0: f64,
}

impl AnalyticParams {
    pub fn new(n_bath: u32, j: f64, j0: f64) -> Result<Self> {
        let p = Self { n_bath, j, j0 };
        p.validate()?;
        Ok(p)
    }

    /// Rescaled parameters (`j0 = 1`).
    pub fn rescaled(n_bath: u32, j: f64) -> Result<Self> {
        Self::new(n_bath, j, 1.0)
    }

    /// Parameters of an equal-coupling Hamiltonian with two central spins.
    pub fn from_spec(spec: &HamiltonianSpec) -> Result<Self> {
        if !spec.is_equal_coupling() {
            return Err(Error::domain("analytic solution needs equal couplings"));
        }
        let j = spec.bath_couplings.first().copied().unwrap_or(0.0);
        Self::new(spec.n_bath() as u32, j / spec.j0, spec.j0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bath == 0 || self.j0 == 0.0 || !self.j0.is_finite() || !self.j.is_finite() {
            return Err(Error::Config(format!("analytic parameters need N >= 1 and finite j0 != 0 (got {self:?})")));
        }
        Ok(())
    }

    /// `N J^2`, the Gaussian decay rate squared.
    pub fn n_j_squared(&self) -> f64 {
        f64::from(self.n_bath) * self.j * self.j
    }

    /// Rescaled time at which the envelope reaches its minimum.
    pub fn minimum_time(&self) -> f64 {
        (ENVELOPE_MINIMUM_ARGUMENT / self.n_j_squared()).sqrt()
    }

    /// Angular frequency `2(1 - J)` of the coherent oscillation, rescaled.
    pub fn frequency(&self) -> f64 {
        2.0 * (1.0 - self.j)
    }

    fn rescale(&self, raw_t: f64) -> f64 {
        raw_t * self.j0
    }
}

/// Envelope as a function of `x = N J^2 t^2`.
pub fn envelope_of_argument(x: f64) -> f64 {
    1.0 / 3.0 + 2.0 / 3.0 * (1.0 - x) * (-x / 2.0).exp()
}

/// `A(t)` at rescaled time `t`.
pub fn envelope(params: &AnalyticParams, t: f64) -> f64 {
    envelope_of_argument(params.n_j_squared() * t * t)
}

/// `A(t) cos 2(1 - J)t` at raw time `t`.
pub fn sigma1z_closed_form(params: &AnalyticParams, t: f64) -> f64 {
    let tr = params.rescale(t);
    envelope(params, tr) * (params.frequency() * tr).cos()
}

/// Which level spacings [`sigma1z_sector`] uses for the `L = S ± 1` channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorPhases {
    /// `±2JS` on top of the carrier `2(1 - J)`.
    LargeS,
    /// `J [L(L+1) - S(S+1)]` on top of the carrier.
    #[default]
    Exact,
}

/// Rescaled energy of `|L, Sz⟩` in the triplet sector, measured from the
/// central singlet.
fn channel_energy(s: HalfIntSpin, twice_l: i32, j: f64) -> f64 {
    let l = f64::from(twice_l) / 2.0;
    2.0 * (1.0 - j) + j * (l * (l + 1.0) - s.casimir())
}

/// Coherence term of `⟨σ1z(t)⟩` for the bath in `|S, Sz⟩`, at rescaled time
/// `t`, using the channel amplitudes `cg`.
pub fn sigma1z_sector(
    s: HalfIntSpin,
    sz: Projection,
    j: f64,
    t: f64,
    cg: &CgTriple,
    phases: SectorPhases,
) -> Result<f64> {
    if !s.admits(sz) {
        return Err(Error::domain(format!("projection {} not allowed for S = {s}", sz.value())));
    }
    let carrier = (2.0 * (1.0 - j) * t).cos();
    Ok(match phases {
        SectorPhases::LargeS => {
            let side = cg.lower * cg.lower + cg.upper * cg.upper;
            carrier * (side * (2.0 * j * s.value() * t).cos() + cg.same * cg.same)
        }
        SectorPhases::Exact => {
            let ts = s.twice_value() as i32;
            [(ts - 2, cg.lower), (ts, cg.same), (ts + 2, cg.upper)]
                .iter()
                .filter(|(_, a)| *a != 0.0)
                .map(|&(tl, a)| a * a * (channel_energy(s, tl, j) * t).cos())
                .sum()
        }
    })
}

/// Multiplet-averaged channel weights for one bath spin, scaled by `P(S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorChannels {
    pub spin: HalfIntSpin,
    pub probability: f64,
    /// Mean of `|cg|^2` over `Sz` for `L = S-1, S, S+1`.
    pub channel_weights: [f64; 3],
}

/// Precomputed `(S, L)` table for fast evaluation of the semi-analytic curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Semianalytic {
    params: AnalyticParams,
    sectors: Vec<SectorChannels>,
}

impl Semianalytic {
    pub fn new(params: AnalyticParams) -> Result<Self> {
        params.validate()?;
        let mut sectors: Vec<SectorChannels> = Vec::new();
        for s in allowed_spins(params.n_bath) {
            let probability = weight_exact(params.n_bath, s)?;
            let mut w = [0.0; 3];
            for m in s.projections() {
                let cg = cg_exact_unchecked(s, m);
                for (acc, a) in w.iter_mut().zip(cg.as_array()) {
                    *acc += a * a;
                }
            }
            let mult = f64::from(s.multiplicity());
            sectors.push(SectorChannels { spin: s, probability, channel_weights: w.map(|x| x / mult) });
        }
        sectors.sort_by_key(|c| c.spin);
        Ok(Self { params, sectors })
    }

    pub fn params(&self) -> &AnalyticParams {
        &self.params
    }

    pub fn sectors(&self) -> &[SectorChannels] {
        &self.sectors
    }

    /// Value at raw time `t`; sectors are summed in ascending `S`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let tr = self.params.rescale(t);
        let j = self.params.j;
        self.sectors
            .iter()
            .map(|c| {
                let ts = c.spin.twice_value() as i32;
                let inner: f64 = [ts - 2, ts, ts + 2]
                    .iter()
                    .zip(c.channel_weights)
                    .filter(|(_, w)| *w != 0.0)
                    .map(|(&tl, w)| w * (channel_energy(c.spin, tl, j) * tr).cos())
                    .sum();
                c.probability * inner
            })
            .sum()
    }
}

/// Finite-`N` semi-analytic `⟨σ1z⟩` at raw time `t`.
pub fn sigma1z_semianalytic(params: &AnalyticParams, t: f64) -> Result<f64> {
    Ok(Semianalytic::new(*params)?.evaluate(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    ClosedForm,
    Semianalytic,
    Envelope,
}

/// Sample a curve on a raw-time grid, in the propagator's CSV schema.
pub fn sample_curve(params: &AnalyticParams, grid: &TimeGrid, curve: Curve) -> Result<TimeSeries> {
    grid.validate()?;
    params.validate()?;
    let times = grid.times();
    let values = match curve {
        Curve::ClosedForm => times.iter().map(|&t| sigma1z_closed_form(params, t)).collect(),
        Curve::Envelope => times.iter().map(|&t| envelope(params, params.rescale(t))).collect(),
        Curve::Semianalytic => {
            let table = Semianalytic::new(*params)?;
            times.iter().map(|&t| table.evaluate(t)).collect()
        }
    };
    TimeSeries::new(times, values, SeriesMetadata::default())
}

/// Largest `|semianalytic - closed form|` over rescaled `[0, t_max]`.
pub fn closed_form_gap(params: &AnalyticParams, t_max: f64, n_samples: usize) -> Result<f64> {
    let p = AnalyticParams::rescaled(params.n_bath, params.j)?;
    let grid = TimeGrid::new(t_max, n_samples)?;
    let a = sample_curve(&p, &grid, Curve::Semianalytic)?;
    let b = sample_curve(&p, &grid, Curve::ClosedForm)?;
    a.max_abs_diff(&b)
}

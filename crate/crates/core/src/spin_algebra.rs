//! Exact combinatorics of spin-1/2 addition.
//!
//! Everything here works with spin quantum numbers stored as twice their
//! value, so `S = 3/2` is `HalfIntSpin::from_twice(3)`. The three pieces are
//! the multiplet counting for `N` spins 1/2, the weight `P(S)` with which a
//! maximally mixed bath occupies total spin `S`, and the Clebsch-Gordan
//! amplitudes of `|S, m⟩ ⊗ |1, 0⟩` on the coupled states `|L, m⟩`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` for which [`binomial`] is guaranteed exact.
pub const BINOMIAL_MAX_N: u32 = 64;

/// A non-negative spin quantum number, stored as `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfIntSpin {
    twice: u32,
}

impl HalfIntSpin {
    pub const ZERO: Self = Self { twice: 0 };
    pub const HALF: Self = Self { twice: 1 };
    pub const ONE: Self = Self { twice: 2 };

    pub const fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    pub const fn integer(s: u32) -> Self {
        Self { twice: 2 * s }
    }

    pub const fn twice_value(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub const fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// `2S + 1`.
    pub const fn multiplicity(self) -> u32 {
        self.twice + 1
    }

    /// `S(S + 1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }

    /// All projections `-S, -S + 1, ..., S`, in ascending order.
    pub fn projections(self) -> impl Iterator<Item = Projection> {
        let t = self.twice as i32;
        (0..=self.twice as i32).map(move |k| Projection::from_twice(2 * k - t))
    }

    /// Whether `m` is an allowed projection for this spin.
    pub fn admits(self, m: Projection) -> bool {
        m.twice.unsigned_abs() <= self.twice && (m.twice - self.twice as i32) % 2 == 0
    }
}

impl fmt::Display for HalfIntSpin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// A (possibly negative) magnetic quantum number, stored as `2m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Projection {
    twice: i32,
}

impl Projection {
    pub const fn from_twice(twice: i32) -> Self {
        Self { twice }
    }

    pub const fn twice_value(self) -> i32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }
}

impl From<HalfIntSpin> for Projection {
    fn from(s: HalfIntSpin) -> Self {
        Self { twice: s.twice as i32 }
    }
}

/// `n! / (k! (n - k)!)`, exact for `n <= 64`.
pub fn binomial(n: u32, k: u32) -> Result<u128> {
    if n > BINOMIAL_MAX_N {
        return Err(Error::domain(format!("binomial: n = {n} exceeds {BINOMIAL_MAX_N}")));
    }
    if k > n {
        return Err(Error::domain(format!("binomial: k = {k} > n = {n}")));
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) at every step
        c = c * u128::from(n - i) / u128::from(i + 1);
    }
    Ok(c)
}

/// Number of multiplets with total spin `S = N/2 - k` among `N` spins 1/2.
///
/// `g(k) = C(N, k) - C(N, k - 1)`, with `C(N, -1) = 0`.
pub fn multiplet_degeneracy(n: u32, k: u32) -> Result<u128> {
    if k > n / 2 {
        return Err(Error::domain(format!("multiplet_degeneracy: k = {k} > N/2 for N = {n}")));
    }
    let upper = binomial(n, k)?;
    let lower = if k == 0 { 0 } else { binomial(n, k - 1)? };
    Ok(upper - lower)
}

/// Total bath spins compatible with `n` spins 1/2, from `N/2` downward.
pub fn allowed_spins(n: u32) -> impl Iterator<Item = HalfIntSpin> {
    (0..=n / 2).map(move |k| HalfIntSpin::from_twice(n - 2 * k))
}

fn check_compatible(n: u32, s: HalfIntSpin) -> Result<u32> {
    if s.twice > n || (n - s.twice) % 2 != 0 {
        return Err(Error::domain(format!("total spin {s} is not reachable with {n} spins 1/2")));
    }
    Ok((n - s.twice) / 2)
}

/// Numerator of `P(S)` over the common denominator `2^N`: `g(k) (2S + 1)`.
/// Exact integers are only available for `N <= 64`.
pub fn weight_numerator(n: u32, s: HalfIntSpin) -> Result<u128> {
    let k = check_compatible(n, s)?;
    Ok(multiplet_degeneracy(n, k)? * u128::from(s.multiplicity()))
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| (f64::from(n - i) / f64::from(i + 1)).ln()).sum()
}

/// Weight of total spin `S` in the maximally mixed state of `N` spins 1/2:
/// `2^-N C(N, N/2 - S) (2S + 1)^2 / (N/2 + S + 1)`.
///
/// Exact integer arithmetic up to `N = 64`; larger baths are evaluated in log
/// space.
pub fn weight_exact(n: u32, s: HalfIntSpin) -> Result<f64> {
    let k = check_compatible(n, s)?;
    if n <= BINOMIAL_MAX_N {
        let num = weight_numerator(n, s)?;
        return Ok(num as f64 / 2f64.powi(n as i32));
    }
    let twice_s = f64::from(s.twice);
    let ln_w = ln_binomial(n, k) + 2.0 * (twice_s + 1.0).ln()
        - ((f64::from(n) + twice_s) / 2.0 + 1.0).ln()
        - f64::from(n) * std::f64::consts::LN_2;
    Ok(ln_w.exp())
}

/// Continuum form of the weight, `(8 S^2 / N) / sqrt(2 pi D) exp(-S^2 / 2D)`
/// with `D = N / 4`. Defined for `N >= 1` and `S >= 0`.
pub fn weight_gaussian(n: u32, s: f64) -> f64 {
    let nf = f64::from(n);
    let d = nf / 4.0;
    (8.0 * s * s / nf) / (2.0 * std::f64::consts::PI * d).sqrt() * (-s * s / (2.0 * d)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub spin: HalfIntSpin,
    /// Exact numerator over `2^N`, when `N <= 64`.
    pub numerator: Option<u128>,
    pub weight: f64,
}

/// `P(S)` for every allowed `S`, from `N/2` downward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub n_bath: u32,
    pub entries: Vec<WeightEntry>,
}

impl WeightTable {
    pub fn new(n_bath: u32) -> Result<Self> {
        let entries = allowed_spins(n_bath)
            .map(|spin| {
                let numerator = if n_bath <= BINOMIAL_MAX_N {
                    Some(weight_numerator(n_bath, spin)?)
                } else {
                    None
                };
                Ok(WeightEntry { spin, numerator, weight: weight_exact(n_bath, spin)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_bath, entries })
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    pub fn weight(&self, s: HalfIntSpin) -> Option<f64> {
        self.entries.iter().find(|e| e.spin == s).map(|e| e.weight)
    }

    /// CSV with header `twice_S,weight`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "twice_S,weight")?;
        for e in &self.entries {
            writeln!(out, "{},{:.17e}", e.spin.twice_value(), e.weight)?;
        }
        Ok(())
    }
}

/// Amplitudes of `|S, m⟩ ⊗ |1, 0⟩` on `|L, m⟩` for `L = S - 1, S, S + 1`.
///
/// Channels that do not exist (`L < 0` or `L < |m|`) carry amplitude zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgTriple {
    pub lower: f64,
    pub same: f64,
    pub upper: f64,
}

impl CgTriple {
    /// A bath singlet: `|0, 0⟩ ⊗ |1, 0⟩` is purely `L = 1`.
    pub const BATH_SINGLET: Self = Self { lower: 0.0, same: 0.0, upper: 1.0 };

    pub fn norm_sqr(&self) -> f64 {
        self.lower * self.lower + self.same * self.same + self.upper * self.upper
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.lower, self.same, self.upper]
    }

    /// Largest absolute amplitude difference.
    pub fn max_abs_diff(&self, other: &CgTriple) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_cg_args(s: HalfIntSpin, sz: Projection) -> Result<()> {
    if s.twice == 0 {
        return Err(Error::domain("Clebsch-Gordan decomposition needs S > 0"));
    }
    if !s.admits(sz) {
        return Err(Error::domain(format!("projection {} not allowed for S = {s}", sz.value())));
    }
    Ok(())
}

/// Large-`S` form of the decomposition:
/// `(-sqrt((1 - x^2)/2), x, sqrt((1 - x^2)/2))` with `x = Sz / S`.
pub fn cg_decompose_large_s(s: HalfIntSpin, sz: Projection) -> Result<CgTriple> {
    check_cg_args(s, sz)?;
    let x = sz.value() / s.value();
    let side = ((1.0 - x * x) / 2.0).max(0.0).sqrt();
    Ok(CgTriple { lower: -side, same: x, upper: side })
}

/// A state in the `m`-subspace of `S ⊗ 1`, indexed by the spin-1 projection
/// `mu = +1, 0, -1` (bath projection `m - mu`).
type Coupled = [f64; 3];

const MU: [i32; 3] = [2, 0, -2];

fn ladder(twice_j: i32, twice_m: i32) -> f64 {
    // sqrt(j(j+1) - m(m-1)) in twice units
    let j = f64::from(twice_j) / 2.0;
    let m = f64::from(twice_m) / 2.0;
    (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
}

/// Apply the total lowering operator `S- + C-` to a state at projection `m`.
fn lower_total(v: &Coupled, twice_s: i32, twice_m: i32) -> Coupled {
    let mut out = [0.0; 3];
    for (i, &mu) in MU.iter().enumerate() {
        if v[i] == 0.0 {
            continue;
        }
        let bath = twice_m - mu;
        // bath lowering keeps mu
        if bath - 2 >= -twice_s {
            out[i] += ladder(twice_s, bath) * v[i];
        }
        // spin-1 lowering moves mu -> mu - 1 (index + 1)
        if i + 1 < 3 {
            out[i + 1] += ladder(2, mu) * v[i];
        }
    }
    out
}

fn dot(a: &Coupled, b: &Coupled) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut Coupled) {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

/// Coupled state `|L, m⟩` of `S ⊗ 1`, built from its highest weight by
/// repeated lowering. Highest weights are fixed by orthogonality to the
/// larger-`L` multiplets, with the component of maximal bath projection
/// positive (Condon-Shortley with the bath spin coupled first).
fn coupled_state(twice_s: i32, twice_l: i32, twice_m: i32) -> Coupled {
    let mut top: Coupled = [0.0; 3];
    // component with bath projection S at m = L: mu = L - S
    let lead = MU.iter().position(|&mu| mu == twice_l - twice_s).expect("L within S +- 1");
    top[lead] = 1.0;
    let mut l_above = twice_s + 2;
    while l_above > twice_l {
        let higher = lowered_to(twice_s, l_above, twice_l);
        let proj = dot(&top, &higher);
        for (t, h) in top.iter_mut().zip(higher) {
            *t -= proj * h;
        }
        l_above -= 2;
    }
    normalize(&mut top);
    let mut v = top;
    let mut m = twice_l;
    while m > twice_m {
        v = lower_total(&v, twice_s, m);
        normalize(&mut v);
        m -= 2;
    }
    v
}

fn lowered_to(twice_s: i32, twice_l: i32, twice_m: i32) -> Coupled {
    coupled_state(twice_s, twice_l, twice_m)
}

/// Exact amplitudes of `|S, Sz⟩ ⊗ |1, 0⟩` on `|L, Sz⟩`, `L ∈ {S-1, S, S+1}`,
/// built by ladder recursion. Converges to [`cg_decompose_large_s`] as
/// `S → ∞`.
pub fn cg_decompose_exact(s: HalfIntSpin, sz: Projection) -> Result<CgTriple> {
    check_cg_args(s, sz)?;
    Ok(cg_exact_unchecked(s, sz))
}

/// Same as [`cg_decompose_exact`] but also accepts `S = 0`.
pub(crate) fn cg_exact_unchecked(s: HalfIntSpin, sz: Projection) -> CgTriple {
    if s.twice == 0 {
        return CgTriple::BATH_SINGLET;
    }
    let ts = s.twice as i32;
    let tm = sz.twice;
    // amplitude on |L, m⟩ is the mu = 0 component of that state
    let channel = |twice_l: i32| -> f64 {
        if twice_l < 0 || twice_l < tm.abs() {
            0.0
        } else {
            coupled_state(ts, twice_l, tm)[1]
        }
    };
    CgTriple {
        lower: channel(ts - 2),
        same: channel(ts),
        upper: channel(ts + 2),
    }
}

/// Multiplet average of `(Sz / S)^2` over `Sz ∈ {-S, ..., S}`, averaged over
/// the supplied spins. This is the weight of the `L = S` channel in the
/// large-`S` decomposition; it equals `(S + 1) / (3 S)` for each `S` and tends
/// to 1/3.
pub fn subspace_probability_third(spins: &[HalfIntSpin]) -> Result<f64> {
    if spins.is_empty() {
        return Err(Error::domain("subspace_probability_third: no spins supplied"));
    }
    let mut total = 0.0;
    for &s in spins {
        if s.twice < 2 {
            return Err(Error::domain(format!("subspace_probability_third: S = {s} below 1")));
        }
        let sv = s.value();
        let sum: f64 = s.projections().map(|m| (m.value() / sv).powi(2)).sum();
        total += sum / f64::from(s.multiplicity());
    }
    Ok(total / spins.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(twice: u32) -> HalfIntSpin {
        HalfIntSpin::from_twice(twice)
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(13, 0).unwrap(), 1);
        assert_eq!(binomial(13, 6).unwrap(), 1716);
        assert_eq!(binomial(64, 32).unwrap(), 1_832_624_140_942_590_534);
        assert!(binomial(3, 4).is_err());
        assert!(binomial(65, 1).is_err());
    }

    #[test]
    fn binomial_pascal() {
        for n in 1..=64 {
            for k in 1..n {
                let lhs = binomial(n, k).unwrap();
                let rhs = binomial(n - 1, k - 1).unwrap() + binomial(n - 1, k).unwrap();
                assert_eq!(lhs, rhs, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn degeneracy_small() {
        for n in 0..20 {
            assert_eq!(multiplet_degeneracy(n, 0).unwrap(), 1);
        }
        assert_eq!(multiplet_degeneracy(4, 1).unwrap(), 3);
        assert_eq!(multiplet_degeneracy(4, 2).unwrap(), 2);
        assert!(multiplet_degeneracy(4, 3).is_err());
    }

    #[test]
    fn dimension_sum_rule() {
        for n in 0..=30u32 {
            let total: u128 = (0..=n / 2)
                .map(|k| multiplet_degeneracy(n, k).unwrap() * u128::from(n - 2 * k + 1))
                .sum();
            assert_eq!(total, 1u128 << n, "N={n}");
        }
    }

    #[test]
    fn weights_two_spins() {
        assert_eq!(weight_exact(2, half(2)).unwrap(), 0.75);
        assert_eq!(weight_exact(2, half(0)).unwrap(), 0.25);
        assert!(weight_exact(2, half(1)).is_err());
        assert!(weight_exact(2, half(4)).is_err());
    }

    #[test]
    fn weight_closed_form_matches_degeneracy_form() {
        for n in 1..=40u32 {
            for s in allowed_spins(n) {
                let k = (n - s.twice_value()) / 2;
                let sv = s.value();
                let direct = binomial(n, k).unwrap() as f64 * (2.0 * sv + 1.0).powi(2)
                    / (f64::from(n) / 2.0 + sv + 1.0)
                    / 2f64.powi(n as i32);
                let w = weight_exact(n, s).unwrap();
                assert!((w - direct).abs() <= 1e-14 * direct.max(1e-300), "N={n} S={s}");
            }
        }
    }

    #[test]
    fn weight_tables_close() {
        for n in 0..=60 {
            let t = WeightTable::new(n).unwrap();
            assert!((t.total() - 1.0).abs() <= 1e-12, "N={n}: {}", t.total());
            assert!(t.entries.iter().all(|e| e.weight >= 0.0));
            let num: u128 = t.entries.iter().map(|e| e.numerator.unwrap()).sum();
            assert_eq!(num, 1u128 << n);
        }
    }

    #[test]
    fn log_space_weights_close() {
        for n in [65u32, 100, 200, 400, 1000] {
            let t = WeightTable::new(n).unwrap();
            assert!((t.total() - 1.0).abs() <= 1e-11, "N={n}: {}", t.total());
            assert!(t.entries.iter().all(|e| e.numerator.is_none()));
        }
        // log-space and integer paths agree where both apply
        let s = HalfIntSpin::integer(5);
        let direct = weight_exact(64, s).unwrap();
        let k = (64 - 10) / 2;
        let ln_w = ln_binomial(64, k) + 2.0 * 11f64.ln() - 38f64.ln() - 64.0 * std::f64::consts::LN_2;
        assert!((ln_w.exp() / direct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_vanishes_at_zero() {
        for n in 1..50 {
            assert_eq!(weight_gaussian(n, 0.0), 0.0);
        }
    }

    #[test]
    fn gaussian_tracks_exact_at_large_n() {
        let n = 400;
        let s = HalfIntSpin::integer(14); // mode of P(S), sqrt(N/2)
        let exact = weight_exact(n, s).unwrap();
        let approx = weight_gaussian(n, s.value());
        assert!(((approx - exact) / exact).abs() < 0.02, "{approx} vs {exact}");
    }

    #[test]
    fn large_s_limits() {
        let s = HalfIntSpin::integer(7);
        let top = cg_decompose_large_s(s, s.into()).unwrap();
        assert_eq!(top.as_array(), [0.0, 1.0, 0.0]);
        let mid = cg_decompose_large_s(s, Projection::from_twice(0)).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mid.lower + r).abs() < 1e-15 && mid.same == 0.0 && (mid.upper - r).abs() < 1e-15);
        let t = cg_decompose_large_s(HalfIntSpin::integer(20), Projection::from_twice(14)).unwrap();
        assert!((t.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(cg_decompose_large_s(HalfIntSpin::ZERO, Projection::from_twice(0)).is_err());
        assert!(cg_decompose_large_s(s, Projection::from_twice(16)).is_err());
        assert!(cg_decompose_large_s(s, Projection::from_twice(3)).is_err());
    }

    /// Closed-form 1 ⊗ S coefficients, bath coupled first.
    fn tabulated(s: f64, m: f64) -> [f64; 3] {
        let lower = if s >= 1.0 { -((s - m) * (s + m) / (s * (2.0 * s + 1.0))).sqrt() } else { 0.0 };
        let same = m / (s * (s + 1.0)).sqrt();
        let upper = ((s - m + 1.0) * (s + m + 1.0) / ((2.0 * s + 1.0) * (s + 1.0))).sqrt();
        [lower, same, upper]
    }

    #[test]
    fn exact_cg_matches_table() {
        for twice_s in 1..=40u32 {
            let s = half(twice_s);
            for m in s.projections() {
                let cg = cg_decompose_exact(s, m).unwrap();
                let want = tabulated(s.value(), m.value());
                for (a, b) in cg.as_array().iter().zip(want) {
                    assert!((a - b).abs() < 1e-12, "S={s} m={} got {cg:?}", m.value());
                }
                assert!((cg.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_cg_converges_to_large_s() {
        // O(1/S) in the bulk; at |m| = S the upper channel is sqrt(1/(S+1))
        for (s, tol) in [(50u32, 1e-2), (500, 1e-3)] {
            let s = HalfIntSpin::integer(s);
            for m in s.projections().filter(|m| 2 * m.twice_value().abs() <= s.twice_value() as i32) {
                let a = cg_decompose_exact(s, m).unwrap();
                let b = cg_decompose_large_s(s, m).unwrap();
                assert!(a.max_abs_diff(&b) < tol, "S={s} m={}: {a:?} vs {b:?}", m.value());
            }
        }
    }

    #[test]
    fn exact_cg_edge_cases() {
        let one = cg_decompose_exact(HalfIntSpin::ONE, Projection::from_twice(2)).unwrap();
        assert!((one.norm_sqr() - 1.0).abs() < 1e-12);
        // S = 1/2: no L = S - 1 channel
        let h = cg_decompose_exact(HalfIntSpin::HALF, Projection::from_twice(1)).unwrap();
        assert_eq!(h.lower, 0.0);
        assert!((h.norm_sqr() - 1.0).abs() < 1e-12);
        assert!(cg_decompose_exact(HalfIntSpin::ZERO, Projection::from_twice(0)).is_err());
        assert_eq!(cg_exact_unchecked(HalfIntSpin::ZERO, Projection::from_twice(0)), CgTriple::BATH_SINGLET);
    }

    #[test]
    fn third_probability() {
        let p = subspace_probability_third(&[HalfIntSpin::integer(50)]).unwrap();
        assert!((p - 51.0 / 150.0).abs() < 1e-14);
        let mut last = f64::INFINITY;
        for s in [1, 2, 5, 10, 50, 100, 500] {
            let p = subspace_probability_third(&[HalfIntSpin::integer(s)]).unwrap();
            assert!(p > 1.0 / 3.0 && p < last);
            last = p;
        }
        assert!((last - 1.0 / 3.0).abs() < 1e-3);
        assert!(subspace_probability_third(&[]).is_err());
        assert!(subspace_probability_third(&[HalfIntSpin::HALF]).is_err());
    }

    #[test]
    fn exact_same_channel_averages_to_third() {
        // m^2 / (S(S+1)) averaged over the multiplet is exactly 1/3
        for twice_s in 2..=30u32 {
            let s = half(twice_s);
            let avg: f64 = s
                .projections()
                .map(|m| cg_decompose_exact(s, m).unwrap().same.powi(2))
                .sum::<f64>()
                / f64::from(s.multiplicity());
            assert!((avg - 1.0 / 3.0).abs() < 1e-12, "S={s}: {avg}");
        }
    }

    #[test]
    fn display() {
        assert_eq!(half(3).to_string(), "3/2");
        assert_eq!(half(4).to_string(), "2");
    }
}

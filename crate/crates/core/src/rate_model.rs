//! Cyclic intensity functions `dc + sum_j d_j cos(2 pi nu_j t + phi_j)`.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Number of grid points used for the nonnegativity check.
pub const NONNEG_GRID: usize = 100_000;
const NONNEG_TOL: f64 = 1e-9;
const DUPLICATE_REL: f64 = 1e-12;

/// Anything the simulator and the MSE integrator can evaluate.
pub trait Intensity: Sync {
    fn rate(&self, t: f64) -> f64;

    /// A bound on `rate` over `[0, horizon]`, used for thinning.
    fn upper_bound(&self, horizon: f64) -> f64;

    /// `int_0^t rate(u) du`.
    fn cumulative(&self, t: f64) -> f64;

    /// Points in `(0, horizon)` where the rate is not smooth.
    fn breakpoints(&self, _horizon: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Highest oscillation frequency, used to size quadrature panels.
    fn max_frequency(&self) -> f64;
}

/// One cosine term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub freq: f64,
    pub amp: f64,
    pub phase: f64,
}

impl Component {
    pub fn new(freq: f64, amp: f64, phase: f64) -> Self {
        Self { freq, amp, phase: phase.rem_euclid(TAU) }
    }

    /// Complex amplitude at `+freq`; its conjugate sits at `-freq`.
    pub fn complex_amplitude(&self) -> Complex64 {
        Complex64::from_polar(0.5 * self.amp, self.phase)
    }
}

#[derive(Deserialize)]
struct RateModelRepr {
    dc: f64,
    components: Vec<Component>,
    band_limit: f64,
}

/// A cyclic intensity with frequencies in `(0, band_limit]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateModelRepr")]
pub struct RateModel {
    dc: f64,
    components: Vec<Component>,
    band_limit: f64,
    /// Minimum over the check grid, recorded for estimator outputs.
    #[serde(skip)]
    min_rate: Option<f64>,
}

impl TryFrom<RateModelRepr> for RateModel {
    type Error = Error;

    fn try_from(r: RateModelRepr) -> Result<Self> {
        let components = r.components.into_iter().map(|c| Component::new(c.freq, c.amp, c.phase)).collect();
        let model = Self { dc: r.dc, components, band_limit: r.band_limit, min_rate: None };
        model.check_structure(false)?;
        Ok(model)
    }
}

impl RateModel {
    /// Build a validated model: frequencies positive, distinct and in band,
    /// and the rate nonnegative on a dense grid over `[0, horizon]`.
    pub fn new(dc: f64, components: Vec<Component>, band_limit: f64, horizon: f64) -> Result<Self> {
        let model = Self::unchecked(dc, components, band_limit);
        model.check_structure(true)?;
        model.check_nonnegative(horizon)?;
        Ok(model)
    }

    /// Build from estimator output. Structure is still validated, but a
    /// negative excursion is recorded rather than rejected.
    pub fn from_estimate(dc: f64, components: Vec<Component>, band_limit: f64, horizon: f64) -> Result<Self> {
        let mut model = Self::unchecked(dc, components, band_limit);
        model.check_structure(false)?;
        model.min_rate = Some(model.grid_minimum(horizon, NONNEG_GRID).0);
        Ok(model)
    }

    /// Estimator output without the negative-excursion scan, for inner
    /// loops that only evaluate the rate.
    pub(crate) fn from_estimate_unscanned(dc: f64, components: Vec<Component>, band_limit: f64) -> Result<Self> {
        let model = Self::unchecked(dc, components, band_limit);
        model.check_structure(false)?;
        Ok(model)
    }

    /// Constant rate with no cyclic part.
    pub fn constant(dc: f64, band_limit: f64) -> Result<Self> {
        Self::new(dc, Vec::new(), band_limit, 1.0)
    }

    fn unchecked(dc: f64, components: Vec<Component>, band_limit: f64) -> Self {
        let components = components.into_iter().map(|c| Component::new(c.freq, c.amp, c.phase)).collect();
        Self { dc, components, band_limit, min_rate: None }
    }

    fn check_structure(&self, strict_amplitudes: bool) -> Result<()> {
        if !(self.band_limit.is_finite() && self.band_limit > 0.0) {
            return Err(Error::InvalidParameter(format!("band limit must be positive, got {}", self.band_limit)));
        }
        if !self.dc.is_finite() {
            return Err(Error::InvalidParameter("dc level must be finite".into()));
        }
        for (i, c) in self.components.iter().enumerate() {
            if !(c.freq.is_finite() && c.freq > 0.0) {
                return Err(Error::InvalidFrequency(c.freq));
            }
            if c.freq > self.band_limit {
                return Err(Error::OutOfBand { freq: c.freq, band: self.band_limit });
            }
            let amp_ok = if strict_amplitudes { c.amp > 0.0 } else { c.amp >= 0.0 };
            if !(c.amp.is_finite() && amp_ok && c.phase.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad amplitude/phase for component at {}", c.freq)));
            }
            for other in &self.components[..i] {
                if (other.freq - c.freq).abs() <= DUPLICATE_REL * other.freq.max(c.freq) {
                    return Err(Error::InvalidFrequency(c.freq));
                }
            }
        }
        Ok(())
    }

    /// Reject models that dip below zero on `[0, horizon]`.
    pub fn check_nonnegative(&self, horizon: f64) -> Result<()> {
        let (min_value, at) = self.grid_minimum(horizon, NONNEG_GRID);
        if min_value < -NONNEG_TOL {
            return Err(Error::NegativeRate { min_value, at });
        }
        Ok(())
    }

    /// Minimum of the rate on a uniform grid over `[0, horizon]`, refined so
    /// that every period of the fastest component sees at least 32 points.
    pub fn grid_minimum(&self, horizon: f64, points: usize) -> (f64, f64) {
        let per_period = (32.0 * self.max_frequency() * horizon).ceil() as usize;
        let n = points.max(per_period).max(2);
        let step = horizon / (n - 1) as f64;
        // Phasors advance by one rotation per step and are recomputed
        // exactly at the start of every block to stop drift.
        const BLOCK: usize = 256;
        let coefs: Vec<Complex64> = self.components.iter().map(|c| Complex64::from_polar(c.amp, c.phase)).collect();
        let rotations: Vec<Complex64> =
            self.components.iter().map(|c| Complex64::from_polar(1.0, TAU * c.freq * step)).collect();
        let mut best = (f64::INFINITY, 0.0);
        let mut z = vec![Complex64::new(0.0, 0.0); coefs.len()];
        for i in 0..n {
            let t = i as f64 * step;
            if i % BLOCK == 0 {
                for ((zk, c), comp) in z.iter_mut().zip(&coefs).zip(&self.components) {
                    *zk = c * Complex64::from_polar(1.0, TAU * comp.freq * t);
                }
            }
            let value = self.dc + z.iter().map(|zk| zk.re).sum::<f64>();
            if value < best.0 {
                best = (value, t);
            }
            for (zk, r) in z.iter_mut().zip(&rotations) {
                *zk *= r;
            }
        }
        best
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn band_limit(&self) -> f64 {
        self.band_limit
    }

    /// Recorded grid minimum for estimator outputs.
    pub fn min_rate(&self) -> Option<f64> {
        self.min_rate
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.dc + self.components.iter().map(|c| c.amp * (TAU * c.freq * t + c.phase).cos()).sum::<f64>()
    }

    pub fn cumulative_rate(&self, t: f64) -> f64 {
        self.dc * t
            + self
                .components
                .iter()
                .map(|c| c.amp / (TAU * c.freq) * ((TAU * c.freq * t + c.phase).sin() - c.phase.sin()))
                .sum::<f64>()
    }

    /// Complex-exponential view: `(0, c0)` followed by `(+nu, c)` and
    /// `(-nu, conj c)` for each component, in component order.
    pub fn complex_view(&self) -> Vec<(f64, Complex64)> {
        let mut out = Vec::with_capacity(1 + 2 * self.components.len());
        out.push((0.0, Complex64::new(self.dc, 0.0)));
        for c in &self.components {
            let z = c.complex_amplitude();
            out.push((c.freq, z));
            out.push((-c.freq, z.conj()));
        }
        out
    }

    pub fn separation_report(&self, horizon: f64) -> Result<SeparationReport> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("separation needs at least one component".into()));
        }
        // With the mirrored set {0, +-nu_j} the nearest neighbours are
        // adjacent positives, the smallest frequency and its distance to 0.
        let mut freqs: Vec<f64> = self.components.iter().map(|c| c.freq).collect();
        freqs.sort_by(f64::total_cmp);
        let mut min_gap = freqs[0];
        for w in freqs.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        let mags = std::iter::once(self.dc.abs()).chain(self.components.iter().map(|c| 0.5 * c.amp));
        let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
        let g_value = min_gap * horizon;
        Ok(SeparationReport { min_gap, g_value, satisfies_a1: g_value >= 4.0, dynamic_range: hi / lo })
    }
}

impl Intensity for RateModel {
    fn rate(&self, t: f64) -> f64 {
        self.evaluate(t)
    }

    fn upper_bound(&self, _horizon: f64) -> f64 {
        self.dc + self.components.iter().map(|c| c.amp).sum::<f64>()
    }

    fn cumulative(&self, t: f64) -> f64 {
        self.cumulative_rate(t)
    }

    fn max_frequency(&self) -> f64 {
        self.components.iter().map(|c| c.freq).fold(0.0, f64::max)
    }
}

/// Frequency separation and amplitude spread of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationReport {
    pub min_gap: f64,
    pub g_value: f64,
    pub satisfies_a1: bool,
    /// `max|c_k| / min|c_k|` over all complex amplitudes including the DC level.
    pub dynamic_range: f64,
}

/// `base + slope * mod(t, period)`: a ramp that resets every period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SawtoothRate {
    pub base: f64,
    pub slope: f64,
    pub period: f64,
}

impl Default for SawtoothRate {
    fn default() -> Self {
        Self { base: 0.1, slope: 0.5, period: TAU }
    }
}

impl Intensity for SawtoothRate {
    fn rate(&self, t: f64) -> f64 {
        self.base + self.slope * t.rem_euclid(self.period)
    }

    fn upper_bound(&self, _horizon: f64) -> f64 {
        self.base + self.slope * self.period
    }

    fn cumulative(&self, t: f64) -> f64 {
        let n = (t / self.period).floor();
        let r = t - n * self.period;
        self.base * t + 0.5 * self.slope * (n * self.period * self.period + r * r)
    }

    fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        (1..).map(|k| k as f64 * self.period).take_while(|&t| t < horizon).collect()
    }

    fn max_frequency(&self) -> f64 {
        1.0 / self.period
    }
}

/// Frequency spacing rule `g(T)` for the convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapRule {
    Constant(f64),
    SixthRoot,
    SquareRoot,
}

impl GapRule {
    pub fn gap(&self, horizon: f64) -> f64 {
        match *self {
            GapRule::Constant(g) => g,
            GapRule::SixthRoot => horizon.powf(1.0 / 6.0),
            GapRule::SquareRoot => horizon.sqrt(),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            GapRule::Constant(g) => format!("{g}"),
            GapRule::SixthRoot => "T^1/6".into(),
            GapRule::SquareRoot => "T^1/2".into(),
        }
    }
}

impl std::str::FromStr for GapRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sqrt" | "t^1/2" | "t^0.5" => Ok(GapRule::SquareRoot),
            "sixth" | "t^1/6" => Ok(GapRule::SixthRoot),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|g| g.is_finite() && *g > 0.0)
                .map(GapRule::Constant)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown gap rule '{s}'"))),
        }
    }
}

pub const CONVERGENCE_BAND: f64 = 0.5;
pub const LUNAR_BAND: f64 = 0.2;

/// Five tones at `0.1 + (k-1) g(T)/T` over a level of 7.5, amplitudes
/// `U[1, 1.5]` and phases `U[0, 2 pi)` drawn from `seed`.
pub fn convergence_model(horizon: f64, rule: GapRule, seed: u64) -> Result<RateModel> {
    let spacing = rule.gap(horizon) / horizon;
    let mut rng = RngStream::new(seed, 0).rng();
    let components = (0..5)
        .map(|k| {
            let amp = rng.random_range(1.0..1.5);
            let phase = rng.random_range(0.0..TAU);
            Component::new(0.1 + k as f64 * spacing, amp, phase)
        })
        .collect();
    RateModel::new(7.5, components, CONVERGENCE_BAND, horizon)
}

/// K-term Fourier truncation of the 2 pi-periodic sawtooth
/// `0.1 + 0.5 mod(t, 2 pi) = 0.1 + 0.5 pi - sum_k sin(k t) / k`.
///
/// The truncation overshoots below zero near the resets, so it is built
/// as an estimate-style model; simulate from [`SawtoothRate`] instead.
pub fn sawtooth_series(terms: usize, horizon: f64) -> Result<RateModel> {
    if terms == 0 {
        return Err(Error::InvalidParameter("sawtooth needs at least one term".into()));
    }
    // -sin(x) / k = (1/k) cos(x + pi/2)
    let components = (1..=terms).map(|k| Component::new(k as f64 / TAU, 1.0 / k as f64, 0.5 * PI)).collect();
    let band = (terms as f64 / TAU).max(1.0);
    RateModel::from_estimate(0.1 + 0.5 * PI, components, band, horizon)
}

/// A dominant 30-day cycle `ratio` times stronger than a 28-day one.
pub fn lunar_model(ratio: f64) -> Result<RateModel> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::InvalidParameter(format!("lunar ratio must be positive, got {ratio}")));
    }
    let components = vec![Component::new(1.0 / 30.0, 2.0 * ratio, 2.6), Component::new(1.0 / 28.0, 2.0, 4.5)];
    RateModel::new(2.0 * ratio + 2.0, components, LUNAR_BAND, 3000.0)
}

/// Look up a named preset with string parameters:
/// `convergence` (T, g, seed), `sawtooth` (K, T), `lunar` (r), `constant` (rate, B).
pub fn preset(name: &str, params: &BTreeMap<String, String>) -> Result<RateModel> {
    fn num<T: std::str::FromStr>(params: &BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T> {
        match params.get(key) {
            Some(v) => v.parse().map_err(|_| Error::InvalidParameter(format!("cannot parse {key}={v}"))),
            None => default.ok_or_else(|| Error::InvalidParameter(format!("missing parameter {key}"))),
        }
    }
    match name {
        "convergence" => {
            let horizon: f64 = num(params, "T", None)?;
            let rule: GapRule = num(params, "g", Some(GapRule::Constant(6.0)))?;
            let seed: u64 = num(params, "seed", Some(0))?;
            convergence_model(horizon, rule, seed)
        }
        "sawtooth" => {
            let terms: usize = num(params, "K", Some(1))?;
            let horizon: f64 = num(params, "T", Some(1000.0))?;
            sawtooth_series(terms, horizon)
        }
        "lunar" => lunar_model(num(params, "r", None)?),
        "constant" => RateModel::constant(num(params, "rate", None)?, num(params, "B", Some(1.0))?),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lunar_at_origin() {
        let m = lunar_model(10.0).unwrap();
        assert_relative_eq!(m.evaluate(0.0), 22.0 + 20.0 * 2.6f64.cos() + 2.0 * 4.5f64.cos(), max_relative = 1e-15);
        let m = lunar_model(50.0).unwrap();
        assert_eq!(m.dc(), 102.0);
        assert_eq!(m.components()[0], Component { freq: 1.0 / 30.0, amp: 100.0, phase: 2.6 });
        assert_eq!(m.components()[1], Component { freq: 1.0 / 28.0, amp: 2.0, phase: 4.5 });
    }

    #[test]
    fn lunar_gap_at_3000() {
        let rep = lunar_model(1.0).unwrap().separation_report(3000.0).unwrap();
        assert_relative_eq!(rep.g_value, 3000.0 * (1.0 / 28.0 - 1.0 / 30.0), max_relative = 1e-12);
        assert!(rep.g_value > 7.14 && rep.g_value < 7.15);
        assert!(rep.satisfies_a1);
    }

    #[test]
    fn single_tone_gap_is_distance_to_dc() {
        let m = RateModel::new(5.0, vec![Component::new(0.1, 1.0, 0.0)], 1.0, 100.0).unwrap();
        let rep = m.separation_report(100.0).unwrap();
        assert_relative_eq!(rep.min_gap, 0.1);
        assert_relative_eq!(rep.g_value, 10.0);
        assert_relative_eq!(rep.dynamic_range, 10.0);
    }

    #[test]
    fn constant_and_cumulative() {
        let m = RateModel::constant(3.0, 1.0).unwrap();
        assert_eq!(m.evaluate(17.0), 3.0);
        assert_eq!(m.cumulative_rate(10.0), 30.0);
        let m = RateModel::new(2.0, vec![Component::new(0.25, 1.5, 0.0)], 1.0, 100.0).unwrap();
        assert_relative_eq!(m.cumulative_rate(4.0), 8.0, epsilon = 1e-13);
    }

    #[test]
    fn sawtooth_preset_first_term() {
        let m = sawtooth_series(1, 1000.0).unwrap();
        assert_relative_eq!(m.dc(), 0.1 + 0.5 * PI);
        let c = m.components()[0];
        assert_relative_eq!(c.freq, 1.0 / TAU);
        assert_eq!(c.amp, 1.0);
        for &t in &[0.0, 0.3, 2.0, 5.5] {
            assert_relative_eq!(m.evaluate(t) - m.dc(), -t.sin(), epsilon = 1e-14);
        }
    }

    #[test]
    fn sawtooth_truth_cumulative() {
        let s = SawtoothRate::default();
        // one full period: 0.1 * 2pi + 0.5 * (2pi)^2 / 2
        assert_relative_eq!(s.cumulative(TAU), 0.1 * TAU + 0.25 * TAU * TAU, max_relative = 1e-14);
        assert_eq!(s.breakpoints(20.0).len(), 3);
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(matches!(
            RateModel::new(1.0, vec![Component::new(0.1, 2.0, 0.0)], 1.0, 100.0),
            Err(Error::NegativeRate { .. })
        ));
        assert!(matches!(
            RateModel::new(5.0, vec![Component::new(0.1, 1.0, 0.0), Component::new(0.1, 1.0, 1.0)], 1.0, 10.0),
            Err(Error::InvalidFrequency(_))
        ));
        assert!(matches!(RateModel::new(5.0, vec![Component::new(2.0, 1.0, 0.0)], 1.0, 10.0), Err(Error::OutOfBand { .. })));
        assert!(RateModel::new(5.0, vec![Component::new(-0.1, 1.0, 0.0)], 1.0, 10.0).is_err());
    }

    #[test]
    fn phases_are_normalized() {
        let m = RateModel::new(5.0, vec![Component::new(0.1, 1.0, -0.5)], 1.0, 10.0).unwrap();
        assert_relative_eq!(m.components()[0].phase, TAU - 0.5);
    }

    #[test]
    fn estimate_records_minimum() {
        let m = RateModel::from_estimate(0.5, vec![Component::new(0.1, 2.0, 0.0)], 1.0, 100.0).unwrap();
        assert_relative_eq!(m.min_rate().unwrap(), -1.5, epsilon = 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let m = convergence_model(1000.0, GapRule::Constant(6.0), 42).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"dc\":7.5,\"components\":[{\"freq\":"));
        let back: RateModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<RateModel>(r#"{"dc":1,"components":[{"freq":3,"amp":1,"phase":0}],"band_limit":1}"#).is_err());
    }

    #[test]
    fn presets_by_name() {
        let mut p = BTreeMap::new();
        p.insert("T".to_string(), "1000".to_string());
        p.insert("g".to_string(), "sqrt".to_string());
        p.insert("seed".to_string(), "9".to_string());
        let a = preset("convergence", &p).unwrap();
        let b = preset("convergence", &p).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.components()[1].freq - a.components()[0].freq, 1000f64.sqrt() / 1000.0, max_relative = 1e-12);
        assert!(matches!(preset("nope", &p), Err(Error::UnknownPreset(_))));
        assert!(preset("lunar", &BTreeMap::new()).is_err());
    }

    #[test]
    fn complex_view_is_conjugate_symmetric() {
        let m = lunar_model(10.0).unwrap();
        let v = m.complex_view();
        assert_eq!(v.len(), 5);
        for pair in v[1..].chunks(2) {
            assert_eq!(pair[0].0, -pair[1].0);
            assert_eq!(pair[0].1, pair[1].1.conj());
        }
        assert_relative_eq!(v[1].1.norm(), 10.0, max_relative = 1e-15);
    }
}

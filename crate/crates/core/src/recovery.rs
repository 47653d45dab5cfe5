//! Frequency selection: thresholded peak extraction with exclusion
//! neighbourhoods, BIC selection over greedy prefixes, and the amplitude
//! feasibility margin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{projections, reconstruct_unscanned, solve_coefficients, CoefficientFit};
use crate::error::{Error, Result};
use crate::periodogram::{evaluate_periodogram, sup_magnitude, PeakSearch, Region, SpectrumGrid, DEFAULT_OVERSAMPLE};
use crate::rate_model::RateModel;
use crate::rng::RngStream;
use crate::sim::{simulate_homogeneous, EventSeries};
use crate::windows::{threshold_constants, ThresholdConstants, WindowKind, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Lemma-bound noise term.
    Tau,
    /// Noise term from simulated homogeneous data, capped by the lemma bound.
    TauXi,
    /// No threshold; the number of frequencies minimizes BIC.
    Bic,
}

impl ThresholdMode {
    pub fn label(&self) -> &'static str {
        match self {
            ThresholdMode::Tau => "tau",
            ThresholdMode::TauXi => "tau_xi",
            ThresholdMode::Bic => "bic",
        }
    }
}

impl std::str::FromStr for ThresholdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tau" => Ok(ThresholdMode::Tau),
            "tau_xi" | "xi" => Ok(ThresholdMode::TauXi),
            "bic" => Ok(ThresholdMode::Bic),
            _ => Err(Error::InvalidParameter(format!("unknown mode '{s}'"))),
        }
    }
}

/// How replicate noise suprema are combined into `chi_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Max,
    Quantile(f64),
}

impl Aggregation {
    fn apply(&self, mut xs: Vec<f64>) -> f64 {
        match *self {
            Aggregation::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            Aggregation::Max => xs.into_iter().fold(0.0, f64::max),
            Aggregation::Quantile(q) => {
                xs.sort_by(f64::total_cmp);
                let pos = q.clamp(0.0, 1.0) * (xs.len() - 1) as f64;
                let lo = pos.floor() as usize;
                let hi = pos.ceil() as usize;
                xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Aggregation::Mean => "mean".into(),
            Aggregation::Max => "max".into(),
            Aggregation::Quantile(q) => format!("quantile({q})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub window: WindowKind,
    pub band: f64,
    /// Exclusion radius in units of `1/T`.
    pub radius: f64,
    pub mode: ThresholdMode,
    pub xi: f64,
    pub alpha: f64,
    /// `None` means `2 sqrt(log T / T)`.
    pub beta: Option<f64>,
    pub gamma: f64,
    pub replicates: usize,
    pub aggregation: Aggregation,
    /// Cap on selected positive frequencies.
    pub max_frequencies: usize,
    pub centralized: bool,
    pub oversample: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            window: WindowKind::Hann,
            band: 0.5,
            radius: 2.0,
            mode: ThresholdMode::TauXi,
            xi: 1e-4,
            alpha: 2.0,
            beta: None,
            gamma: 4.0,
            replicates: 100,
            aggregation: Aggregation::Mean,
            max_frequencies: 30,
            centralized: true,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

impl RecoveryConfig {
    pub fn beta_for(&self, horizon: f64) -> f64 {
        self.beta.unwrap_or_else(|| 2.0 * (horizon.ln() / horizon).sqrt())
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(horizon > 1.0) {
            return bad(format!("horizon must exceed 1, got {horizon}"));
        }
        if !(self.band > 0.0 && self.band.is_finite()) {
            return bad(format!("band must be positive, got {}", self.band));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.xi > 0.0) {
            return bad(format!("xi must be positive, got {}", self.xi));
        }
        if !(self.gamma > 1.0) {
            return bad(format!("gamma must exceed 1, got {}", self.gamma));
        }
        if !(self.alpha >= self.gamma / (self.gamma - 1.0)) {
            return bad(format!("alpha must be at least gamma/(gamma-1) = {}", self.gamma / (self.gamma - 1.0)));
        }
        let beta = self.beta_for(horizon);
        if !(beta > 0.0 && beta < 1.0) {
            return bad(format!("beta must lie in (0, 1), got {beta}"));
        }
        if self.replicates == 0 || self.max_frequencies == 0 {
            return bad("replicates and the frequency cap must be positive".into());
        }
        if self.oversample < crate::periodogram::MIN_OVERSAMPLE {
            return bad(format!("oversample must be at least {}", crate::periodogram::MIN_OVERSAMPLE));
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<ThresholdConstants> {
        threshold_constants(self.window, self.radius)
    }
}

/// Simulated and analytic bounds on the noise supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// `None` when no simulation was run.
    pub chi_hat: Option<f64>,
    /// `4 alpha sqrt(N/T) (1 - beta)^{-1/2} sqrt(log T / T)`.
    pub lemma_bound: f64,
    pub replicates: usize,
    pub aggregation: String,
}

impl NoiseEstimate {
    /// `min(chi_hat, lemma_bound)`, or the bound alone.
    pub fn level(&self) -> f64 {
        self.chi_hat.map_or(self.lemma_bound, |c| c.min(self.lemma_bound))
    }
}

pub fn lemma_bound(mean_rate: f64, horizon: f64, alpha: f64, beta: f64) -> f64 {
    4.0 * alpha * mean_rate.sqrt() / (1.0 - beta).sqrt() * (horizon.ln() / horizon).sqrt()
}

/// `kappa sup|H| + (c_tau / 4) * lemma_bound`.
pub fn theoretical_threshold(sup_h: f64, noise: &NoiseEstimate, cfg: &RecoveryConfig) -> Result<f64> {
    let k = cfg.constants()?;
    Ok(k.sup_coef * sup_h + k.tau_noise_coef / 4.0 * noise.lemma_bound)
}

/// `(kappa + xi) sup|H| + c_xi min(chi_hat, lemma_bound)`.
pub fn modified_threshold(sup_h: f64, noise: &NoiseEstimate, cfg: &RecoveryConfig) -> Result<f64> {
    let k = cfg.constants()?;
    Ok((k.sup_coef + cfg.xi) * sup_h + k.tau_xi_noise_coef * noise.level())
}

/// Calibrate the noise supremum on homogeneous data at the observed mean rate.
pub fn estimate_noise(events: &EventSeries, window: WindowSpec, cfg: &RecoveryConfig, stream: RngStream) -> Result<NoiseEstimate> {
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    let horizon = events.horizon();
    let rate = events.mean_rate();
    let sups = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let sim = simulate_homogeneous(rate, horizon, stream.child(i))?;
            let grid = evaluate_periodogram(&sim, window, cfg.band, cfg.oversample, true)?;
            sup_magnitude(&grid)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(NoiseEstimate {
        chi_hat: Some(cfg.aggregation.apply(sups)),
        lemma_bound: lemma_bound(rate, horizon, cfg.alpha, cfg.beta_for(horizon)),
        replicates: cfg.replicates,
        aggregation: cfg.aggregation.label(),
    })
}

/// Selected frequencies; `0` is always implicitly included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    /// Positive frequencies, ascending.
    pub frequencies: Vec<f64>,
    pub includes_dc: bool,
    /// Threshold applied, absent for BIC selection.
    pub threshold: Option<f64>,
    pub sup_h: f64,
    pub noise: Option<NoiseEstimate>,
    pub mode: ThresholdMode,
    /// Periodogram height at each selected frequency, in selection order.
    pub peak_magnitudes: Vec<f64>,
    /// BIC for each greedy prefix, when selected by BIC.
    pub bic: Option<Vec<f64>>,
}

impl FrequencySet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn spectrum(events: &EventSeries, cfg: &RecoveryConfig) -> Result<(WindowSpec, SpectrumGrid)> {
    cfg.validate(events.horizon())?;
    let window = WindowSpec::new(cfg.window, events.horizon())?;
    let grid = evaluate_periodogram(events, window, cfg.band, cfg.oversample, cfg.centralized)?;
    Ok((window, grid))
}

/// Greedy extraction of the highest stationary peaks above `threshold`,
/// excluding `(nu - r, nu + r)` around each pick. Returns `(freq, height)`
/// in selection order; stops after `limit` picks.
pub fn extract_peaks(grid: &SpectrumGrid, radius: f64, threshold: f64, limit: usize) -> Vec<(f64, f64)> {
    let r = radius / grid.horizon();
    let mut region = Region::new(r, grid.band());
    let mut search = PeakSearch::new(grid, &region);
    let mut picked = Vec::new();
    while picked.len() < limit {
        let Some(peak) = search.next_in(&region) else { break };
        if !(peak.magnitude > threshold) {
            break;
        }
        picked.push((peak.frequency, peak.magnitude));
        region.remove_open(peak.frequency - r, peak.frequency + r);
    }
    picked
}

fn threshold_for(
    grid: &SpectrumGrid,
    events: &EventSeries,
    window: WindowSpec,
    cfg: &RecoveryConfig,
    stream: RngStream,
) -> Result<(f64, f64, NoiseEstimate)> {
    let sup_h = sup_magnitude(grid)?;
    let horizon = events.horizon();
    let bound = lemma_bound(events.mean_rate(), horizon, cfg.alpha, cfg.beta_for(horizon));
    let (threshold, noise) = match cfg.mode {
        ThresholdMode::Tau => {
            let noise = NoiseEstimate { chi_hat: None, lemma_bound: bound, replicates: 0, aggregation: "none".into() };
            (theoretical_threshold(sup_h, &noise, cfg)?, noise)
        }
        ThresholdMode::TauXi => {
            let noise = estimate_noise(events, window, cfg, stream)?;
            (modified_threshold(sup_h, &noise, cfg)?, noise)
        }
        ThresholdMode::Bic => return Err(Error::InvalidParameter("BIC mode has no threshold".into())),
    };
    Ok((threshold, sup_h, noise))
}

/// Thresholded recovery. The cap being exceeded is an error: it means the
/// threshold sits inside the noise.
pub fn run_threshold_recovery(events: &EventSeries, cfg: &RecoveryConfig, stream: RngStream) -> Result<FrequencySet> {
    let (window, grid) = spectrum(events, cfg)?;
    run_threshold_on_grid(&grid, events, window, cfg, stream)
}

fn run_threshold_on_grid(
    grid: &SpectrumGrid,
    events: &EventSeries,
    window: WindowSpec,
    cfg: &RecoveryConfig,
    stream: RngStream,
) -> Result<FrequencySet> {
    let (threshold, sup_h, noise) = threshold_for(grid, events, window, cfg, stream)?;
    let picked = extract_peaks(grid, cfg.radius, threshold, cfg.max_frequencies + 1);
    if picked.len() > cfg.max_frequencies {
        return Err(Error::CapExceeded { cap: cfg.max_frequencies });
    }
    Ok(finish(picked, Some(threshold), sup_h, Some(noise), cfg.mode, None))
}

fn finish(
    picked: Vec<(f64, f64)>,
    threshold: Option<f64>,
    sup_h: f64,
    noise: Option<NoiseEstimate>,
    mode: ThresholdMode,
    bic: Option<Vec<f64>>,
) -> FrequencySet {
    let mut frequencies: Vec<f64> = picked.iter().map(|p| p.0).collect();
    frequencies.sort_by(f64::total_cmp);
    FrequencySet {
        frequencies,
        includes_dc: true,
        threshold,
        sup_h,
        noise,
        mode,
        peak_magnitudes: picked.iter().map(|p| p.1).collect(),
        bic,
    }
}

/// Floor applied to fitted rates before taking logs.
pub const RATE_FLOOR: f64 = 1e-12;

/// `-2 (sum_j log max(lambda(t_j), floor) - Lambda(T)) + (5p + 1) log T`
/// with `p` twice the number of cosine components.
pub fn bic_value(model: &RateModel, events: &EventSeries) -> f64 {
    let horizon = events.horizon();
    let loglik: f64 = events.timestamps().iter().map(|&t| model.evaluate(t).max(RATE_FLOOR).ln()).sum::<f64>()
        - model.cumulative_rate(horizon);
    let p = 2 * model.components().len();
    -2.0 * loglik + (5 * p + 1) as f64 * horizon.ln()
}

const BIC_CHUNK: usize = 4096;

/// BIC of every nested fit in one pass over the events. `fits[m]` uses the
/// first `m` frequencies; `None` entries are skipped. Returns `None` for a
/// fit whose rate is nonpositive at every event.
fn bic_path(fits: &[Option<RateModel>], events: &EventSeries) -> Vec<Option<f64>> {
    let n_fits = fits.len();
    let kmax = fits.iter().flatten().map(|m| m.components().len()).max().unwrap_or(0);
    let basis_freqs: Vec<f64> = fits
        .iter()
        .flatten()
        .max_by_key(|m| m.components().len())
        .map(|m| m.components().iter().map(|c| c.freq).collect())
        .unwrap_or_default();
    // Each fit's components share the prefix order, so one set of phasors
    // per event serves all fits.
    let coefs: Vec<Option<(f64, Vec<num_complex::Complex64>)>> = fits
        .iter()
        .map(|f| {
            f.as_ref().map(|m| {
                let cs = m.components().iter().map(|c| num_complex::Complex64::from_polar(c.amp, c.phase)).collect();
                (m.dc(), cs)
            })
        })
        .collect();
    let partials: Vec<(Vec<f64>, Vec<bool>)> = events
        .timestamps()
        .par_chunks(BIC_CHUNK)
        .map(|chunk| {
            let mut sums = vec![0.0; n_fits];
            let mut positive = vec![false; n_fits];
            let mut z = vec![num_complex::Complex64::new(0.0, 0.0); kmax];
            for &t in chunk {
                for (zk, &f) in z.iter_mut().zip(&basis_freqs) {
                    let (s, c) = (std::f64::consts::TAU * f * t).sin_cos();
                    *zk = num_complex::Complex64::new(c, s);
                }
                for (m, cf) in coefs.iter().enumerate() {
                    if let Some((dc, cs)) = cf {
                        let rate = dc + cs.iter().zip(&z).map(|(a, b)| (a * b).re).sum::<f64>();
                        positive[m] |= rate > 0.0;
                        sums[m] += rate.max(RATE_FLOOR).ln();
                    }
                }
            }
            (sums, positive)
        })
        .collect();
    let horizon = events.horizon();
    (0..n_fits)
        .map(|m| {
            let model = fits[m].as_ref()?;
            let any_positive = partials.iter().any(|p| p.1[m]);
            if !any_positive {
                return None;
            }
            let loglik: f64 = partials.iter().map(|p| p.0[m]).sum::<f64>() - model.cumulative_rate(horizon);
            let p = 2 * model.components().len();
            Some(-2.0 * loglik + (5 * p + 1) as f64 * horizon.ln())
        })
        .collect()
}

/// Fit the first `m` frequencies for `m = 0..=picked.len()`.
/// The projections are computed once; prefix `m` uses the first `1 + 2m`.
fn nested_fits(events: &EventSeries, picked: &[(f64, f64)], band: f64) -> Result<Vec<Option<RateModel>>> {
    let freqs: Vec<f64> = picked.iter().map(|p| p.0).collect();
    let y = projections(events, &freqs)?;
    Ok((0..=freqs.len())
        .map(|m| {
            solve_coefficients(&freqs[..m], &y[..1 + 2 * m], events.horizon(), band, false)
                .ok()
                .and_then(|f: CoefficientFit| reconstruct_unscanned(&f).ok())
        })
        .collect())
}

/// Greedy extraction with no threshold, keeping the prefix that minimizes
/// BIC. Extraction simply stops at the cap.
pub fn run_bic_recovery(events: &EventSeries, cfg: &RecoveryConfig) -> Result<FrequencySet> {
    let (_, grid) = spectrum(events, cfg)?;
    let sup_h = sup_magnitude(&grid)?;
    let picked = extract_peaks(&grid, cfg.radius, 0.0, cfg.max_frequencies);
    let fits = nested_fits(events, &picked, cfg.band)?;
    let path = bic_path(&fits, events);
    let best = path
        .iter()
        .enumerate()
        .filter_map(|(m, b)| b.map(|b| (m, b)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(Error::DegenerateFit)?;
    let values = path.iter().map(|b| b.unwrap_or(f64::INFINITY)).collect();
    Ok(finish(picked[..best.0].to_vec(), None, sup_h, None, ThresholdMode::Bic, Some(values)))
}

/// Dispatch on `cfg.mode`.
pub fn run_recovery(events: &EventSeries, cfg: &RecoveryConfig, stream: RngStream) -> Result<FrequencySet> {
    match cfg.mode {
        ThresholdMode::Bic => run_bic_recovery(events, cfg),
        _ => run_threshold_recovery(events, cfg, stream),
    }
}

/// `min|c| - leak max|c| - noise alpha (1 + sqrt((1+beta)/(1-beta))) sqrt(Lambda(T)/T) sqrt(log T / T)`,
/// positive when the amplitude condition holds. Magnitudes include the DC level.
pub fn a2_margin(model: &RateModel, horizon: f64, cfg: &RecoveryConfig) -> Result<f64> {
    if model.components().is_empty() {
        return Err(Error::InvalidParameter("amplitude margin needs at least one component".into()));
    }
    let k = cfg.constants()?;
    let mags = std::iter::once(model.dc().abs()).chain(model.components().iter().map(|c| 0.5 * c.amp));
    let (lo, hi) = mags.fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
    let beta = cfg.beta_for(horizon);
    let mean = model.cumulative_rate(horizon) / horizon;
    let noise = k.a2_noise_coef
        * cfg.alpha
        * (1.0 + ((1.0 + beta) / (1.0 - beta)).sqrt())
        * mean.sqrt()
        * (horizon.ln() / horizon).sqrt();
    Ok(lo - k.a2_leak_coef * hi - noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_model::{lunar_model, Component};
    use approx::assert_relative_eq;

    fn noise(chi: Option<f64>, bound: f64) -> NoiseEstimate {
        NoiseEstimate { chi_hat: chi, lemma_bound: bound, replicates: 1, aggregation: "mean".into() }
    }

    #[test]
    fn threshold_arithmetic() {
        let cfg = RecoveryConfig { alpha: 2.0, beta: Some(0.0), ..Default::default() };
        assert_eq!(theoretical_threshold(0.0, &noise(None, 0.0), &cfg).unwrap(), 0.0);
        let e = std::f64::consts::E;
        let bound = lemma_bound(1.0, e, 2.0, 0.0);
        assert_relative_eq!(bound, 8.0 * (-0.5f64).exp(), max_relative = 1e-15);
        let tau = theoretical_threshold(1.0, &noise(None, bound), &cfg).unwrap();
        assert_relative_eq!(tau, 0.0574 + 4.23 * 2.0 * (-0.5f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn modified_threshold_uses_smaller_noise() {
        let cfg = RecoveryConfig::default();
        let a = modified_threshold(1.0, &noise(Some(0.3), 0.3), &cfg).unwrap();
        let b = modified_threshold(1.0, &noise(None, 0.3), &cfg).unwrap();
        assert_eq!(a, b);
        let c = modified_threshold(1.0, &noise(Some(5.0), 0.3), &cfg).unwrap();
        assert_relative_eq!(c, 0.0575 + 1.06 * 0.3, max_relative = 1e-14);
        let wide = RecoveryConfig { radius: 3.0, ..Default::default() };
        let d = modified_threshold(1.0, &noise(Some(0.2), 1.0), &wide).unwrap();
        assert_relative_eq!(d, 0.0181 + 1.02 * 0.2, max_relative = 1e-14);
    }

    #[test]
    fn rectangle_has_no_threshold() {
        let cfg = RecoveryConfig { window: WindowKind::Rectangle, ..Default::default() };
        assert!(matches!(theoretical_threshold(1.0, &noise(None, 1.0), &cfg), Err(Error::UnsupportedWindow(_))));
    }

    #[test]
    fn config_validation() {
        assert!(RecoveryConfig::default().validate(1000.0).is_ok());
        assert!(RecoveryConfig { alpha: 1.2, ..Default::default() }.validate(1000.0).is_err());
        assert!(RecoveryConfig { gamma: 1.0, ..Default::default() }.validate(1000.0).is_err());
        assert!(RecoveryConfig { beta: Some(1.0), ..Default::default() }.validate(1000.0).is_err());
        assert!(RecoveryConfig { radius: 0.0, ..Default::default() }.validate(1000.0).is_err());
        assert!(RecoveryConfig { xi: 0.0, ..Default::default() }.validate(1000.0).is_err());
        assert!(RecoveryConfig::default().validate(1.0).is_err());
    }

    #[test]
    fn aggregations() {
        let xs = vec![1.0, 4.0, 2.0, 3.0];
        assert_eq!(Aggregation::Mean.apply(xs.clone()), 2.5);
        assert_eq!(Aggregation::Max.apply(xs.clone()), 4.0);
        assert_eq!(Aggregation::Quantile(0.5).apply(xs), 2.5);
    }

    #[test]
    fn bic_of_constant_fit() {
        let ev = EventSeries::new((1..=20).map(|i| i as f64 * 4.9).collect(), 100.0).unwrap();
        let m = RateModel::constant(0.2, 1.0).unwrap();
        let expect = -2.0 * (20.0 * 0.2f64.ln() - 20.0) + 100f64.ln();
        assert_relative_eq!(bic_value(&m, &ev), expect, max_relative = 1e-13);
        let path = bic_path(&[Some(m)], &ev);
        assert_relative_eq!(path[0].unwrap(), expect, max_relative = 1e-13);
    }

    #[test]
    fn bic_path_matches_scalar() {
        let ev = EventSeries::new((1..=500).map(|i| i as f64 * 0.199 + 0.01 * (i as f64).sin()).collect(), 100.0).unwrap();
        let a = RateModel::from_estimate(5.0, vec![Component::new(0.1, 1.0, 0.4)], 1.0, 100.0).unwrap();
        let b = RateModel::from_estimate(5.0, vec![Component::new(0.1, 1.0, 0.4), Component::new(0.33, 6.0, 2.0)], 1.0, 100.0)
            .unwrap();
        let path = bic_path(&[None, Some(a.clone()), Some(b.clone())], &ev);
        assert!(path[0].is_none());
        assert_relative_eq!(path[1].unwrap(), bic_value(&a, &ev), max_relative = 1e-12);
        assert_relative_eq!(path[2].unwrap(), bic_value(&b, &ev), max_relative = 1e-12);
    }

    #[test]
    fn a2_margin_limits() {
        let cfg = RecoveryConfig::default();
        let m = RateModel::from_estimate(2.0, vec![Component::new(0.1, 4.0, 0.0)], 1.0, 100.0).unwrap();
        let big = a2_margin(&m, 1e12, &cfg).unwrap();
        assert!((big - 2.0 * (1.0 - 0.0686)).abs() < 1e-3);
        let wide = RecoveryConfig { radius: 3.0, ..Default::default() };
        assert!(a2_margin(&lunar_model(50.0).unwrap(), 3000.0, &wide).unwrap() < 0.0);
    }
}

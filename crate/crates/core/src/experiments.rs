//! The three simulation studies: convergence of frequency error with the
//! horizon, the sawtooth table, and the dynamic-range (lunar) study.
//!
//! Every replicate draws from streams derived from `(master seed, scenario,
//! replicate)`, so reports are identical regardless of thread count.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{fit_coefficients, rate_mse};
use crate::error::{Error, Result};
use crate::periodogram::{evaluate_periodogram, DEFAULT_OVERSAMPLE};
use crate::rate_model::{convergence_model, lunar_model, GapRule, SawtoothRate, CONVERGENCE_BAND, LUNAR_BAND};
use crate::recovery::{extract_peaks, run_recovery, RecoveryConfig, ThresholdMode};
use crate::rng::RngStream;
use crate::sim::{simulate_nhpp, EventSeries};
use crate::windows::{WindowKind, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub scenario: String,
    pub method: String,
    pub horizon: f64,
    pub replicate: usize,
    pub seed: u64,
    pub stream: u64,
    pub frequencies: Vec<f64>,
    /// Largest distance from a recovered true frequency to its estimate.
    pub max_error: Option<f64>,
    /// True frequencies with no estimate nearby, where the truth is finite.
    pub missed: Option<usize>,
    pub mse: Option<f64>,
    pub correct: usize,
    pub spurious: usize,
    pub target_detected: Option<bool>,
    /// `ok`, or the failure that ended this replicate.
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n)`; zero when `n < 2`.
    pub se: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { n, mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub method: String,
    pub horizon: f64,
    pub replicates: usize,
    pub failures: usize,
    pub max_error: Option<Summary>,
    pub mse: Option<Summary>,
    pub correct: Option<Summary>,
    pub spurious: Option<Summary>,
    pub missed: Option<Summary>,
    /// Fraction of replicates in which the target frequency was found.
    pub detection_rate: Option<f64>,
}

/// OLS fit of `log10(mean error)` on `log10(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub scenario: String,
    pub method: String,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub master_seed: u64,
    pub records: Vec<ReplicateRecord>,
    pub aggregates: Vec<Aggregate>,
    pub slopes: Vec<SlopeFit>,
    pub runtime_secs: f64,
}

/// Aggregates per `(scenario, method, horizon)`, in order of first
/// appearance. Failed replicates count toward `failures` only.
pub fn aggregate(records: &[ReplicateRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, String, f64)> = Vec::new();
    for r in records {
        let key = (r.scenario.clone(), r.method.clone(), r.horizon);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scenario, method, horizon)| {
            let group: Vec<&ReplicateRecord> =
                records.iter().filter(|r| r.scenario == scenario && r.method == method && r.horizon == horizon).collect();
            let ok: Vec<&ReplicateRecord> = group.iter().copied().filter(|r| r.status == "ok").collect();
            let collect = |f: &dyn Fn(&ReplicateRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            let targets: Vec<bool> = ok.iter().filter_map(|r| r.target_detected).collect();
            Aggregate {
                replicates: group.len(),
                failures: group.len() - ok.len(),
                max_error: Summary::of(&collect(&|r| r.max_error)),
                mse: Summary::of(&collect(&|r| r.mse)),
                correct: Summary::of(&collect(&|r| Some(r.correct as f64))),
                spurious: Summary::of(&collect(&|r| Some(r.spurious as f64))),
                missed: Summary::of(&collect(&|r| r.missed.map(|m| m as f64))),
                detection_rate: (!targets.is_empty())
                    .then(|| targets.iter().filter(|&&d| d).count() as f64 / targets.len() as f64),
                scenario,
                method,
                horizon,
            }
        })
        .collect()
}

/// Ordinary least squares `y = a + b x`; returns `(b, se(b), a)`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if n > 2 {
        let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (ssr / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, se, intercept))
}

fn slopes_from(aggregates: &[Aggregate]) -> Vec<SlopeFit> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for a in aggregates {
        let key = (a.scenario.clone(), a.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(scenario, method)| {
            let (x, y): (Vec<f64>, Vec<f64>) = aggregates
                .iter()
                .filter(|a| a.scenario == scenario && a.method == method)
                .filter_map(|a| a.max_error.filter(|s| s.mean > 0.0).map(|s| (a.horizon.log10(), s.mean.log10())))
                .unzip();
            let points = x.len();
            ols_slope(&x, &y).map(|(slope, slope_se, intercept)| SlopeFit { scenario, method, slope, slope_se, intercept, points })
        })
        .collect()
}

#[derive(Serialize)]
struct RecordRow<'a> {
    scenario: &'a str,
    method: &'a str,
    horizon: f64,
    replicate: usize,
    seed: u64,
    stream: u64,
    selected: usize,
    correct: usize,
    spurious: usize,
    missed: Option<usize>,
    max_error: Option<f64>,
    mse: Option<f64>,
    target_detected: Option<bool>,
    status: &'a str,
    frequencies: String,
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    scenario: &'a str,
    method: &'a str,
    horizon: f64,
    replicates: usize,
    failures: usize,
    mean_max_error: Option<f64>,
    se_max_error: Option<f64>,
    mean_mse: Option<f64>,
    se_mse: Option<f64>,
    mean_correct: Option<f64>,
    se_correct: Option<f64>,
    mean_spurious: Option<f64>,
    se_spurious: Option<f64>,
    mean_missed: Option<f64>,
    se_missed: Option<f64>,
    detection_rate: Option<f64>,
}

impl ExperimentReport {
    fn assemble(name: &str, master_seed: u64, records: Vec<ReplicateRecord>, with_slopes: bool, start: Instant) -> Self {
        let aggregates = aggregate(&records);
        let slopes = if with_slopes { slopes_from(&aggregates) } else { Vec::new() };
        ExperimentReport {
            name: name.to_string(),
            master_seed,
            records,
            aggregates,
            slopes,
            runtime_secs: start.elapsed().as_secs_f64(),
        }
    }

    pub fn find(&self, scenario: &str, method: &str) -> Vec<&Aggregate> {
        self.aggregates.iter().filter(|a| a.scenario == scenario && a.method == method).collect()
    }

    pub fn slope(&self, scenario: &str, method: &str) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.scenario == scenario && s.method == method)
    }

    /// Writes `<name>_records.csv`, `<name>_aggregates.csv`, `<name>_slopes.csv`
    /// (when slopes exist) and `<name>_report.json`. The CSVs exclude the
    /// runtime so a fixed seed reproduces them byte for byte.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();

        let path = dir.join(format!("{}_records.csv", self.name));
        let mut w = csv_writer(&path)?;
        for r in &self.records {
            let frequencies = r.frequencies.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(";");
            w.serialize(RecordRow {
                scenario: &r.scenario,
                method: &r.method,
                horizon: r.horizon,
                replicate: r.replicate,
                seed: r.seed,
                stream: r.stream,
                selected: r.frequencies.len(),
                correct: r.correct,
                spurious: r.spurious,
                missed: r.missed,
                max_error: r.max_error,
                mse: r.mse,
                target_detected: r.target_detected,
                status: &r.status,
                frequencies,
            })
            .map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);

        let path = dir.join(format!("{}_aggregates.csv", self.name));
        let mut w = csv_writer(&path)?;
        for a in &self.aggregates {
            w.serialize(AggregateRow {
                scenario: &a.scenario,
                method: &a.method,
                horizon: a.horizon,
                replicates: a.replicates,
                failures: a.failures,
                mean_max_error: a.max_error.map(|s| s.mean),
                se_max_error: a.max_error.map(|s| s.se),
                mean_mse: a.mse.map(|s| s.mean),
                se_mse: a.mse.map(|s| s.se),
                mean_correct: a.correct.map(|s| s.mean),
                se_correct: a.correct.map(|s| s.se),
                mean_spurious: a.spurious.map(|s| s.mean),
                se_spurious: a.spurious.map(|s| s.se),
                mean_missed: a.missed.map(|s| s.mean),
                se_missed: a.missed.map(|s| s.se),
                detection_rate: a.detection_rate,
            })
            .map_err(csv_err)?;
        }
        w.flush()?;
        written.push(path);

        if !self.slopes.is_empty() {
            let path = dir.join(format!("{}_slopes.csv", self.name));
            let mut w = csv_writer(&path)?;
            for s in &self.slopes {
                w.serialize(s).map_err(csv_err)?;
            }
            w.flush()?;
            written.push(path);
        }

        let path = dir.join(format!("{}_report.json", self.name));
        fs::write(&path, serde_json::to_string_pretty(self)?)?;
        written.push(path);
        Ok(written)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv output: {other:?}")),
    }
}

fn status_of(e: &Error) -> String {
    match e {
        Error::CapExceeded { .. } => "cap_exceeded".into(),
        Error::SingularGram { .. } => "singular".into(),
        Error::DegenerateFit => "degenerate".into(),
        Error::NoEvents => "no_events".into(),
        other => format!("error: {other}"),
    }
}

fn nearest(freqs: &[f64], target: f64) -> Option<f64> {
    freqs.iter().map(|f| (f - target).abs()).min_by(f64::total_cmp)
}

/// Counts `(correct, spurious)`: an estimate is correct when it lies within
/// `tol` of some true frequency.
fn classify(estimates: &[f64], truth: &[f64], tol: f64) -> (usize, usize) {
    let correct = estimates.iter().filter(|&&e| nearest(truth, e).is_some_and(|d| d <= tol)).count();
    (correct, estimates.len() - correct)
}

/// A true frequency counts as recovered when an estimate lies within
/// `tol`; `correct` counts recovered truths, `spurious` estimates near no
/// truth, and `max_error` the worst recovered distance.
fn score_against(rec: &mut ReplicateRecord, estimates: Vec<f64>, truth: &[f64], tol: f64) {
    let distances: Vec<f64> = truth.iter().filter_map(|&t| nearest(&estimates, t)).filter(|&d| d <= tol).collect();
    rec.correct = distances.len();
    rec.missed = Some(truth.len() - distances.len());
    rec.max_error = (!distances.is_empty()).then(|| distances.iter().copied().fold(0.0, f64::max));
    rec.spurious = classify(&estimates, truth, tol).1;
    rec.frequencies = estimates;
}

/// Recovery radius in units of `1/T` for tones spaced `gap/T` apart: half
/// the spacing, at most the Hann main-lobe half width.
fn match_radius(gap: f64) -> f64 {
    (0.5 * gap).min(2.0)
}

/// Replicate streams: `(seed, scenario)` names the parent, the replicate
/// index the child. Child `0` draws the model, `1` the events, `2` the
/// noise calibration.
fn replicate_stream(master: u64, scenario: u64, replicate: usize) -> RngStream {
    RngStream::new(master, scenario).child(replicate as u64)
}

fn base_record(scenario: &str, method: &str, horizon: f64, replicate: usize, stream: RngStream) -> ReplicateRecord {
    ReplicateRecord {
        scenario: scenario.to_string(),
        method: method.to_string(),
        horizon,
        replicate,
        seed: stream.seed,
        stream: stream.stream,
        frequencies: Vec::new(),
        max_error: None,
        missed: None,
        mse: None,
        correct: 0,
        spurious: 0,
        target_detected: None,
        status: "ok".into(),
    }
}

fn check_replicates(replicates: usize, noise_replicates: usize) -> Result<()> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("at least one replicate is required".into()));
    }
    if noise_replicates == 0 {
        return Err(Error::InvalidParameter("at least one noise replicate is required".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Convergence

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMethod {
    /// Hann window, centralized periodogram, simulated-noise threshold.
    HannThreshold,
    /// Unwindowed periodogram, the five highest peaks (order known).
    RectKnownOrder,
}

impl ConvergenceMethod {
    pub fn label(&self) -> &'static str {
        match self {
            ConvergenceMethod::HannThreshold => "hann_tau_xi",
            ConvergenceMethod::RectKnownOrder => "rect_top5",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub horizons: Vec<f64>,
    pub rules: Vec<GapRule>,
    pub methods: Vec<ConvergenceMethod>,
    pub replicates: usize,
    pub noise_replicates: usize,
    pub seed: u64,
    pub oversample: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            horizons: vec![250.0, 500.0, 1000.0, 2000.0, 4000.0],
            rules: vec![GapRule::Constant(6.0), GapRule::SixthRoot, GapRule::SquareRoot],
            methods: vec![ConvergenceMethod::HannThreshold, ConvergenceMethod::RectKnownOrder],
            replicates: 20,
            noise_replicates: 100,
            seed: 2024,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

const CONVERGENCE_TONES: usize = 5;

fn convergence_replicate(
    cfg: &ConvergenceConfig,
    rule_idx: usize,
    t_idx: usize,
    replicate: usize,
) -> Vec<ReplicateRecord> {
    let rule = cfg.rules[rule_idx];
    let horizon = cfg.horizons[t_idx];
    let scenario = format!("g={}", rule.label());
    let stream = replicate_stream(cfg.seed, (rule_idx * 1000 + t_idx) as u64, replicate);
    let gap = rule.gap(horizon);
    let drawn = convergence_model(horizon, rule, stream.child(0).seed)
        .and_then(|m| simulate_nhpp(&m, horizon, stream.child(1)).map(|ev| (m, ev)));
    cfg.methods
        .iter()
        .map(|method| {
            let mut rec = base_record(&scenario, method.label(), horizon, replicate, stream);
            let result = drawn.as_ref().map_err(status_of).and_then(|(model, events)| {
                convergence_estimate(*method, events, gap, cfg, stream)
                    .map(|f| (model, f))
                    .map_err(|e| status_of(&e))
            });
            match result {
                Ok((model, freqs)) => {
                    let truth: Vec<f64> = model.components().iter().map(|c| c.freq).collect();
                    score_against(&mut rec, freqs, &truth, match_radius(gap) / horizon);
                }
                Err(status) => rec.status = status,
            }
            rec
        })
        .collect()
}

fn convergence_estimate(
    method: ConvergenceMethod,
    events: &EventSeries,
    gap: f64,
    cfg: &ConvergenceConfig,
    stream: RngStream,
) -> Result<Vec<f64>> {
    match method {
        ConvergenceMethod::HannThreshold => {
            let rc = RecoveryConfig {
                window: WindowKind::Hann,
                band: CONVERGENCE_BAND,
                radius: 3.0,
                mode: ThresholdMode::TauXi,
                replicates: cfg.noise_replicates,
                oversample: cfg.oversample,
                ..RecoveryConfig::default()
            };
            Ok(run_recovery(events, &rc, stream.child(2))?.frequencies)
        }
        ConvergenceMethod::RectKnownOrder => {
            let window = WindowSpec::new(WindowKind::Rectangle, events.horizon())?;
            let grid = evaluate_periodogram(events, window, CONVERGENCE_BAND, cfg.oversample, true)?;
            // Main-lobe half width, never wider than half the spacing.
            let radius = gap.min(2.0) / 2.0;
            let mut freqs: Vec<f64> =
                extract_peaks(&grid, radius, 0.0, CONVERGENCE_TONES).into_iter().map(|p| p.0).collect();
            freqs.sort_by(f64::total_cmp);
            Ok(freqs)
        }
    }
}

/// Frequency error against horizon for each spacing rule and method, with
/// log-log slopes fitted per `(rule, method)`.
pub fn run_convergence(cfg: &ConvergenceConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.horizons.len() < 2 {
        return Err(Error::InvalidParameter("the horizon ladder needs at least two values".into()));
    }
    for (i, &t) in cfg.horizons.iter().enumerate() {
        if !(t.is_finite() && t > 1.0) || cfg.horizons[..i].contains(&t) {
            return Err(Error::InvalidParameter(format!("invalid horizon {t} in ladder")));
        }
    }
    if cfg.rules.is_empty() || cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("at least one gap rule and one method are required".into()));
    }
    check_replicates(cfg.replicates, cfg.noise_replicates)?;
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.rules.len())
        .flat_map(|g| (0..cfg.horizons.len()).flat_map(move |t| (0..cfg.replicates).map(move |r| (g, t, r))))
        .collect();
    let records: Vec<ReplicateRecord> =
        tasks.par_iter().map(|&(g, t, r)| convergence_replicate(cfg, g, t, r)).collect::<Vec<_>>().into_iter().flatten().collect();
    // Group method-major within each rule so aggregates read naturally.
    let mut ordered = Vec::with_capacity(records.len());
    for g in &cfg.rules {
        let scenario = format!("g={}", g.label());
        for m in &cfg.methods {
            ordered.extend(records.iter().filter(|r| r.scenario == scenario && r.method == m.label()).cloned());
        }
    }
    Ok(ExperimentReport::assemble("convergence", cfg.seed, ordered, true, start))
}

// ---------------------------------------------------------------------------
// Sawtooth

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SawtoothMethod {
    UnwindowedBic,
    WindowedBic,
    WindowedThreshold,
}

impl SawtoothMethod {
    pub fn label(&self) -> &'static str {
        match self {
            SawtoothMethod::UnwindowedBic => "ubic",
            SawtoothMethod::WindowedBic => "wbic",
            SawtoothMethod::WindowedThreshold => "wthres",
        }
    }

    fn recovery(&self, cfg: &SawtoothConfig) -> RecoveryConfig {
        let (window, mode) = match self {
            SawtoothMethod::UnwindowedBic => (WindowKind::Rectangle, ThresholdMode::Bic),
            SawtoothMethod::WindowedBic => (WindowKind::Hann, ThresholdMode::Bic),
            SawtoothMethod::WindowedThreshold => (WindowKind::Hann, ThresholdMode::TauXi),
        };
        RecoveryConfig {
            window,
            mode,
            band: cfg.band,
            radius: cfg.radius,
            replicates: cfg.noise_replicates,
            oversample: cfg.oversample,
            ..RecoveryConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SawtoothConfig {
    pub horizon: f64,
    pub replicates: usize,
    pub noise_replicates: usize,
    pub band: f64,
    /// Exclusion radius in units of `1/T`.
    pub radius: f64,
    pub methods: Vec<SawtoothMethod>,
    pub seed: u64,
    pub oversample: usize,
}

impl Default for SawtoothConfig {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            replicates: 100,
            noise_replicates: 100,
            band: 1.0,
            radius: 3.0,
            methods: vec![SawtoothMethod::UnwindowedBic, SawtoothMethod::WindowedBic, SawtoothMethod::WindowedThreshold],
            seed: 2024,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

/// Estimates within this many `1/T` of a harmonic `k/(2 pi)` count as correct.
pub const SAWTOOTH_MATCH: f64 = 3.0;

fn sawtooth_replicate(cfg: &SawtoothConfig, replicate: usize) -> Vec<ReplicateRecord> {
    let truth = SawtoothRate::default();
    let horizon = cfg.horizon;
    let stream = replicate_stream(cfg.seed, 0, replicate);
    let events = simulate_nhpp(&truth, horizon, stream.child(1));
    let harmonics: Vec<f64> = (1..).map(|k| k as f64 / TAU).take_while(|&f| f <= cfg.band + SAWTOOTH_MATCH / horizon).collect();
    cfg.methods
        .iter()
        .map(|method| {
            let mut rec = base_record("sawtooth", method.label(), horizon, replicate, stream);
            let outcome = events.as_ref().map_err(status_of).and_then(|events| {
                let set = run_recovery(events, &method.recovery(cfg), stream.child(2)).map_err(|e| status_of(&e))?;
                let fit = fit_coefficients(events, &set.frequencies, cfg.band, false).and_then(|f| f.reconstruct());
                Ok((set.frequencies, fit))
            });
            match outcome {
                Ok((freqs, fit)) => {
                    let (correct, spurious) = classify(&freqs, &harmonics, SAWTOOTH_MATCH / horizon);
                    rec.correct = correct;
                    rec.spurious = spurious;
                    rec.frequencies = freqs;
                    match fit {
                        Ok(model) => rec.mse = Some(rate_mse(&truth, &model, horizon)),
                        Err(e) => rec.status = status_of(&e),
                    }
                }
                Err(status) => rec.status = status,
            }
            rec
        })
        .collect()
}

/// Sawtooth intensity recovered by each method; MSE against the exact rate.
pub fn run_sawtooth(cfg: &SawtoothConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if !(cfg.horizon.is_finite() && cfg.horizon > 1.0) {
        return Err(Error::InvalidParameter(format!("invalid horizon {}", cfg.horizon)));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("at least one method is required".into()));
    }
    check_replicates(cfg.replicates, cfg.noise_replicates)?;
    let records: Vec<ReplicateRecord> =
        (0..cfg.replicates).into_par_iter().map(|r| sawtooth_replicate(cfg, r)).collect::<Vec<_>>().into_iter().flatten().collect();
    let mut ordered = Vec::with_capacity(records.len());
    for m in &cfg.methods {
        ordered.extend(records.iter().filter(|r| r.method == m.label()).cloned());
    }
    Ok(ExperimentReport::assemble("sawtooth", cfg.seed, ordered, false, start))
}

// ---------------------------------------------------------------------------
// Dynamic range

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynRangeMethod {
    /// Hann window with the simulated-noise threshold.
    HannThreshold,
    /// Unwindowed periodogram with BIC selection (no threshold exists for it).
    RectBic,
}

impl DynRangeMethod {
    pub fn label(&self) -> &'static str {
        match self {
            DynRangeMethod::HannThreshold => "hann",
            DynRangeMethod::RectBic => "rect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynRangeConfig {
    pub horizon: f64,
    pub ratios: Vec<f64>,
    pub replicates: usize,
    pub noise_replicates: usize,
    /// Exclusion radius in units of `1/T`.
    pub radius: f64,
    /// Cap on greedy picks for the BIC path.
    pub bic_cap: usize,
    pub methods: Vec<DynRangeMethod>,
    pub seed: u64,
    pub oversample: usize,
}

impl Default for DynRangeConfig {
    fn default() -> Self {
        Self {
            horizon: 3000.0,
            ratios: vec![10.0, 15.0, 50.0],
            replicates: 50,
            noise_replicates: 20,
            radius: 3.0,
            bic_cap: 10,
            methods: vec![DynRangeMethod::HannThreshold, DynRangeMethod::RectBic],
            seed: 2024,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }
}

pub const DOMINANT_FREQ: f64 = 1.0 / 30.0;
pub const TARGET_FREQ: f64 = 1.0 / 28.0;
/// Detection tolerance in units of `1/T`.
pub const DETECTION_RADIUS: f64 = 2.0;

fn dynrange_replicate(cfg: &DynRangeConfig, ratio_idx: usize, replicate: usize) -> Vec<ReplicateRecord> {
    let ratio = cfg.ratios[ratio_idx];
    let horizon = cfg.horizon;
    let scenario = format!("r={ratio}");
    let stream = replicate_stream(cfg.seed, ratio_idx as u64, replicate);
    let events = lunar_model(ratio).and_then(|m| simulate_nhpp(&m, horizon, stream.child(1)));
    let tol = DETECTION_RADIUS / horizon;
    let truth = [DOMINANT_FREQ, TARGET_FREQ];
    cfg.methods
        .iter()
        .map(|method| {
            let mut rec = base_record(&scenario, method.label(), horizon, replicate, stream);
            let rc = match method {
                DynRangeMethod::HannThreshold => RecoveryConfig {
                    window: WindowKind::Hann,
                    mode: ThresholdMode::TauXi,
                    ..RecoveryConfig::default()
                },
                DynRangeMethod::RectBic => RecoveryConfig {
                    window: WindowKind::Rectangle,
                    mode: ThresholdMode::Bic,
                    max_frequencies: cfg.bic_cap,
                    ..RecoveryConfig::default()
                },
            };
            let rc = RecoveryConfig {
                band: LUNAR_BAND,
                radius: cfg.radius,
                replicates: cfg.noise_replicates,
                oversample: cfg.oversample,
                ..rc
            };
            let outcome = events
                .as_ref()
                .map_err(status_of)
                .and_then(|ev| run_recovery(ev, &rc, stream.child(2)).map_err(|e| status_of(&e)));
            match outcome {
                Ok(set) => {
                    rec.target_detected = Some(nearest(&set.frequencies, TARGET_FREQ).is_some_and(|d| d <= tol));
                    score_against(&mut rec, set.frequencies, &truth, tol);
                }
                Err(status) => rec.status = status,
            }
            rec
        })
        .collect()
}

/// Detection of the weak 28-day cycle next to a dominant 30-day one, per
/// amplitude ratio and window. `correct` counts how many of the two cycles
/// were found.
pub fn run_dynrange(cfg: &DynRangeConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.ratios.is_empty() {
        return Err(Error::InvalidParameter("at least one amplitude ratio is required".into()));
    }
    if !(cfg.horizon.is_finite() && cfg.horizon > 1.0) {
        return Err(Error::InvalidParameter(format!("invalid horizon {}", cfg.horizon)));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("at least one method is required".into()));
    }
    check_replicates(cfg.replicates, cfg.noise_replicates)?;
    for &r in &cfg.ratios {
        lunar_model(r)?;
    }
    let tasks: Vec<(usize, usize)> =
        (0..cfg.ratios.len()).flat_map(|i| (0..cfg.replicates).map(move |r| (i, r))).collect();
    let records: Vec<ReplicateRecord> =
        tasks.par_iter().map(|&(i, r)| dynrange_replicate(cfg, i, r)).collect::<Vec<_>>().into_iter().flatten().collect();
    let mut ordered = Vec::with_capacity(records.len());
    for &ratio in &cfg.ratios {
        let scenario = format!("r={ratio}");
        for m in &cfg.methods {
            ordered.extend(records.iter().filter(|r| r.scenario == scenario && r.method == m.label()).cloned());
        }
    }
    Ok(ExperimentReport::assemble("dynrange", cfg.seed, ordered, false, start))
}

//! The windowed point-process periodogram
//! `H(nu) = (1/T) sum_j w(t_j) exp(-2 pi i nu t_j)` on a uniform grid over
//! `[0, B]`, its centralized form `H(nu) - (N/T) w~(nu) / T`, and peak search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nufft::nufft_type1;
use crate::numeric::{golden_max, unit_phasor};
use crate::sim::EventSeries;
use crate::windows::WindowSpec;

pub const DEFAULT_OVERSAMPLE: usize = 16;
pub const MIN_OVERSAMPLE: usize = 8;
/// Peak refinement stops once the bracket is this many `1/T` wide.
pub const REFINE_TOL: f64 = 1e-4;

/// How grid values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluation {
    /// `O(N M)` summation, the reference.
    Direct,
    /// Non-uniform FFT, agreeing with `Direct` to about 1e-12.
    Fast,
}

/// Exact evaluation of the (optionally centralized) periodogram at any frequency.
#[derive(Debug, Clone)]
pub struct DirectSum {
    times: Arc<[f64]>,
    weights: Arc<[f64]>,
    window: WindowSpec,
    centralized: bool,
    mean_rate: f64,
}

impl DirectSum {
    pub fn new(events: &EventSeries, window: WindowSpec, centralized: bool) -> Result<Self> {
        let (a, b) = (events.horizon(), window.horizon);
        if (a - b).abs() > 1e-12 * a.max(b) {
            return Err(Error::HorizonMismatch { events: a, window: b });
        }
        let times: Arc<[f64]> = events.timestamps().into();
        let weights: Arc<[f64]> = times.iter().map(|&t| window.value(t)).collect();
        Ok(Self { times, weights, window, centralized, mean_rate: events.mean_rate() })
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    /// The uncentralized sum, accumulated in ascending event order.
    pub fn raw(&self, nu: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&t, &w) in self.times.iter().zip(self.weights.iter()) {
            let (c, s) = unit_phasor(nu * t);
            acc += Complex64::new(w * c, w * s);
        }
        acc / self.window.horizon
    }

    fn centring(&self, nu: f64) -> Complex64 {
        if self.centralized {
            self.window.transform(nu) * (self.mean_rate / self.window.horizon)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn eval(&self, nu: f64) -> Complex64 {
        self.raw(nu) - self.centring(nu)
    }

    /// Taylor expansion of [`DirectSum::raw`] about `centre`, for fast
    /// repeated evaluation within a grid cell or two.
    pub fn local(&self, centre: f64) -> LocalSum {
        let horizon = self.window.horizon;
        let mut moments = [Complex64::new(0.0, 0.0); LOCAL_TERMS];
        for (&t, &w) in self.times.iter().zip(self.weights.iter()) {
            let (c, s) = unit_phasor(centre * t);
            let mut z = Complex64::new(w * c, w * s);
            let u = t / horizon;
            for (k, m) in moments.iter_mut().enumerate() {
                *m += z;
                z *= u / (k + 1) as f64;
            }
        }
        for m in moments.iter_mut() {
            *m /= horizon;
        }
        LocalSum { centre, horizon, moments }
    }
}

const LOCAL_TERMS: usize = 24;

/// `raw(nu) = sum_k (-2 pi i (nu - centre) T)^k M_k` with
/// `M_k = (1/T) sum_j w_j exp(-2 pi i centre t_j) (t_j/T)^k / k!`.
#[derive(Debug, Clone)]
pub struct LocalSum {
    centre: f64,
    horizon: f64,
    moments: [Complex64; LOCAL_TERMS],
}

impl LocalSum {
    /// Reach in units of `1/T` within which the series is accurate to
    /// rounding.
    pub const REACH: f64 = 0.25;

    pub fn raw(&self, nu: f64) -> Complex64 {
        let u = Complex64::new(0.0, -std::f64::consts::TAU * (nu - self.centre) * self.horizon);
        self.moments.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &m| acc * u + m)
    }
}

type Evaluator = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Periodogram values on `nu_i = i * grid_step`, `i = 0..=n`, spanning `[0, B]`.
#[derive(Clone)]
pub struct SpectrumGrid {
    frequencies: Vec<f64>,
    values: Vec<Complex64>,
    magnitudes: Vec<f64>,
    grid_step: f64,
    centralized: bool,
    horizon: f64,
    evaluator: Evaluator,
    direct: Option<DirectSum>,
}

impl std::fmt::Debug for SpectrumGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumGrid")
            .field("points", &self.frequencies.len())
            .field("grid_step", &self.grid_step)
            .field("centralized", &self.centralized)
            .field("horizon", &self.horizon)
            .finish()
    }
}

/// Uniform grid `i * B / n` with `n = ceil(B * oversample * T)`.
pub fn frequency_grid(band: f64, oversample: usize, horizon: f64) -> Result<(Vec<f64>, f64)> {
    if !(band.is_finite() && band > 0.0) {
        return Err(Error::InvalidParameter(format!("band must be positive, got {band}")));
    }
    if oversample < MIN_OVERSAMPLE {
        return Err(Error::InvalidParameter(format!("oversample must be at least {MIN_OVERSAMPLE}, got {oversample}")));
    }
    let n = (band * oversample as f64 * horizon).ceil();
    if !(n >= 1.0) {
        return Err(Error::EmptyGrid);
    }
    let step = band / n;
    Ok(((0..=n as usize).map(|i| i as f64 * step).collect(), step))
}

pub fn evaluate_periodogram(
    events: &EventSeries,
    window: WindowSpec,
    band: f64,
    oversample: usize,
    centralized: bool,
) -> Result<SpectrumGrid> {
    evaluate_periodogram_with(events, window, band, oversample, centralized, Evaluation::Fast)
}

pub fn evaluate_periodogram_with(
    events: &EventSeries,
    window: WindowSpec,
    band: f64,
    oversample: usize,
    centralized: bool,
    method: Evaluation,
) -> Result<SpectrumGrid> {
    let sum = DirectSum::new(events, window, centralized)?;
    let (frequencies, grid_step) = frequency_grid(band, oversample, window.horizon)?;
    let raw: Vec<Complex64> = match method {
        Evaluation::Direct => frequencies.par_iter().map(|&nu| sum.raw(nu)).collect(),
        Evaluation::Fast => {
            let x: Vec<f64> = sum.times.iter().map(|&t| std::f64::consts::TAU * grid_step * t).collect();
            let c: Vec<Complex64> = sum.weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
            nufft_type1(&x, &c, frequencies.len()).into_iter().map(|z| z / window.horizon).collect()
        }
    };
    let values: Vec<Complex64> = raw.into_iter().zip(&frequencies).map(|(z, &nu)| z - sum.centring(nu)).collect();
    let magnitudes = values.iter().map(|z| z.norm()).collect();
    let direct = Some(sum.clone());
    let evaluator: Evaluator = Arc::new(move |nu| sum.eval(nu));
    Ok(SpectrumGrid { frequencies, values, magnitudes, grid_step, centralized, horizon: window.horizon, evaluator, direct })
}

impl SpectrumGrid {
    /// A grid over an arbitrary spectrum function, e.g. a noiseless
    /// expected periodogram. Peaks are refined against `f` itself.
    pub fn from_function<F>(f: F, band: f64, oversample: usize, horizon: f64, centralized: bool) -> Result<Self>
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        let (frequencies, grid_step) = frequency_grid(band, oversample, horizon)?;
        let values: Vec<Complex64> = frequencies.iter().map(|&nu| f(nu)).collect();
        let magnitudes = values.iter().map(|z| z.norm()).collect();
        Ok(Self { frequencies, values, magnitudes, grid_step, centralized, horizon, evaluator: Arc::new(f), direct: None })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn centralized(&self) -> bool {
        self.centralized
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn band(&self) -> f64 {
        *self.frequencies.last().unwrap_or(&0.0)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Exact `|H(nu)|` off the grid.
    pub fn magnitude_at(&self, nu: f64) -> f64 {
        (self.evaluator)(nu).norm()
    }

    /// Maximize `|H|` over `(nu_{i-1}, nu_{i+1})`; never below the grid value.
    fn refine(&self, i: usize) -> (f64, f64) {
        let lo = self.frequencies[i.saturating_sub(1)];
        let hi = self.frequencies[(i + 1).min(self.len() - 1)];
        let at_grid = (self.frequencies[i], self.magnitude_at(self.frequencies[i]).max(self.magnitudes[i]));
        if hi <= lo {
            return at_grid;
        }
        let tol = REFINE_TOL / self.horizon;
        let (nu, mag) = match &self.direct {
            Some(sum) if (hi - lo) * self.horizon <= 2.0 * LocalSum::REACH => {
                let local = sum.local(self.frequencies[i]);
                golden_max(|nu| (local.raw(nu) - sum.centring(nu)).norm(), lo, hi, tol)
            }
            _ => golden_max(|nu| self.magnitude_at(nu), lo, hi, tol),
        };
        if mag > at_grid.1 {
            (nu, mag)
        } else {
            at_grid
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq,re,im,mag")?;
        for ((nu, z), m) in self.frequencies.iter().zip(&self.values).zip(&self.magnitudes) {
            writeln!(w, "{nu},{},{},{m}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// `sup_{[0, B]} |H|`: the grid maximum refined around its cell.
pub fn sup_magnitude(grid: &SpectrumGrid) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let (i, &m) = grid
        .magnitudes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("nonempty");
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(grid.refine(i).1.max(m))
}

/// A finite union of closed frequency intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    intervals: Vec<(f64, f64)>,
}

impl Region {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { intervals: if lo <= hi { vec![(lo, hi)] } else { Vec::new() } }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, nu: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= nu && nu <= b)
    }

    /// Remove the open interval `(a, b)`.
    pub fn remove_open(&mut self, a: f64, b: f64) {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        for &(lo, hi) in &self.intervals {
            if b <= lo || a >= hi {
                out.push((lo, hi));
                continue;
            }
            if lo <= a {
                out.push((lo, a));
            }
            if b <= hi {
                out.push((b, hi));
            }
        }
        self.intervals = out;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub frequency: f64,
    pub magnitude: f64,
    pub refined: bool,
    #[serde(skip)]
    pub grid_index: usize,
}

/// Peaks ordered by descending magnitude, ties by ascending frequency.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PeakList(pub Vec<Peak>);

impl PeakList {
    pub fn iter(&self) -> std::slice::Iter<'_, Peak> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn by_height(a: &Peak, b: &Peak) -> Ordering {
    b.magnitude.total_cmp(&a.magnitude).then(a.frequency.total_cmp(&b.frequency))
}

/// Grid point `i` is stationary in `region` when it is a strict-right local
/// maximum, nonzero, and it and both half-cells around it lie in `region`.
fn is_stationary(grid: &SpectrumGrid, region: &Region, i: usize) -> bool {
    if i == 0 || i + 1 >= grid.len() {
        return false;
    }
    let m = &grid.magnitudes;
    let f = &grid.frequencies;
    m[i] > 0.0
        && m[i] >= m[i - 1]
        && m[i] > m[i + 1]
        && region.contains(f[i])
        && region.contains(0.5 * (f[i - 1] + f[i]))
        && region.contains(0.5 * (f[i] + f[i + 1]))
}

fn stationary_indices(grid: &SpectrumGrid, region: &Region) -> Vec<usize> {
    (1..grid.len().saturating_sub(1)).filter(|&i| is_stationary(grid, region, i)).collect()
}

/// All stationary peaks in `region`, each refined on the exact spectrum.
pub fn find_peaks(grid: &SpectrumGrid, region: &Region) -> PeakList {
    let mut peaks: Vec<Peak> = stationary_indices(grid, region)
        .into_par_iter()
        .map(|i| {
            let (frequency, magnitude) = grid.refine(i);
            Peak { frequency, magnitude, refined: true, grid_index: i }
        })
        .collect();
    peaks.sort_by(by_height);
    PeakList(peaks)
}

/// Relative height a refined peak can gain over its best grid sample.
/// A half-cell offset of `1/(2 oversample T)` costs under 0.2% on any
/// supported main lobe; 1% leaves room.
const REFINE_GAIN: f64 = 1.01;

#[derive(Debug)]
struct Candidate {
    key: f64,
    peak: Peak,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(other.peak.frequency.total_cmp(&self.peak.frequency))
            .then(self.peak.refined.cmp(&other.peak.refined))
    }
}

/// Repeatedly hands out the highest stationary peak of a shrinking region,
/// refining candidates only when they could be the maximum.
///
/// Removing part of the region never creates a stationary grid point, so
/// the candidate set is computed once and filtered as the region shrinks.
pub struct PeakSearch<'a> {
    grid: &'a SpectrumGrid,
    heap: BinaryHeap<Candidate>,
}

impl<'a> PeakSearch<'a> {
    pub fn new(grid: &'a SpectrumGrid, region: &Region) -> Self {
        let heap = stationary_indices(grid, region)
            .into_iter()
            .map(|i| Candidate {
                key: grid.magnitudes[i] * REFINE_GAIN,
                peak: Peak { frequency: grid.frequencies[i], magnitude: grid.magnitudes[i], refined: false, grid_index: i },
            })
            .collect();
        Self { grid, heap }
    }

    /// Highest remaining peak inside `region`, or `None`.
    pub fn next_in(&mut self, region: &Region) -> Option<Peak> {
        while let Some(Candidate { peak, .. }) = self.heap.pop() {
            if !is_stationary(self.grid, region, peak.grid_index) || !region.contains(peak.frequency) {
                continue;
            }
            if peak.refined {
                return Some(peak);
            }
            let (frequency, magnitude) = self.grid.refine(peak.grid_index);
            let refined = Peak { frequency, magnitude, refined: true, grid_index: peak.grid_index };
            self.heap.push(Candidate { key: magnitude, peak: refined });
        }
        None
    }
}

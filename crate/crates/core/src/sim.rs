//! Event-time simulation and the plain-text event file format.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rate_model::Intensity;
use crate::rng::RngStream;

/// Strictly increasing arrival times in `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSeries {
    timestamps: Vec<f64>,
    horizon: f64,
}

impl EventSeries {
    pub fn new(timestamps: Vec<f64>, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let mut prev = 0.0;
        for (i, &t) in timestamps.iter().enumerate() {
            if !(t > prev && t <= horizon) {
                return Err(Error::Parse {
                    line: i + 2,
                    reason: format!("timestamp {t} not strictly increasing within (0, {horizon}]"),
                });
            }
            prev = t;
        }
        Ok(Self { timestamps, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), horizon)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn count(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// `N(T) / T`.
    pub fn mean_rate(&self) -> f64 {
        self.count() as f64 / self.horizon
    }

    /// Write the `# T=<horizon>` header and one timestamp per line.
    /// Values use the shortest representation that parses back exactly.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# T={}", self.horizon)?;
        for t in &self.timestamps {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, reason: "empty file".into() })??;
        let horizon = header
            .trim()
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|h| h.strip_prefix("T="))
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse { line: 1, reason: format!("expected '# T=<horizon>', got '{header}'") })?;
        let mut timestamps = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            let t = s
                .parse::<f64>()
                .map_err(|e| Error::Parse { line: i + 2, reason: format!("'{s}': {e}") })?;
            timestamps.push(t);
        }
        Self::new(timestamps, horizon)
    }
}

/// Draw the next arrival after `t`, redrawing zero gaps and gaps too small
/// to advance `t` in floating point.
fn next_arrival<R: Rng>(t: f64, exp: &Exp<f64>, rng: &mut R) -> f64 {
    loop {
        let gap = exp.sample(rng);
        let next = t + gap;
        if gap > 0.0 && next > t {
            return next;
        }
    }
}

/// Homogeneous Poisson arrivals at `rate` on `(0, horizon]`.
pub fn simulate_homogeneous(rate: f64, horizon: f64, stream: RngStream) -> Result<EventSeries> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate must be nonnegative, got {rate}")));
    }
    if rate == 0.0 {
        return EventSeries::empty(horizon);
    }
    let exp = Exp::new(rate).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity((rate * horizon * 1.1) as usize + 16);
    let mut t = 0.0;
    loop {
        t = next_arrival(t, &exp, &mut rng);
        if t > horizon {
            break;
        }
        out.push(t);
    }
    EventSeries::new(out, horizon)
}

/// Nonhomogeneous arrivals by thinning a homogeneous stream at the
/// intensity's upper bound.
pub fn simulate_nhpp<I: Intensity + ?Sized>(intensity: &I, horizon: f64, stream: RngStream) -> Result<EventSeries> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let bound = intensity.upper_bound(horizon);
    if !(bound.is_finite() && bound >= 0.0) {
        return Err(Error::InvalidParameter(format!("rate bound must be finite and nonnegative, got {bound}")));
    }
    if bound == 0.0 {
        return EventSeries::empty(horizon);
    }
    let exp = Exp::new(bound).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity((bound * horizon) as usize + 16);
    let mut t = 0.0;
    loop {
        t = next_arrival(t, &exp, &mut rng);
        if t > horizon {
            break;
        }
        let rate = intensity.rate(t);
        if rate > bound * (1.0 + 1e-12) {
            return Err(Error::BoundViolated { rate, bound, at: t });
        }
        let u: f64 = rng.random();
        if u * bound < rate {
            out.push(t);
        }
    }
    EventSeries::new(out, horizon)
}

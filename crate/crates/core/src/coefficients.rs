//! Complex least-squares amplitudes for a selected frequency set.
//!
//! With the symmetric set `{0, +nu_1, -nu_1, ...}`, the estimate solves
//! `Gamma c = y` where `y_j = (1/T) sum_m exp(-2 pi i nu_j t_m)` and
//! `Gamma_jk = exp(-i pi T (nu_j - nu_k)) sinc(T (nu_j - nu_k))`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::periodogram::DirectSum;
use crate::rate_model::{Component, Intensity, RateModel};
use crate::sim::EventSeries;
use crate::windows::{WindowKind, WindowSpec};

/// Condition number above which the Gram matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;
const CONJUGATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientFit {
    /// `0, +nu_1, -nu_1, +nu_2, -nu_2, ...`
    pub frequencies: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub condition: f64,
    /// `max |Gamma c - y|`.
    pub residual: f64,
    /// Largest departure from `c(-nu) = conj c(nu)` and `Im c_0 = 0`.
    pub conjugate_defect: f64,
    /// Whether `Gamma` was replaced by the identity (plain periodogram amplitudes).
    pub identity_gram: bool,
    pub horizon: f64,
    pub band_limit: f64,
}

/// The symmetric frequency list for positive frequencies `freqs`.
pub fn symmetric_frequencies(freqs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(freqs.iter().flat_map(|&f| [f, -f])).collect()
}

/// `Gamma_jk = I~(nu_j - nu_k) / T` for the rectangle window.
pub fn gram_matrix(symmetric: &[f64], horizon: f64) -> DMatrix<Complex64> {
    let rect = WindowSpec { kind: WindowKind::Rectangle, horizon };
    let n = symmetric.len();
    DMatrix::from_fn(n, n, |j, k| rect.transform(symmetric[j] - symmetric[k]) / horizon)
}

/// 2-norm condition number. The Gram matrix is Hermitian, so its singular
/// values are the absolute eigenvalues, which are cheaper to obtain.
fn condition_number(m: &DMatrix<Complex64>) -> f64 {
    let ev = m.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Solve for the coefficients given the right-hand side `y` on the
/// symmetric set built from `freqs`.
pub fn solve_coefficients(
    freqs: &[f64],
    y: &[Complex64],
    horizon: f64,
    band_limit: f64,
    identity_gram: bool,
) -> Result<CoefficientFit> {
    let symmetric = symmetric_frequencies(freqs);
    if y.len() != symmetric.len() {
        return Err(Error::InvalidParameter(format!("expected {} projections, got {}", symmetric.len(), y.len())));
    }
    let rhs = DVector::from_column_slice(y);
    let (coefficients, condition, residual) = if identity_gram {
        (rhs.clone(), 1.0, 0.0)
    } else {
        let gram = gram_matrix(&symmetric, horizon);
        let condition = condition_number(&gram);
        if !(condition <= SINGULAR_CONDITION) {
            return Err(Error::SingularGram { condition });
        }
        let c = gram.clone().lu().solve(&rhs).ok_or(Error::SingularGram { condition })?;
        let residual = (&gram * &c - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
        (c, condition, residual)
    };
    let coefficients: Vec<Complex64> = coefficients.iter().copied().collect();
    let mut defect = coefficients[0].im.abs();
    for pair in coefficients[1..].chunks(2) {
        defect = defect.max((pair[1] - pair[0].conj()).norm());
    }
    let scale = coefficients.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if defect > CONJUGATE_TOL * scale {
        return Err(Error::NotConjugate { defect });
    }
    Ok(CoefficientFit {
        frequencies: symmetric,
        coefficients,
        condition,
        residual,
        conjugate_defect: defect,
        identity_gram,
        horizon,
        band_limit,
    })
}

/// Least-squares amplitudes for positive frequencies `freqs` from events.
pub fn fit_coefficients(events: &EventSeries, freqs: &[f64], band_limit: f64, identity_gram: bool) -> Result<CoefficientFit> {
    for (i, &f) in freqs.iter().enumerate() {
        if !(f.is_finite() && f > 0.0) || freqs[..i].contains(&f) {
            return Err(Error::InvalidFrequency(f));
        }
    }
    let y = projections(events, freqs)?;
    solve_coefficients(freqs, &y, events.horizon(), band_limit, identity_gram)
}

/// Unwindowed projections `(1/T) sum_j exp(-2 pi i nu t_j)` on the symmetric
/// set; the value at `-nu` is the exact conjugate of the one at `+nu`.
pub fn projections(events: &EventSeries, freqs: &[f64]) -> Result<Vec<Complex64>> {
    let rect = DirectSum::new(events, WindowSpec::new(WindowKind::Rectangle, events.horizon())?, false)?;
    let mut y = Vec::with_capacity(1 + 2 * freqs.len());
    y.push(Complex64::new(events.mean_rate(), 0.0));
    for &f in freqs {
        let z = rect.raw(f);
        y.push(z);
        y.push(z.conj());
    }
    Ok(y)
}

impl CoefficientFit {
    /// Cosine-form rate `Re c_0 + sum 2|c_k| cos(2 pi nu_k t + arg c_k)`.
    pub fn reconstruct(&self) -> Result<RateModel> {
        reconstruct_rate(self)
    }
}

pub fn reconstruct_rate(fit: &CoefficientFit) -> Result<RateModel> {
    let (dc, components) = cosine_form(fit)?;
    RateModel::from_estimate(dc, components, fit.band_limit, fit.horizon)
}

/// As [`reconstruct_rate`], skipping the scan for negative excursions.
pub(crate) fn reconstruct_unscanned(fit: &CoefficientFit) -> Result<RateModel> {
    let (dc, components) = cosine_form(fit)?;
    RateModel::from_estimate_unscanned(dc, components, fit.band_limit)
}

fn cosine_form(fit: &CoefficientFit) -> Result<(f64, Vec<Component>)> {
    let c = &fit.coefficients;
    if c.is_empty() || c.len().is_multiple_of(2) || c.len() != fit.frequencies.len() {
        return Err(Error::InvalidParameter("coefficients must be on a symmetric frequency set".into()));
    }
    let mut defect = c[0].im.abs();
    for pair in c[1..].chunks(2) {
        defect = defect.max((pair[1] - pair[0].conj()).norm());
    }
    let scale = c.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if defect > CONJUGATE_TOL * scale {
        return Err(Error::NotConjugate { defect });
    }
    let components = fit.frequencies[1..]
        .chunks(2)
        .zip(c[1..].chunks(2))
        .map(|(f, z)| Component::new(f[0], 2.0 * z[0].norm(), z[0].arg()))
        .collect();
    Ok((c[0].re, components))
}

/// Gauss-Legendre order per panel.
const MSE_ORDER: usize = 16;
/// Panels per period of the fastest oscillation (64 nodes per period).
const PANELS_PER_PERIOD: f64 = 4.0;

/// `(1/T) int_0^T (lambda - lambda_hat)^2 dt` by composite Gauss-Legendre,
/// split at the true rate's kinks.
pub fn rate_mse<I: Intensity + ?Sized>(truth: &I, fitted: &RateModel, horizon: f64) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(MSE_ORDER).expect("nonzero"));
    let fmax = truth.max_frequency().max(fitted.max_frequency());
    let mut cuts = vec![0.0];
    cuts.extend(truth.breakpoints(horizon).into_iter().filter(|&b| b > 0.0 && b < horizon));
    cuts.push(horizon);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) * fmax * PANELS_PER_PERIOD).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let hi = if p + 1 == panels { b } else { lo + h };
            total += rule.integrate(lo, hi, |t| (truth.rate(t) - fitted.evaluate(t)).powi(2));
        }
    }
    total / horizon
}

/// Limiting covariance of `T^{3/2} (nu_hat_k - nu_k)` over the positive
/// frequencies of a model.
#[derive(Debug, Clone, Serialize)]
pub struct CovarianceDiagnostic {
    pub frequencies: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub note: &'static str,
}

const FREQ_MATCH: f64 = 1e-12;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQ_MATCH * a.abs().max(b.abs())
}

/// Entry `(k, k')` is
///
/// ```text
/// 9 / (1600 d_k d_k') * [ (4 pi^2 - 30) cos(phi_k - phi_k') c0 [k = k']
///   + sum_j d_j ( (15 - 2 pi^2) cos(phi_j - phi_k - phi_k') [nu_j = nu_k + nu_k']
///     + ((8 pi^2 - 15) cos(phi_j - phi_k + phi_k') - 6 pi^2 cos(phi_j + phi_k - phi_k')) [nu_j = nu_k - nu_k']
///     + ((8 pi^2 - 15) cos(phi_j + phi_k - phi_k') - 6 pi^2 cos(phi_j - phi_k + phi_k')) [nu_j = nu_k' - nu_k] ) ]
/// ```
pub fn asymptotic_frequency_covariance(model: &RateModel) -> Result<CovarianceDiagnostic> {
    let comps = model.components();
    if let Some(c) = comps.iter().find(|c| !(c.amp > 0.0)) {
        return Err(Error::InvalidParameter(format!("component at {} has zero amplitude", c.freq)));
    }
    let pi2 = PI * PI;
    let c0 = model.dc();
    let n = comps.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for (k, ck) in comps.iter().enumerate() {
        for (kp, ckp) in comps.iter().enumerate() {
            let mut s = 0.0;
            if k == kp {
                s += (4.0 * pi2 - 30.0) * (ck.phase - ckp.phase).cos() * c0;
            }
            for cj in comps {
                let (pj, pk, pkp) = (cj.phase, ck.phase, ckp.phase);
                let mut term = 0.0;
                if same(cj.freq, ck.freq + ckp.freq) {
                    term += (15.0 - 2.0 * pi2) * (pj - pk - pkp).cos();
                }
                if same(cj.freq, ck.freq - ckp.freq) {
                    term += (8.0 * pi2 - 15.0) * (pj - pk + pkp).cos() - 6.0 * pi2 * (pj + pk - pkp).cos();
                }
                if same(cj.freq, ckp.freq - ck.freq) {
                    term += (8.0 * pi2 - 15.0) * (pj + pk - pkp).cos() - 6.0 * pi2 * (pj - pk + pkp).cos();
                }
                s += cj.amp * term;
            }
            matrix[k][kp] = 9.0 / (1600.0 * ck.amp * ckp.amp) * s;
        }
    }
    Ok(CovarianceDiagnostic {
        frequencies: comps.iter().map(|c| c.freq).collect(),
        matrix,
        note: "the difference indicator in the second sum term is read as nu_j = nu_k - nu_k'; \
               the c0 term applies on the diagonal only",
    })
}

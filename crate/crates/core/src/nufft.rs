//! Type-1 non-uniform FFT by Gaussian gridding (Greengard & Lee, 2004).
//!
//! Computes `F[k] = sum_j c_j exp(-i k x_j)` for `k = 0..m` with the points
//! spread onto a twice-oversampled uniform grid, one FFT, and a Gaussian
//! deconvolution. Accuracy is about 1e-12 relative to `sum |c_j|`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;

const OVERSAMPLE: usize = 2;
/// Half-width of the spreading kernel in fine-grid cells.
const SPREAD: usize = 12;

pub fn nufft_type1(x: &[f64], c: &[Complex64], m: usize) -> Vec<Complex64> {
    assert_eq!(x.len(), c.len());
    if m == 0 {
        return Vec::new();
    }
    // Work on the symmetric index range k in [-half, half) and shift back by
    // modulating the sources with exp(-i half x_j).
    let m_even = m + (m & 1);
    let half = (m_even / 2) as f64;
    let mr = (OVERSAMPLE * m_even).max(2 * SPREAD);
    let mrf = mr as f64;
    let m_eff = (mr / OVERSAMPLE) as f64;
    let tau = PI * SPREAD as f64 / (m_eff * m_eff * OVERSAMPLE as f64 * (OVERSAMPLE as f64 - 0.5));
    let h = TAU / mrf;

    let sp = SPREAD as i64;
    let e3: Vec<f64> = (-sp + 1..=sp).map(|l| (-(PI * l as f64 / mrf).powi(2) / tau).exp()).collect();

    let mut grid = vec![Complex64::new(0.0, 0.0); mr];
    for (&xj, &cj) in x.iter().zip(c) {
        let xj = xj.rem_euclid(TAU);
        let (s, co) = (half * xj).sin_cos();
        let src = cj * Complex64::new(co, -s);
        let m0 = (xj / h).floor() as i64;
        let xi = xj - m0 as f64 * h;
        let e1 = (-xi * xi / (4.0 * tau)).exp();
        let e2 = (xi * PI / (mrf * tau)).exp();
        let e2_inv = 1.0 / e2;
        // weight(l) = e1 * e2^l * e3(l) for l in [-sp+1, sp]
        let mut pow = e2_inv.powi((sp - 1) as i32);
        for (idx, l) in (-sp + 1..=sp).enumerate() {
            let w = e1 * pow * e3[idx];
            let g = (m0 + l).rem_euclid(mr as i64) as usize;
            grid[g] += src * w;
            pow *= e2;
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(mr).process(&mut grid);

    let scale = (PI / tau).sqrt() / mrf;
    (0..m)
        .map(|i| {
            let k = i as f64 - half;
            let q = (k as i64).rem_euclid(mr as i64) as usize;
            grid[q] * (scale * (k * k * tau).exp())
        })
        .collect()
}

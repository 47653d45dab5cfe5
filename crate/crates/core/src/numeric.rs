//! Small numerical kernels shared across modules.

use std::f64::consts::PI;

/// `sin(pi x)` with exact argument reduction, accurate near the integers.
pub fn sin_pi(x: f64) -> f64 {
    let n = x.round();
    let u = x - n;
    let s = (PI * u).sin();
    if n.rem_euclid(2.0) == 0.0 {
        s
    } else {
        -s
    }
}

/// `cos(pi x)` with exact argument reduction.
pub fn cos_pi(x: f64) -> f64 {
    let n = x.round();
    let u = x - n;
    let c = (PI * u).cos();
    if n.rem_euclid(2.0) == 0.0 {
        c
    } else {
        -c
    }
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.abs() < 1e-6 {
        let y = PI * x;
        let y2 = y * y;
        1.0 - y2 / 6.0 + y2 * y2 / 120.0
    } else {
        sin_pi(x) / (PI * x)
    }
}

/// `e^{-2 pi i theta}` evaluated on the fractional part of `theta`.
#[inline]
pub fn unit_phasor(theta: f64) -> (f64, f64) {
    let frac = theta - theta.floor();
    let (s, c) = (2.0 * PI * frac).sin_cos();
    (c, -s)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximizer of `f` on `[lo, hi]`.
///
/// Returns `(argmax, max)`. Terminates once the bracket is narrower than `tol`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Hurwitz zeta `sum_{n >= 0} (n + q)^{-s}` for `s > 1`, `q > 0`.
///
/// Direct summation up to a shift, then Euler-Maclaurin with Bernoulli
/// corrections. Polygamma values follow from
/// `psi^{(m)}(q) = (-1)^{m+1} m! zeta(m + 1, q)`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const SHIFT: usize = 16;
    // B_{2k} / (2k)!
    const B2K_OVER_FACT: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut head = 0.0;
    for n in 0..SHIFT {
        head += (n as f64 + q).powf(-s);
    }
    let a = SHIFT as f64 + q;
    let mut tail = a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    // rising factorial s (s+1) ... (s+2k-2) times a^{-s-2k+1}
    let mut rising = s;
    let mut pow = a.powf(-s - 1.0);
    for (k, coef) in B2K_OVER_FACT.iter().enumerate() {
        tail += coef * rising * pow;
        let k2 = 2.0 * k as f64;
        rising *= (s + k2 + 1.0) * (s + k2 + 2.0);
        pow /= a * a;
    }
    head + tail
}

/// Polygamma of order 2, `psi''(x)`.
pub fn trigamma_prime(x: f64) -> f64 {
    -2.0 * hurwitz_zeta(3.0, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reduced_trig_matches_std() {
        for &x in &[0.0, 0.3, 1.0, 1.5, -2.25, 1234.567] {
            assert!((sin_pi(x) - (PI * x).sin()).abs() < 1e-12);
            assert!((cos_pi(x) - (PI * x).cos()).abs() < 1e-12);
        }
        assert_eq!(sin_pi(7.0), 0.0);
        assert_eq!(sin_pi(-3.0), 0.0);
    }

    #[test]
    fn sinc_zeros_and_origin() {
        assert_eq!(sinc(0.0), 1.0);
        assert_eq!(sinc(3.0), 0.0);
        assert_relative_eq!(sinc(0.5), 2.0 / PI, max_relative = 1e-15);
        assert_relative_eq!(sinc(1e-8), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, fx) = golden_max(|x| -(x - 0.3).powi(2) + 2.0, -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert_relative_eq!(fx, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn hurwitz_against_known_values() {
        // zeta(3) and zeta(2, 1) = pi^2 / 6
        assert_relative_eq!(hurwitz_zeta(3.0, 1.0), 1.202_056_903_159_594_2, max_relative = 1e-14);
        assert_relative_eq!(hurwitz_zeta(2.0, 1.0), PI * PI / 6.0, max_relative = 1e-14);
        // psi''(1) = -2 zeta(3)
        assert_relative_eq!(trigamma_prime(1.0), -2.404_113_806_319_188_5, max_relative = 1e-14);
        // brute force far in the tail
        let brute: f64 = (0..2_000_000).map(|n| (n as f64 + 101.5).powi(-5)).sum();
        assert_relative_eq!(hurwitz_zeta(5.0, 101.5), brute, max_relative = 1e-9);
    }
}

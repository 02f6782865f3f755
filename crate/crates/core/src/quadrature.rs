//! Adaptive Gauss–Kronrod quadrature and complete elliptic integrals.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive bisection until the summed error estimate is below `rel_tol`
/// relative to the integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut panels = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.2 .0).sum();
        let err: f64 = panels.iter().map(|p| p.2 .1).sum();
        if err <= rel_tol * total.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("at least one panel");
        let (lo, hi, _) = panels.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        panels.push((lo, mid, gk15(&f, lo, mid)));
        panels.push((mid, hi, gk15(&f, mid, hi)));
    }
    panels.sort_by(|x, y| x.0.total_cmp(&y.0));
    panels.iter().map(|p| p.2 .0).sum()
}

/// Complete elliptic integral of the second kind, E(k) = ∫₀^{π/2} √(1 − k² sin²θ) dθ.
///
/// The argument is the modulus k, not the parameter m = k².
pub fn complete_elliptic_e(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::ModulusOutOfRange(k));
    }
    let k2 = k * k;
    Ok(integrate(
        |t: f64| {
            let s = t.sin();
            (1.0 - k2 * s * s).sqrt()
        },
        0.0,
        FRAC_PI_2,
        1e-14,
    ))
}

/// E(k) and K(k) by the arithmetic–geometric mean.
pub fn elliptic_agm(k: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::ModulusOutOfRange(k));
    }
    let mut a = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    let mut c = k;
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        pow *= 2.0;
        sum += pow * c * c;
        a = an;
        b = bn;
    }
    let kk = FRAC_PI_2 / a;
    Ok((kk * (1.0 - sum), kk))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e_at_zero() {
        assert!((complete_elliptic_e(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn e_near_one() {
        assert!((complete_elliptic_e(0.999_999).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn out_of_range() {
        assert!(complete_elliptic_e(1.0).is_err());
        assert!(complete_elliptic_e(-0.1).is_err());
        assert!(elliptic_agm(1.5).is_err());
    }

    #[test]
    fn quadrature_matches_agm() {
        for k in [0.1, 0.5, 2.0 * 2f64.sqrt() / 3.0, 0.9, 0.99] {
            let q = complete_elliptic_e(k).unwrap();
            let (e, _) = elliptic_agm(k).unwrap();
            assert!(((q - e) / e).abs() < 1e-12, "k={k}: {q} vs {e}");
        }
    }

    #[test]
    fn agm_legendre_relation_at_half_square() {
        // Legendre: 2EK − K² = π/2 at k = 1/√2.
        let (e, kk) = elliptic_agm(0.5f64.sqrt()).unwrap();
        assert!((2.0 * e * kk - kk * kk - FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn integrates_polynomials_and_peaks() {
        let v = integrate(|x| x.powi(5), 0.0, 2.0, 1e-13);
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1.0 / 1e-2f64).atan() / 1e-2;
        assert!(((v - exact) / exact).abs() < 1e-11);
    }
}

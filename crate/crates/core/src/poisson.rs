//! Exact Poisson sampling: sequential inversion for small means and
//! Hörmann's transformed rejection with squeeze (PTRS) above.

use crate::error::{Error, Result};
use crate::rng::Stream;

/// Means above this are rejected as a configuration error.
pub const MAX_POISSON_MEAN: f64 = 1e9;

const INVERSION_LIMIT: f64 = 30.0;

pub fn sample_poisson(mean: f64, rng: &mut Stream) -> Result<u64> {
    if !(mean >= 0.0) {
        return Err(Error::domain(format!("Poisson mean must be nonnegative, got {mean}")));
    }
    if mean > MAX_POISSON_MEAN {
        return Err(Error::ComplexityGuard { mean, limit: MAX_POISSON_MEAN });
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean < INVERSION_LIMIT {
        Ok(inversion(mean, rng))
    } else {
        Ok(ptrs(mean, rng))
    }
}

fn inversion(mean: f64, rng: &mut Stream) -> u64 {
    let mut u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    loop {
        if u < p {
            return k;
        }
        u -= p;
        k += 1;
        p *= mean / k as f64;
        // Tail mass lost to rounding; restart is exact in distribution.
        if p <= 0.0 || k > 1000 {
            u = rng.uniform();
            k = 0;
            p = (-mean).exp();
        }
    }
}

fn ptrs(mean: f64, rng: &mut Stream) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -mean + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// `ln(k!)`: table below 10, Stirling series above (error < 1e-15).
pub fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_146,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
    ];
    if k < 10 {
        return TABLE[k as usize];
    }
    let n = k as f64 + 1.0;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    (n - 0.5) * n.ln() - n + 0.918_938_533_204_672_8
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(mean: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = Stream::from_seed(seed);
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_poisson(mean, &mut rng).unwrap() as f64)
            .collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn ln_factorial_matches_direct_sum() {
        let mut acc = 0.0f64;
        for k in 1..200u64 {
            acc += (k as f64).ln();
            assert!((ln_factorial(k) - acc).abs() < 1e-12 * acc.max(1.0), "k = {k}");
        }
    }

    #[test]
    fn mean_and_variance_both_regimes() {
        for (i, &mean) in [0.3, 5.7596, 29.9, 30.0, 250.0, 1e5].iter().enumerate() {
            let n = 100_000;
            let (m, v) = moments(mean, n, 11 + i as u64);
            let se = (mean / n as f64).sqrt();
            assert!((m - mean).abs() < 5.0 * se, "mean {mean}: got {m}");
            // Var of the sample variance ≈ (μ + 2μ²)/n for Poisson.
            let se_v = ((mean + 2.0 * mean * mean) / n as f64).sqrt();
            assert!((v - mean).abs() < 5.0 * se_v, "mean {mean}: var {v}");
        }
    }

    #[test]
    fn small_mean_pmf() {
        let mut rng = Stream::from_seed(3);
        let n = 200_000;
        let mut zeros = 0;
        for _ in 0..n {
            if sample_poisson(1.0, &mut rng).unwrap() == 0 {
                zeros += 1;
            }
        }
        let p = (-1.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((zeros as f64 / n as f64 - p).abs() < 5.0 * se);
    }

    #[test]
    fn guard_and_domain() {
        let mut rng = Stream::from_seed(0);
        assert_eq!(sample_poisson(0.0, &mut rng).unwrap(), 0);
        assert!(matches!(
            sample_poisson(2e9, &mut rng),
            Err(Error::ComplexityGuard { .. })
        ));
        assert!(sample_poisson(-1.0, &mut rng).is_err());
        assert!(sample_poisson(f64::NAN, &mut rng).is_err());
    }
}

//! Reproducible Poisson sampling. Each sinogram bin draws from its own
//! ChaCha20 stream keyed by `(seed, bin)`, so results do not depend on
//! evaluation order or thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

/// Uniform double in `[0, 1)` from the top 53 bits.
fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `ln k!`, exact table below 10 and a Stirling series above.
fn ln_factorial(k: f64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        std::f64::consts::LN_2,
        1.791_759_469_228_055,
        3.178_053_830_347_945_8,
        4.787_491_742_782_046,
        6.579_251_212_010_101,
        8.525_161_361_065_415,
        10.604_602_902_745_25,
        12.801_827_480_081_469,
    ];
    if k < 10.0 {
        return TABLE[k as usize];
    }
    let n = k + 1.0;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    (n - 0.5) * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// One Poisson draw: inversion for `mean < 30`, Hörmann's PTRS otherwise.
pub fn poisson_sample(mean: f64, rng: &mut impl RngCore) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < 30.0 {
        let u = uniform(rng);
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u > cdf && k < 1000 {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
        }
        return k;
    }
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = uniform(rng) - 0.5;
        let v = uniform(rng);
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln() <= -mean + k * loglam - ln_factorial(k) {
            return k as u64;
        }
    }
}

/// Independent Poisson draws for every bin of `means`.
pub fn sample_poisson(means: &[f64], seed: u64) -> Vec<f64> {
    means
        .par_iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            poisson_sample(m, &mut rng) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for k in 0..60u32 {
            let direct: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
            assert!((ln_factorial(k as f64) - direct).abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn sample_means_within_three_sigma() {
        for &lam in &[10.0, 80.0] {
            let n = 100_000;
            let s = sample_poisson(&vec![lam; n], 7);
            let mean = s.iter().sum::<f64>() / n as f64;
            let sigma = (lam / n as f64).sqrt();
            assert!((mean - lam).abs() < 3.0 * sigma, "lambda {lam}: mean {mean}");
        }
    }

    #[test]
    fn zero_mean_gives_zero() {
        assert_eq!(sample_poisson(&[0.0, 0.0], 1), vec![0.0, 0.0]);
    }
}

//! Coefficient and innovation laws, binomial thinning, and the stable reference law.

mod innovation;
mod phi;
mod stable;

pub use innovation::{InnovationLaw, InnovationSampler};
pub use phi::{PhiLaw, PhiSampler};
pub use stable::StableLaw;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Counts up to this size are thinned trial by trial.
const DIRECT_THINNING_MAX: u64 = 16;

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Binomial thinning `phi ∘ x`: the number of successes in `x` independent
/// Bernoulli(`phi`) trials. Exact for every `x`: small counts are summed
/// trial by trial, larger ones go through inversion (BINV) or BTPE.
#[inline]
pub fn thin<R: Rng + ?Sized>(x: u64, phi: f64, rng: &mut R) -> u64 {
    debug_assert!((0.0..=1.0).contains(&phi), "thinning probability {phi}");
    if x == 0 || phi <= 0.0 {
        return 0;
    }
    if phi >= 1.0 {
        return x;
    }
    if x <= DIRECT_THINNING_MAX {
        // one 64-bit comparison per individual, as rand's Bernoulli does
        let threshold = (phi * TWO_POW_64) as u64;
        return (0..x).filter(|_| rng.next_u64() < threshold).count() as u64;
    }
    Binomial::new(x, phi)
        .expect("thinning probability in [0, 1]")
        .sample(rng)
}

/// Thinning driven by one uniform per individual slot: slot `i` survives iff
/// `uniforms[i] < phi`. Monotone in `x` for shared uniforms.
pub fn thin_monotone(x: u64, phi: f64, uniforms: &[f64]) -> u64 {
    let x = x as usize;
    assert!(uniforms.len() >= x, "need one uniform per individual");
    uniforms[..x].iter().filter(|u| **u < phi).count() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn degenerate_cases() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(thin(0, 0.3, &mut rng), 0);
        assert_eq!(thin(5, 1.0, &mut rng), 5);
        assert_eq!(thin(5, 0.0, &mut rng), 0);
    }

    #[test]
    fn thin_two_half_chi_square() {
        let mut rng = RngStream::new(2, 0);
        let n = 1_000_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[thin(2, 0.5, &mut rng) as usize] += 1;
        }
        // enumerate the four Bernoulli outcomes: {00}, {01, 10}, {11}
        let pmf = [0.25, 0.5, 0.25];
        let chi2: f64 = counts
            .iter()
            .zip(pmf)
            .map(|(c, p)| (*c as f64 - n as f64 * p).powi(2) / (n as f64 * p))
            .sum();
        // two degrees of freedom: P(chi2 > x) = exp(-x / 2)
        let p_value = (-chi2 / 2.0).exp();
        assert!(p_value > 0.01, "chi2 = {chi2}");
    }

    #[test]
    fn large_counts_have_binomial_moments() {
        let mut rng = RngStream::new(3, 0);
        let x = 1_000_000_000u64;
        let p = 0.3;
        let reps = 20_000;
        let draws: Vec<f64> = (0..reps).map(|_| thin(x, p, &mut rng) as f64).collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / reps as f64;
        let sd = (x as f64 * p * (1.0 - p)).sqrt();
        assert!((mean - x as f64 * p).abs() < 5.0 * sd / (reps as f64).sqrt());
        assert!((var / (sd * sd) - 1.0).abs() < 0.05);
    }

    #[test]
    fn monotone_thinning_is_monotone() {
        let mut rng = RngStream::new(4, 0);
        let us: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let mut prev = 0;
        for x in 0..50 {
            let s = thin_monotone(x, 0.37, &us);
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn determinism_from_equal_state() {
        let a = RngStream::new(77, 3);
        let mut b = a.clone();
        let mut a = a;
        for x in [3u64, 40, 10_000, 1 << 40] {
            assert_eq!(thin(x, 0.42, &mut a), thin(x, 0.42, &mut b));
        }
    }
}

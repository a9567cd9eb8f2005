use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail index and tail constant `lim h(t) P(X > t)` fitted from the top order statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub alpha_hat: f64,
    /// Asymptotic standard error `alpha_hat / sqrt(k)`.
    pub alpha_se: f64,
    pub c_hat: f64,
    pub k_used: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Fits at `k / 2` and `2k` next to the main fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSensitivity {
    pub fit: TailFit,
    pub half_k: Option<TailFit>,
    pub double_k: Option<TailFit>,
}

/// `floor(sqrt(n))`.
pub fn default_k(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("sample contains NaN".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Hill estimator on a strictly positive sample. The tail constant uses
/// `h(t) = t^alpha_hat`.
pub fn hill_estimate(sample: &[f64], k: usize) -> Result<TailFit> {
    if let Some(bad) = sample.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(format!("Hill estimator needs positive values, found {bad}")));
    }
    let sorted = sorted_copy(sample)?;
    let alpha = hill_alpha(&sorted, k)?;
    fit_sorted(&sorted, k, &|t: f64| t.powf(alpha))
}

/// Hill fit with a caller-supplied normalizing function `h`. Values at or
/// below the threshold `x_(n-k)` may be zero or negative; the threshold must
/// be positive. `k = None` takes [`default_k`].
pub fn tail_fit(sample: &[f64], k: Option<usize>, h: &dyn Fn(f64) -> f64) -> Result<TailFit> {
    let sorted = sorted_copy(sample)?;
    fit_sorted(&sorted, k.unwrap_or_else(|| default_k(sorted.len())), h)
}

/// [`tail_fit`] plus the same fit at `k / 2` and `2k` where those are admissible.
pub fn tail_fit_sensitivity(
    sample: &[f64],
    k: Option<usize>,
    h: &dyn Fn(f64) -> f64,
) -> Result<TailSensitivity> {
    let sorted = sorted_copy(sample)?;
    let k = k.unwrap_or_else(|| default_k(sorted.len()));
    Ok(TailSensitivity {
        fit: fit_sorted(&sorted, k, h)?,
        half_k: fit_sorted(&sorted, k / 2, h).ok(),
        double_k: fit_sorted(&sorted, 2 * k, h).ok(),
    })
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k < 10 || 2 * k >= n {
        return Err(Error::InvalidArgument(format!(
            "Hill estimator needs 10 <= k < n/2, got k={k}, n={n}"
        )));
    }
    Ok(())
}

fn hill_alpha(sorted: &[f64], k: usize) -> Result<f64> {
    let n = sorted.len();
    check_k(n, k)?;
    let threshold = sorted[n - k - 1];
    if !(threshold > 0.0) {
        return Err(Error::DegenerateTail(format!("threshold order statistic {threshold} is not positive")));
    }
    let excess: f64 = sorted[n - k..].iter().map(|&x| (x / threshold).ln()).sum();
    if !(excess > 0.0) {
        return Err(Error::DegenerateTail("top order statistics are all equal".into()));
    }
    Ok(k as f64 / excess)
}

fn fit_sorted(sorted: &[f64], k: usize, h: &dyn Fn(f64) -> f64) -> Result<TailFit> {
    let alpha_hat = hill_alpha(sorted, k)?;
    let n = sorted.len();
    let lo = k.div_ceil(4).max(1);
    let mut total = 0.0;
    let mut exceedances = 0.0;
    for j in lo..=k {
        let t = sorted[n - 1 - j];
        let above = (n - sorted.partition_point(|&v| v <= t)) as f64;
        total += h(t) * above / n as f64;
        exceedances += above;
    }
    let terms = (k - lo + 1) as f64;
    let c_hat = total / terms;
    // binomial error of the exceedance counts, at their average level
    let half_width = 1.96 * c_hat / (exceedances / terms).max(1.0).sqrt();
    Ok(TailFit {
        alpha_hat,
        alpha_se: alpha_hat / (k as f64).sqrt(),
        c_hat,
        k_used: k,
        ci_low: c_hat - half_width,
        ci_high: c_hat + half_width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{InnovationLaw, StableLaw};
    use crate::rng::RngStream;
    use rand::Rng;
    use rand_distr::{Distribution, OpenClosed01};

    fn pareto_sample(alpha: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n)
            .map(|_| {
                let u: f64 = OpenClosed01.sample(&mut rng);
                u.powf(-1.0 / alpha)
            })
            .collect()
    }

    #[test]
    fn exact_pareto() {
        let s = pareto_sample(1.5, 1_000_000, 1);
        let fit = hill_estimate(&s, 1000).unwrap();
        assert!((1.4..=1.6).contains(&fit.alpha_hat), "{fit:?}");
        // P(X > t) = t^-1.5 and h(t) = t^alpha_hat
        assert!((fit.c_hat - 1.0).abs() < 0.5, "{fit:?}");
        assert!(fit.ci_low <= fit.c_hat && fit.c_hat <= fit.ci_high);
    }

    #[test]
    fn within_three_standard_errors() {
        for k in [100usize, 1000] {
            for seed in 0..5 {
                let s = pareto_sample(1.5, 100_000, 100 + seed);
                let fit = hill_estimate(&s, k).unwrap();
                let se = 1.5 / (k as f64).sqrt();
                assert!((fit.alpha_hat - 1.5).abs() < 3.0 * se, "k={k} seed={seed} {fit:?}");
            }
        }
    }

    #[test]
    fn constant_sample_has_no_tail() {
        let s = vec![2.0; 1000];
        assert!(matches!(hill_estimate(&s, 100), Err(Error::DegenerateTail(_))));
    }

    #[test]
    fn rejects_non_positive_and_bad_k() {
        let mut s = pareto_sample(1.0, 1000, 2);
        assert!(hill_estimate(&s, 5).is_err());
        assert!(hill_estimate(&s, 500).is_err());
        s[3] = 0.0;
        assert!(hill_estimate(&s, 100).is_err());
        // zeros below the threshold are fine for tail_fit
        assert!(tail_fit(&s, Some(100), &|t| t).is_ok());
    }

    #[test]
    fn discrete_pareto_floor_washes_out() {
        let law = InnovationLaw::pareto(0.8, 1.0).unwrap();
        let sampler = law.sampler().unwrap();
        let mut rng = RngStream::new(3, 0);
        let s: Vec<f64> = (0..1_000_000).map(|_| sampler.sample(&mut rng) as f64).collect();
        let fit = tail_fit(&s, None, &|t| law.h(t).unwrap()).unwrap();
        assert!((0.72..=0.88).contains(&fit.alpha_hat), "{fit:?}");
        assert!((fit.c_hat - 1.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn stable_tail_index() {
        let law = StableLaw::new(0.7, 1.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let s: Vec<f64> = (0..1_000_000).map(|_| rng.sample(law)).collect();
        let fit = hill_estimate(&s, default_k(s.len())).unwrap();
        assert!((0.63..=0.77).contains(&fit.alpha_hat), "{fit:?}");
    }

    #[test]
    fn order_free_and_repeatable() {
        let s = pareto_sample(2.0, 5000, 5);
        let mut r = s.clone();
        r.reverse();
        let a = tail_fit_sensitivity(&s, None, &|t| t * t).unwrap();
        assert_eq!(a, tail_fit_sensitivity(&r, None, &|t| t * t).unwrap());
        assert_eq!(a.fit.k_used, 70);
        assert_eq!(a.half_k.unwrap().k_used, 35);
        assert_eq!(a.double_k.unwrap().k_used, 140);
    }
}

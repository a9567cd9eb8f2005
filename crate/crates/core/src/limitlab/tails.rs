use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::hill::{default_k, tail_fit_sensitivity, TailSensitivity};
use super::order_free_mean;
use crate::distributions::{thin, InnovationLaw};
use crate::engine::{ModelSpec, StationaryConfig, StationarySampler};
use crate::error::{Error, Result};
use crate::genealogy::total_progeny;
use crate::rng::StreamSource;

/// Residual bound used when truncating `1 + sum_i prod_{j <= i} phi_j`.
pub const PRODUCT_SERIES_RESIDUAL: f64 = 1e-6;

fn pareto_h(law: &InnovationLaw) -> Result<impl Fn(f64) -> f64 + '_> {
    if law.tail_index().is_none() {
        return Err(Error::NotHeavyTailed);
    }
    Ok(move |t: f64| law.h(t).unwrap_or(f64::NAN))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationaryTailReport {
    pub fit: TailSensitivity,
    /// `(1 - E[phi^alpha])^-1`
    pub target: f64,
    pub rel_error: f64,
    #[serde(skip)]
    pub sample: Vec<u64>,
}

/// Draws stationary values and compares the fitted `lim h(t) P(X > t)` with
/// `(1 - E[phi^alpha])^-1`.
pub fn stationary_tail_experiment(
    model: &ModelSpec,
    draws: usize,
    cfg: StationaryConfig,
    k: Option<usize>,
    source: &StreamSource,
) -> Result<StationaryTailReport> {
    let h = pareto_h(&model.innovation)?;
    let alpha = model.tail_index().ok_or(Error::NotHeavyTailed)?;
    let sampler = StationarySampler::new(model, cfg)?;
    let sample = source.try_draw("stationary", draws, |rng| sampler.sample(rng))?;
    let values: Vec<f64> = sample.iter().map(|&v| v as f64).collect();
    let fit = tail_fit_sensitivity(&values, k, &h)?;
    let target = 1.0 / (1.0 - model.phi.moment(alpha));
    Ok(StationaryTailReport {
        rel_error: (fit.fit.c_hat / target - 1.0).abs(),
        fit,
        target,
        sample,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThinningTailReport {
    pub phi: f64,
    pub constant: f64,
    /// `phi^alpha`
    pub target: f64,
    /// Relative error, or the absolute error when the target is 0.
    pub error: f64,
    pub k_used: usize,
    #[serde(skip)]
    pub sample: Vec<u64>,
}

/// `h(t) P(phi ∘ Z > t)` averaged over thresholds `t_j` at the upper
/// quantiles of `Z`, `j` in `[k/4, k]`, against `phi^alpha`.
pub fn thinning_tail_check(
    model: &ModelSpec,
    phi: f64,
    draws: usize,
    k: Option<usize>,
    source: &StreamSource,
) -> Result<ThinningTailReport> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::InvalidArgument(format!("thinning probability {phi} outside [0, 1]")));
    }
    let h = pareto_h(&model.innovation)?;
    let alpha = model.tail_index().ok_or(Error::NotHeavyTailed)?;
    let z_sampler = model.innovation.sampler()?;
    let pairs = source.draw("thinning", draws, |rng| {
        let z = z_sampler.sample(rng);
        (z, thin(z, phi, rng))
    });
    let k = k.unwrap_or_else(|| default_k(draws));
    if k < 10 || 2 * k >= draws {
        return Err(Error::InvalidArgument(format!("need 10 <= k < n/2, got k={k}, n={draws}")));
    }
    let mut z: Vec<u64> = pairs.iter().map(|p| p.0).collect();
    z.sort_unstable();
    let mut thinned: Vec<u64> = pairs.iter().map(|p| p.1).collect();
    thinned.sort_unstable();
    let n = draws as f64;
    let lo = k.div_ceil(4).max(1);
    let mut terms = Vec::with_capacity(k - lo + 1);
    for j in lo..=k {
        let t = z[draws - 1 - j].max(1) as f64;
        let above = (draws - thinned.partition_point(|&v| v as f64 <= t)) as f64;
        terms.push(h(t) * above / n);
    }
    let constant = order_free_mean(&terms);
    let target = phi.powf(alpha);
    let error = if target == 0.0 { constant } else { (constant / target - 1.0).abs() };
    Ok(ThinningTailReport {
        phi,
        constant,
        target,
        error,
        k_used: k,
        sample: thinned,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct YTailReport {
    pub fit: TailSensitivity,
    /// Monte Carlo estimate of `E[(1 + sum_i prod_{j <= i} phi_j)^alpha]`.
    pub target: f64,
    pub target_se: f64,
    pub rel_error: f64,
    #[serde(skip)]
    pub sample: Vec<u64>,
}

/// Tail constant of the total progeny `Y` of `Z` immigrants against the
/// mean of `(1 + sum_i prod_{j <= i} phi_j)^alpha`. `reps` draws are used
/// for each side.
pub fn y_tail_constant_experiment(
    model: &ModelSpec,
    reps: usize,
    k: Option<usize>,
    source: &StreamSource,
) -> Result<YTailReport> {
    let h = pareto_h(&model.innovation)?;
    let alpha = model.tail_index().ok_or(Error::NotHeavyTailed)?;
    let sampler = model.sampler()?;
    let sample = source.try_draw("progeny", reps, |rng| {
        let z0 = sampler.draw_z(rng);
        total_progeny(z0, &sampler.phi, rng)
    })?;
    let values: Vec<f64> = sample.iter().map(|&v| v as f64).collect();
    let fit = tail_fit_sensitivity(&values, k, &h)?;

    let m = model.phi.mean();
    let ratio = m / (1.0 - m);
    let terms = source.draw("product_series", reps, |rng| {
        let mut p = 1.0;
        let mut sum = 1.0;
        loop {
            p *= sampler.draw_phi(rng);
            sum += p;
            if p * ratio < PRODUCT_SERIES_RESIDUAL {
                break;
            }
        }
        f64::powf(sum, alpha)
    });
    let target = order_free_mean(&terms);
    let var = order_free_mean(&terms.iter().map(|t| (t - target).powi(2)).collect::<Vec<_>>());
    Ok(YTailReport {
        rel_error: (fit.fit.c_hat / target - 1.0).abs(),
        fit,
        target,
        target_se: (var / reps as f64).sqrt(),
        sample,
    })
}

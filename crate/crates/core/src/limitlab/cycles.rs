use serde::{Deserialize, Serialize};

use super::hill::{tail_fit_sensitivity, TailSensitivity};
use super::ks::{Cdf, Ecdf};
use super::order_free_mean;
use crate::engine::{collect_cycles, ModelSpec};
use crate::error::{Error, Result};
use crate::rng::StreamSource;

/// Least-squares line through `(t, log P(sigma_1 > t))` for integer `t` in `[q50, q99]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurvivalFit {
    pub t_low: u64,
    pub t_high: u64,
    pub points: usize,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r_squared: Option<f64>,
    /// Fewer than two usable points, e.g. when every cycle has length 1.
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CycleTailReport {
    pub cycles: usize,
    pub mean_sigma: f64,
    pub mean_w: f64,
    /// Hill fit of the cycle sums `W`; `None` for light-tailed innovations.
    pub w_fit: Option<TailSensitivity>,
    pub sigma_fit: SurvivalFit,
    /// Correlation of consecutive cycle lengths; `None` when they are constant.
    pub adjacent_correlation: Option<f64>,
    #[serde(skip)]
    pub sigma: Vec<u64>,
    #[serde(skip)]
    pub w: Vec<u128>,
}

fn survival_fit(sigma: &[u64]) -> Result<SurvivalFit> {
    let ecdf = Ecdf::from_counts(sigma)?;
    let t_low = ecdf.quantile(0.5) as u64;
    let t_high = ecdf.quantile(0.99) as u64;
    let pts: Vec<(f64, f64)> = (t_low..=t_high)
        .filter_map(|t| {
            let s = 1.0 - ecdf.cdf(t as f64);
            (s > 0.0).then(|| (t as f64, s.ln()))
        })
        .collect();
    let mut fit = SurvivalFit {
        t_low,
        t_high,
        points: pts.len(),
        slope: None,
        intercept: None,
        r_squared: None,
        degenerate: pts.len() < 2,
    };
    if fit.degenerate {
        return Ok(fit);
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    fit.slope = Some(slope);
    fit.intercept = Some(my - slope * mx);
    fit.r_squared = Some(if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 });
    Ok(fit)
}

fn adjacent_correlation(sigma: &[u64]) -> Option<f64> {
    if sigma.len() < 3 {
        return None;
    }
    let a: Vec<f64> = sigma[..sigma.len() - 1].iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = sigma[1..].iter().map(|&v| v as f64).collect();
    let (ma, mb) = (a.iter().sum::<f64>() / a.len() as f64, b.iter().sum::<f64>() / b.len() as f64);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Cuts one path from `X_0 = 0` into `cycles` regeneration cycles, fits the
/// tail of the cycle sums and the log-survival of the cycle lengths.
pub fn cycle_tail_experiment(
    model: &ModelSpec,
    cycles: usize,
    k: Option<usize>,
    source: &StreamSource,
) -> Result<CycleTailReport> {
    if cycles < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 cycles, got {cycles}")));
    }
    let mut rng = source.stream("cycles", 0);
    let records = collect_cycles(model, cycles, &mut rng)?;
    let sigma: Vec<u64> = records.iter().map(|c| c.sigma).collect();
    let w: Vec<u128> = records.iter().map(|c| c.w).collect();
    drop(records);
    let wf: Vec<f64> = w.iter().map(|&v| v as f64).collect();
    let w_fit = match model.tail_index() {
        Some(_) => {
            let law = &model.innovation;
            Some(tail_fit_sensitivity(&wf, k, &|t| law.h(t).unwrap_or(f64::NAN))?)
        }
        None => None,
    };
    Ok(CycleTailReport {
        cycles,
        mean_sigma: order_free_mean(&sigma.iter().map(|&v| v as f64).collect::<Vec<_>>()),
        mean_w: order_free_mean(&wf),
        w_fit,
        sigma_fit: survival_fit(&sigma)?,
        adjacent_correlation: adjacent_correlation(&sigma),
        sigma,
        w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{InnovationLaw, PhiLaw};

    #[test]
    fn zero_phi_cycles_are_single_steps() {
        let m = ModelSpec::new(PhiLaw::degenerate(0.0).unwrap(), InnovationLaw::pareto(1.5, 1.0).unwrap()).unwrap();
        let r = cycle_tail_experiment(&m, 100_000, None, &StreamSource::new(1)).unwrap();
        assert!(r.sigma.iter().all(|&s| s == 1));
        assert!(r.sigma_fit.degenerate);
        assert!(r.adjacent_correlation.is_none());
        let a = r.w_fit.unwrap().fit.alpha_hat;
        assert!((a - 1.5).abs() < 0.25, "{a}");
    }

    #[test]
    fn exact_geometric_lengths() {
        // lengths with P(sigma > t) = 2^-t for t >= 1 fit slope -ln 2 exactly
        let mut sigma = Vec::new();
        for t in 1..=12u32 {
            let copies = if t == 12 { 2 } else { 1 << (12 - t) };
            sigma.extend(std::iter::repeat_n(u64::from(t), copies));
        }
        let f = survival_fit(&sigma).unwrap();
        assert!(!f.degenerate);
        assert!((f.slope.unwrap() + std::f64::consts::LN_2).abs() < 1e-9, "{f:?}");
        assert!((f.r_squared.unwrap() - 1.0).abs() < 1e-12);
    }
}

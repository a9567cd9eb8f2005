use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::hill::{tail_fit_sensitivity, TailSensitivity};
use super::ks::{ks_one_sample, ks_two_sample, Continuous, Ecdf, KsResult};
use super::{order_free_mean, SumsCase};
use crate::engine::{collect_cycles, ModelSpec, StationaryConfig, StationarySampler};
use crate::error::{Error, Result};
use crate::rng::StreamSource;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumsOptions {
    /// Stationary draws used for truncated moments and the empirical mean.
    pub pre_sample: usize,
    /// Second horizon `compare_factor * n` for the self-consistency check.
    pub compare_factor: u64,
    pub hill_k: Option<usize>,
    /// Regeneration cycles used to estimate the long-run variance.
    pub variance_cycles: usize,
    pub stationary: StationaryConfig,
}

impl Default for SumsOptions {
    fn default() -> Self {
        SumsOptions {
            pre_sample: 1_000_000,
            compare_factor: 4,
            hill_k: None,
            variance_cycles: 100_000,
            stationary: StationaryConfig::default(),
        }
    }
}

/// Centering and scale at one horizon: the sample is `(S_n - center) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub n: u64,
    pub center: f64,
    pub scale: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaussianCheck {
    /// `E[(W_1 - mu sigma_1)^2] / E[sigma_1]` from regeneration cycles.
    pub long_run_variance: f64,
    pub ks: KsResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SumsReport {
    pub case: SumsCase,
    pub reps: u64,
    pub norm: Normalization,
    pub norm_long: Normalization,
    /// Mean used for centering: `E[Z] / (1 - E[phi])` when finite.
    pub mean: Option<f64>,
    /// Empirical stationary mean of the pre-sample.
    pub mean_hat: Option<f64>,
    pub min: f64,
    pub all_nonnegative: bool,
    pub hill: Option<TailSensitivity>,
    /// Two-sample KS between the normalized sums at `n` and `compare_factor * n`.
    pub self_consistency: KsResult,
    pub gaussian: Option<GaussianCheck>,
    #[serde(skip)]
    pub sample: Vec<f64>,
    #[serde(skip)]
    pub sample_long: Vec<f64>,
}

fn check_case(model: &ModelSpec, case: SumsCase) -> Result<()> {
    let implied = SumsCase::for_tail_index(model.tail_index());
    if implied != case {
        let detail = match model.tail_index() {
            Some(a) => format!("tail index {a} calls for {}", implied.name()),
            None => format!("light-tailed innovations call for {}", implied.name()),
        };
        return Err(Error::CaseMismatch { case, detail });
    }
    Ok(())
}

/// `sum_{k=1}^n X_k` from a stationary `X_0`, once per replica.
fn stationary_sums(
    model: &ModelSpec,
    n: u64,
    reps: u64,
    cfg: StationaryConfig,
    tag: &str,
    source: &StreamSource,
) -> Result<Vec<f64>> {
    let sampler = model.sampler()?;
    let start = StationarySampler::new(model, cfg)?;
    let sums = source.replicate(tag, reps, |_, rng| -> Result<f64> {
        let mut x = start.sample(rng)?;
        let mut s = 0u128;
        for _ in 0..n {
            x = sampler.advance(x, rng).x;
            s += u128::from(x);
        }
        Ok(s as f64)
    });
    sums.into_iter().collect()
}

/// Smallest order statistic `t > 0` of the sorted pre-sample such that
/// `n s^-2 E[X^2; X <= s] <= 1` holds at `t` and at every larger order
/// statistic `s`. Near the bottom of the support the truncated moment
/// vanishes and the inequality holds trivially, so the scan runs downward.
fn boundary_scale(sorted: &[f64], n: u64) -> Result<f64> {
    let total = sorted.len() as f64;
    let holds = |t: f64, second: f64| t > 0.0 && n as f64 * second / total <= t * t;
    let mut second: f64 = sorted.iter().map(|x| x * x).sum();
    let mut answer = None;
    let mut i = sorted.len();
    while i > 0 {
        let t = sorted[i - 1];
        if !holds(t, second) {
            break;
        }
        answer = Some(t);
        while i > 0 && sorted[i - 1] == t {
            second -= t * t;
            i -= 1;
        }
    }
    answer.ok_or_else(|| Error::InvalidArgument(format!("pre-sample too small to fix the scale at n={n}")))
}

/// Normalized partial sums at horizons `n` and `compare_factor * n`.
///
/// Sums start from a stationary `X_0`. Centering uses the exact mean
/// `E[Z] / (1 - E[phi])` when it is finite; the pre-sample mean is reported
/// alongside.
pub fn partial_sums_experiment(
    model: &ModelSpec,
    case: SumsCase,
    n: u64,
    reps: u64,
    opts: &SumsOptions,
    source: &StreamSource,
) -> Result<SumsReport> {
    check_case(model, case)?;
    if n == 0 || reps < 2 || opts.compare_factor < 2 {
        return Err(Error::InvalidArgument("sums need n >= 1, reps >= 2 and compare_factor >= 2".into()));
    }
    let law = &model.innovation;
    let pre: Option<Vec<f64>> = if case == SumsCase::SubCritical {
        None
    } else {
        let start = StationarySampler::new(model, opts.stationary)?;
        let mut v: Vec<f64> = source
            .try_draw("pre_sample", opts.pre_sample, |rng| start.sample(rng))?
            .into_iter()
            .map(|x| x as f64)
            .collect();
        v.sort_by(f64::total_cmp);
        Some(v)
    };
    let mean_hat = pre.as_ref().map(|v| v.iter().sum::<f64>() / v.len() as f64);
    let mean = model.stationary_mean().or(mean_hat);

    let normalize = |n: u64| -> Result<Normalization> {
        let (center, scale) = match case {
            SumsCase::SubCritical => (0.0, law.b_n(n)?),
            SumsCase::Unit => {
                let a = law.b_n(n)?;
                let v = pre.as_ref().expect("pre-sample");
                let truncated: f64 = v.iter().take_while(|&&x| x <= a).sum::<f64>() / v.len() as f64;
                (n as f64 * truncated, a)
            }
            SumsCase::MidStable => (n as f64 * mean.expect("finite mean"), law.b_n(n)?),
            SumsCase::Boundary => (
                n as f64 * mean.expect("finite mean"),
                boundary_scale(pre.as_ref().expect("pre-sample"), n)?,
            ),
            SumsCase::Gaussian => (n as f64 * mean.expect("finite mean"), (n as f64).sqrt()),
        };
        Ok(Normalization { n, center, scale })
    };

    let n_long = n * opts.compare_factor;
    let norm = normalize(n)?;
    let norm_long = normalize(n_long)?;
    let raw = stationary_sums(model, n, reps, opts.stationary, "sums", source)?;
    let raw_long = stationary_sums(model, n_long, reps, opts.stationary, "sums_long", source)?;
    let sample: Vec<f64> = raw.iter().map(|s| (s - norm.center) / norm.scale).collect();
    let sample_long: Vec<f64> = raw_long.iter().map(|s| (s - norm_long.center) / norm_long.scale).collect();

    let ecdf = Ecdf::new(sample.clone())?;
    let self_consistency = ks_two_sample(&ecdf, &Ecdf::new(sample_long.clone())?);
    let min = ecdf.sorted()[0];

    let hill = match (case, model.tail_index()) {
        (SumsCase::Gaussian, _) | (_, None) => None,
        (_, Some(alpha)) => Some(tail_fit_sensitivity(&sample, opts.hill_k, &|t: f64| t.powf(alpha))?),
    };

    let gaussian = if case == SumsCase::Gaussian {
        let mu = mean.expect("finite mean");
        let mut rng = source.stream("variance_cycles", 0);
        let cycles = collect_cycles(model, opts.variance_cycles, &mut rng)?;
        let sq: Vec<f64> = cycles.iter().map(|c| (c.w as f64 - mu * c.sigma as f64).powi(2)).collect();
        let len: Vec<f64> = cycles.iter().map(|c| c.sigma as f64).collect();
        let v = order_free_mean(&sq) / order_free_mean(&len);
        let studentized: Vec<f64> = raw.iter().map(|s| (s - n as f64 * mu) / (n as f64 * v).sqrt()).collect();
        let normal = Normal::standard();
        let ks = ks_one_sample(&Ecdf::new(studentized)?, &Continuous(|x: f64| normal.cdf(x)));
        Some(GaussianCheck { long_run_variance: v, ks })
    } else {
        None
    };

    Ok(SumsReport {
        case,
        reps,
        norm,
        norm_long,
        mean: if case == SumsCase::SubCritical { None } else { mean },
        mean_hat,
        min,
        all_nonnegative: min >= 0.0,
        hill,
        self_consistency,
        gaussian,
        sample,
        sample_long,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LlnReport {
    pub n: u64,
    pub mean: f64,
    /// `E[Z] / (1 - E[phi])`
    pub target: f64,
    /// Relative error, or the absolute error when the target is 0.
    pub error: f64,
}

/// `S_n / n` along one path from `X_0 = 0` against the stationary mean.
pub fn lln_check(model: &ModelSpec, n: u64, source: &StreamSource) -> Result<LlnReport> {
    let target = model.stationary_mean().ok_or_else(|| {
        Error::InvalidArgument("law of large numbers needs E[Z] < infinity (tail index > 1)".into())
    })?;
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let sampler = model.sampler()?;
    let mut rng = source.stream("lln", 0);
    let mut x = 0u64;
    let mut s = 0u128;
    for _ in 0..n {
        x = sampler.advance(x, &mut rng).x;
        s += u128::from(x);
    }
    let mean = s as f64 / n as f64;
    let error = if target == 0.0 { mean.abs() } else { (mean / target - 1.0).abs() };
    Ok(LlnReport { n, mean, target, error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{InnovationLaw, PhiLaw};

    fn poisson_half() -> ModelSpec {
        ModelSpec::new(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::poisson(2.0).unwrap()).unwrap()
    }

    #[test]
    fn lln_targets() {
        let s = StreamSource::new(1);
        let r = lln_check(&poisson_half(), 200_000, &s).unwrap();
        assert_eq!(r.target, 4.0);
        assert!(r.error < 0.02, "{r:?}");
        let zero = ModelSpec::new(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::poisson(0.0).unwrap()).unwrap();
        let r = lln_check(&zero, 1000, &s).unwrap();
        assert_eq!((r.mean, r.target, r.error), (0.0, 0.0, 0.0));
        let geo = ModelSpec::new(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::geometric(0.5).unwrap()).unwrap();
        assert!((lln_check(&geo, 10, &s).unwrap().target - 2.0).abs() < 1e-12);
        let heavy = ModelSpec::new(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::pareto(1.0, 1.0).unwrap()).unwrap();
        assert!(lln_check(&heavy, 10, &s).is_err());
    }

    #[test]
    fn case_must_match_model() {
        let m = ModelSpec::new(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::pareto(1.5, 1.0).unwrap()).unwrap();
        let e = partial_sums_experiment(&m, SumsCase::SubCritical, 10, 10, &SumsOptions::default(), &StreamSource::new(2));
        assert!(matches!(e, Err(Error::CaseMismatch { .. })));
    }

    #[test]
    fn boundary_scale_scan() {
        // 90 ones and 10 tens: E[X^2; X <= t] is 0.9 on [1, 10) and 10.9 from 10 on
        let mut v = vec![1.0; 90];
        v.extend([10.0; 10]);
        assert_eq!(boundary_scale(&v, 1).unwrap(), 1.0);
        assert_eq!(boundary_scale(&v, 5).unwrap(), 10.0);
        assert!(boundary_scale(&v, 20).is_err());
    }

    #[test]
    fn gaussian_sums_are_studentized() {
        let opts = SumsOptions { pre_sample: 20_000, variance_cycles: 20_000, ..SumsOptions::default() };
        let r = partial_sums_experiment(&poisson_half(), SumsCase::Gaussian, 500, 2000, &opts, &StreamSource::new(3))
            .unwrap();
        let g = r.gaussian.unwrap();
        // Var X = 4 and lag-k autocorrelation 2^-k give 4 (1 + 0.5) / (1 - 0.5) = 12
        assert!((g.long_run_variance / 12.0 - 1.0).abs() < 0.05, "{}", g.long_run_variance);
        assert!(g.ks.pass, "{:?}", g.ks);
        assert!(r.hill.is_none());
    }

    #[test]
    fn replica_order_does_not_change_statistics() {
        let m = ModelSpec::new(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::pareto(0.7, 1.0).unwrap()).unwrap();
        let opts = SumsOptions::default();
        let r = partial_sums_experiment(&m, SumsCase::SubCritical, 50, 400, &opts, &StreamSource::new(4)).unwrap();
        assert!(r.all_nonnegative);
        let mut rev = r.sample.clone();
        rev.reverse();
        let a = tail_fit_sensitivity(&r.sample, None, &|t: f64| t.powf(0.7)).unwrap();
        assert_eq!(a, tail_fit_sensitivity(&rev, None, &|t: f64| t.powf(0.7)).unwrap());
        let fwd = ks_two_sample(&Ecdf::new(r.sample.clone()).unwrap(), &Ecdf::new(r.sample_long.clone()).unwrap());
        assert_eq!(fwd, ks_two_sample(&Ecdf::new(rev).unwrap(), &Ecdf::new(r.sample_long).unwrap()));
    }
}

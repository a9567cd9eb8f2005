use serde::{Deserialize, Serialize};

use super::ks::{integer_law_distance, ks_one_sample, Ecdf, KsResult, Stepped};
use crate::distributions::InnovationLaw;
use crate::engine::ModelSpec;
use crate::error::{Error, Result};
use crate::rng::StreamSource;

const DISTANCE_SCAN_CAP: u64 = 100_000_000;

/// Candidate limit laws for `M_n / b_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitForm {
    /// CDF `exp(-x^-alpha)`, the limit of `P(Z <= x b_n)^n`.
    Frechet,
    /// CDF `exp(-x^(-1/alpha))`, the exponent as sometimes displayed.
    InverseExponent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtremesReport {
    pub n: u64,
    pub reps: u64,
    pub b_n: f64,
    /// `M_n` against the exact law `P(Z <= y)^n` of the innovation maximum.
    pub ks: KsResult,
    /// Oracle against `exp(-x^-alpha)`.
    pub frechet_distance: f64,
    /// Oracle against `exp(-x^(-1/alpha))`.
    pub inverse_exponent_distance: f64,
    #[serde(skip)]
    pub maxima: Vec<u64>,
}

/// Sup-distance between the law of `K_n / b_n` and a limit form.
pub fn oracle_limit_distance(law: &InnovationLaw, n: u64, form: LimitForm) -> Result<f64> {
    let alpha = law.tail_index().ok_or(Error::NotHeavyTailed)?;
    let b = law.b_n(n)?;
    let exponent = match form {
        LimitForm::Frechet => alpha,
        LimitForm::InverseExponent => 1.0 / alpha,
    };
    let g = |y: f64| if y <= 0.0 { 0.0 } else { (-(y / b).powf(-exponent)).exp() };
    Ok(integer_law_distance(|m| law.max_cdf(n, m as f64), g, DISTANCE_SCAN_CAP))
}

/// Runs `reps` paths of `n` steps from `X_0 = 0` and compares the path
/// maxima with the maxima of `n` independent innovations.
pub fn extremes_experiment(model: &ModelSpec, n: u64, reps: u64, source: &StreamSource) -> Result<ExtremesReport> {
    let law = &model.innovation;
    if law.tail_index().is_none() {
        return Err(Error::NotHeavyTailed);
    }
    if n < 1 || reps < 1 {
        return Err(Error::InvalidArgument("extremes need n >= 1 and reps >= 1".into()));
    }
    let sampler = model.sampler()?;
    let maxima = source.replicate("extremes", reps, |_, rng| {
        let mut x = 0u64;
        let mut m = 0u64;
        for _ in 0..n {
            x = sampler.advance(x, rng).x;
            m = m.max(x);
        }
        m
    });
    let oracle = Stepped {
        right: |y: f64| law.max_cdf(n, y),
        left: |y: f64| law.max_cdf_left(n, y),
    };
    let ks = ks_one_sample(&Ecdf::from_counts(&maxima)?, &oracle);
    Ok(ExtremesReport {
        n,
        reps,
        b_n: law.b_n(n)?,
        ks,
        frechet_distance: oracle_limit_distance(law, n, LimitForm::Frechet)?,
        inverse_exponent_distance: oracle_limit_distance(law, n, LimitForm::InverseExponent)?,
        maxima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::PhiLaw;

    #[test]
    fn zero_phi_maxima_follow_the_oracle() {
        let m = ModelSpec::new(PhiLaw::degenerate(0.0).unwrap(), InnovationLaw::pareto(1.5, 1.0).unwrap())
            .unwrap();
        let r = extremes_experiment(&m, 1000, 2000, &StreamSource::new(1)).unwrap();
        assert!(r.ks.pass, "{r:?}");
        assert!((r.b_n - 100.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_approaches_frechet() {
        let law = InnovationLaw::pareto(1.5, 1.0).unwrap();
        let small = oracle_limit_distance(&law, 1000, LimitForm::Frechet).unwrap();
        let large = oracle_limit_distance(&law, 100_000, LimitForm::Frechet).unwrap();
        assert!(large < small, "{small} {large}");
        assert!(large <= 0.01, "{large}");
        let other = oracle_limit_distance(&law, 100_000, LimitForm::InverseExponent).unwrap();
        assert!(other > 0.1, "{other}");
    }
}

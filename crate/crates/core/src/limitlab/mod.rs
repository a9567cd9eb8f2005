//! Estimators, reference laws and the limit-theorem experiments.

mod cycles;
mod extremes;
mod hill;
mod ks;
mod sums;
mod tails;

pub use cycles::{cycle_tail_experiment, CycleTailReport, SurvivalFit};
pub use extremes::{extremes_experiment, oracle_limit_distance, ExtremesReport, LimitForm};
pub use hill::{default_k, hill_estimate, tail_fit, tail_fit_sensitivity, TailFit, TailSensitivity};
pub use ks::{
    integer_law_distance, ks_one_sample, ks_two_sample, Cdf, Continuous, Ecdf, KsResult, Stepped,
    KS_C_01,
};
pub use sums::{lln_check, partial_sums_experiment, LlnReport, SumsOptions, SumsReport};
pub use tails::{
    stationary_tail_experiment, thinning_tail_check, y_tail_constant_experiment,
    StationaryTailReport, ThinningTailReport, YTailReport,
};

use serde::{Deserialize, Serialize};

/// Normalization regime of the partial sums, by tail index of `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumsCase {
    /// `alpha < 1`
    SubCritical,
    /// `alpha = 1`
    Unit,
    /// `1 < alpha < 2`
    MidStable,
    /// `alpha = 2`
    Boundary,
    /// light tails, or `alpha > 2`
    Gaussian,
}

impl SumsCase {
    /// The regime implied by a tail index (`None` for light tails).
    pub fn for_tail_index(alpha: Option<f64>) -> SumsCase {
        match alpha {
            None => SumsCase::Gaussian,
            Some(a) if a < 1.0 => SumsCase::SubCritical,
            Some(a) if a == 1.0 => SumsCase::Unit,
            Some(a) if a < 2.0 => SumsCase::MidStable,
            Some(a) if a == 2.0 => SumsCase::Boundary,
            Some(_) => SumsCase::Gaussian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SumsCase::SubCritical => "sub_critical",
            SumsCase::Unit => "unit",
            SumsCase::MidStable => "mid_stable",
            SumsCase::Boundary => "boundary",
            SumsCase::Gaussian => "gaussian",
        }
    }
}

/// Mean over a sorted copy, so the result does not depend on sample order.
pub(crate) fn order_free_mean(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

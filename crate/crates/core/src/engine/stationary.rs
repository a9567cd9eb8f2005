use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelSampler, ModelSpec};
use crate::distributions::thin;
use crate::error::{Error, Result};

/// Hard cap on series terms before reporting non-convergence.
pub const MAX_SERIES_TERMS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryMode {
    /// Sum of thinned immigration waves `sum_k Binomial(Z_k, phi_1 ... phi_k)`.
    TruncatedSeries,
    /// Final state of a path started at zero.
    BurnIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryConfig {
    pub mode: StationaryMode,
    /// Bound on the probability that the discarded remainder is nonzero.
    pub epsilon: f64,
    /// Moment exponent of the stopping bound; `None` picks `min(1, alpha / 2)`.
    pub gamma: Option<f64>,
    pub burn_in_steps: u64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        StationaryConfig {
            mode: StationaryMode::TruncatedSeries,
            epsilon: 1e-6,
            gamma: None,
            burn_in_steps: 100_000,
        }
    }
}

impl StationaryConfig {
    pub fn truncated(epsilon: f64) -> Self {
        StationaryConfig {
            epsilon,
            ..Default::default()
        }
    }

    pub fn burn_in(steps: u64) -> Self {
        StationaryConfig {
            mode: StationaryMode::BurnIn,
            burn_in_steps: steps,
            ..Default::default()
        }
    }

    /// The moment exponent actually used for `model`.
    pub fn effective_gamma(&self, model: &ModelSpec) -> f64 {
        self.gamma.unwrap_or_else(|| match model.tail_index() {
            Some(alpha) => (alpha / 2.0).min(1.0),
            None => 1.0,
        })
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.01) {
            return Err(Error::InvalidArgument(format!(
                "stationary epsilon {} outside (0, 0.01]",
                self.epsilon
            )));
        }
        let gamma = self.effective_gamma(model);
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} outside (0, 1]")));
        }
        if let Some(alpha) = model.tail_index() {
            if gamma >= alpha {
                return Err(Error::InvalidArgument(format!(
                    "gamma {gamma} must be below the tail index {alpha}"
                )));
            }
        }
        if self.mode == StationaryMode::BurnIn && self.burn_in_steps == 0 {
            return Err(Error::InvalidArgument("burn-in needs at least one step".into()));
        }
        Ok(())
    }
}

/// Draws from the stationary law `X_inf = sum_k Pi_k ∘ Z_k`.
///
/// Truncation: given the running product `p_K = phi_1 ... phi_K`, the chance
/// that any later term is nonzero is at most
/// `E[Z^gamma] p_K^gamma E[phi^gamma] / (1 - E[phi^gamma])`, using
/// `1 - (1 - p)^z <= (p z)^gamma` for `gamma <= 1`. The series stops once
/// this falls below `epsilon`, which works even when `E[Z]` is infinite.
#[derive(Clone, Debug)]
pub struct StationarySampler {
    sampler: ModelSampler,
    cfg: StationaryConfig,
    gamma: f64,
    /// `E[Z^gamma] E[phi^gamma] / (1 - E[phi^gamma])`
    residual_factor: f64,
}

impl StationarySampler {
    pub fn new(model: &ModelSpec, cfg: StationaryConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate(model)?;
        let gamma = cfg.effective_gamma(model);
        let phi_moment = model.phi.moment(gamma);
        let z_moment = model.innovation.moment_bound(gamma)?;
        Ok(StationarySampler {
            sampler: model.sampler()?,
            cfg,
            gamma,
            residual_factor: z_moment * phi_moment / (1.0 - phi_moment),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        match self.cfg.mode {
            StationaryMode::TruncatedSeries => self.series(rng),
            StationaryMode::BurnIn => {
                let mut x = 0;
                for _ in 0..self.cfg.burn_in_steps {
                    x = self.sampler.advance(x, rng).x;
                }
                Ok(x)
            }
        }
    }

    fn series<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        let mut total = self.sampler.draw_z(rng);
        let mut p = 1.0f64;
        for _ in 0..MAX_SERIES_TERMS {
            if self.residual_factor * p.powf(self.gamma) < self.cfg.epsilon {
                return Ok(total);
            }
            p *= self.sampler.draw_phi(rng);
            let z = self.sampler.draw_z(rng);
            total = total.saturating_add(thin(z, p, rng));
        }
        Err(Error::NonConvergence(MAX_SERIES_TERMS))
    }
}

pub fn sample_stationary<R: Rng + ?Sized>(
    model: &ModelSpec,
    cfg: StationaryConfig,
    rng: &mut R,
) -> Result<u64> {
    StationarySampler::new(model, cfg)?.sample(rng)
}

use rand::Rng;
use rand_distr::{Distribution, OpenClosed01, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonCdf};

use crate::error::{Error, Result};

/// Law of the immigration counts `Z_n`.
///
/// `DiscretePareto` is `floor(V)` with `P(V > t) = (sigma / t)^alpha` for
/// `t >= sigma`, so `P(Z > t) = (sigma / (floor(t) + 1))^alpha` once
/// `floor(t) + 1 >= sigma`, and `h(t) = (t / sigma)^alpha` normalizes the tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnovationLaw {
    DiscretePareto { alpha: f64, sigma: f64 },
    /// `lambda = 0` is the point mass at zero.
    Poisson { lambda: f64 },
    /// `P(Z = k) = (1 - q) q^k`.
    Geometric { q: f64 },
}

impl InnovationLaw {
    pub fn pareto(alpha: f64, sigma: f64) -> Result<Self> {
        let law = InnovationLaw::DiscretePareto { alpha, sigma };
        law.validate()?;
        Ok(law)
    }

    pub fn poisson(lambda: f64) -> Result<Self> {
        let law = InnovationLaw::Poisson { lambda };
        law.validate()?;
        Ok(law)
    }

    pub fn geometric(q: f64) -> Result<Self> {
        let law = InnovationLaw::Geometric { q };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => {
                if !(alpha.is_finite() && alpha > 0.0 && sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidLaw(format!(
                        "discrete Pareto needs alpha > 0 and sigma > 0, got alpha={alpha}, sigma={sigma}"
                    )));
                }
            }
            InnovationLaw::Poisson { lambda } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return Err(Error::InvalidLaw(format!("Poisson rate {lambda} must be >= 0")));
                }
            }
            InnovationLaw::Geometric { q } => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidLaw(format!("geometric q={q} must lie in (0, 1)")));
                }
            }
        }
        Ok(())
    }

    /// Tail index of a regularly varying law, `None` for light tails.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            InnovationLaw::DiscretePareto { alpha, .. } => Some(alpha),
            _ => None,
        }
    }

    /// `h(t) = (t / sigma)^alpha`.
    pub fn h(&self, t: f64) -> Result<f64> {
        match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => {
                if !(t > 0.0) {
                    return Err(Error::InvalidArgument(format!("h(t) needs t > 0, got {t}")));
                }
                Ok((t / sigma).powf(alpha))
            }
            _ => Err(Error::NotHeavyTailed),
        }
    }

    /// `b_n = inf { t > 0 : h(t) >= n } = sigma * n^(1/alpha)`.
    pub fn b_n(&self, n: u64) -> Result<f64> {
        match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => {
                if n == 0 {
                    return Err(Error::InvalidArgument("b_n needs n >= 1".into()));
                }
                Ok(sigma * (n as f64).powf(1.0 / alpha))
            }
            _ => Err(Error::NotHeavyTailed),
        }
    }

    /// `P(Z > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        let k = x.floor();
        match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => (sigma / (k + 1.0)).powf(alpha).min(1.0),
            InnovationLaw::Poisson { lambda } => {
                if lambda == 0.0 {
                    0.0
                } else {
                    poisson_dist(lambda).sf(float_to_count(k))
                }
            }
            InnovationLaw::Geometric { q } => q.powf(k + 1.0),
        }
    }

    /// `P(Z <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match *self {
            InnovationLaw::Poisson { lambda } if lambda > 0.0 => {
                poisson_dist(lambda).cdf(float_to_count(x.floor()))
            }
            _ => 1.0 - self.survival(x),
        }
    }

    /// `P(Z < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.cdf(x.ceil() - 1.0)
    }

    /// Exact law of `max(Z_1, ..., Z_n)` at `x`: `P(Z <= x)^n`.
    pub fn max_cdf(&self, n: u64, x: f64) -> f64 {
        power_of_cdf(self.survival(x), n)
    }

    /// `P(max(Z_1, ..., Z_n) < x)`.
    pub fn max_cdf_left(&self, n: u64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.max_cdf(n, x.ceil() - 1.0)
    }

    /// `E[Z]`, or `None` when infinite.
    pub fn mean(&self) -> Option<f64> {
        match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => {
                if alpha <= 1.0 {
                    return None;
                }
                // E[Z] = sum_{j >= 1} P(V >= j); the terms are 1 for j <= sigma.
                let full = sigma.floor();
                Some(full + sigma.powf(alpha) * hurwitz_zeta(alpha, full + 1.0))
            }
            InnovationLaw::Poisson { lambda } => Some(lambda),
            InnovationLaw::Geometric { q } => Some(q / (1.0 - q)),
        }
    }

    /// An upper bound on `E[Z^gamma]` for `0 < gamma <= 1` (and `gamma < alpha`).
    pub fn moment_bound(&self, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("moment exponent {gamma} outside (0, 1]")));
        }
        match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => {
                if gamma >= alpha {
                    return Err(Error::InvalidArgument(format!(
                        "E[Z^{gamma}] is infinite for tail index {alpha}"
                    )));
                }
                // Z <= V and E[V^gamma] = sigma^gamma * alpha / (alpha - gamma)
                Ok(sigma.powf(gamma) * alpha / (alpha - gamma))
            }
            // Jensen: E[Z^gamma] <= E[Z]^gamma
            _ => Ok(self.mean().unwrap_or(0.0).powf(gamma)),
        }
    }

    pub fn sampler(&self) -> Result<InnovationSampler> {
        self.validate()?;
        Ok(match *self {
            InnovationLaw::DiscretePareto { alpha, sigma } => InnovationSampler::Pareto {
                inv_alpha: 1.0 / alpha,
                sigma,
            },
            InnovationLaw::Poisson { lambda } if lambda == 0.0 => InnovationSampler::Zero,
            InnovationLaw::Poisson { lambda } => InnovationSampler::Poisson(
                Poisson::new(lambda).map_err(|e| Error::InvalidLaw(format!("poisson: {e}")))?,
            ),
            InnovationLaw::Geometric { q } => InnovationSampler::Geometric { ln_q: q.ln() },
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        Ok(self.sampler()?.sample(rng))
    }
}

fn poisson_dist(lambda: f64) -> PoissonCdf {
    PoissonCdf::new(lambda).expect("validated Poisson rate")
}

fn float_to_count(k: f64) -> u64 {
    k as u64
}

/// `(1 - s)^n` evaluated without cancellation.
fn power_of_cdf(survival: f64, n: u64) -> f64 {
    if survival >= 1.0 {
        return 0.0;
    }
    (n as f64 * (-survival).ln_1p()).exp()
}

/// `sum_{j >= 0} (j + m)^(-s)` for `s > 1`, `m >= 1`.
pub(crate) fn hurwitz_zeta(s: f64, m: f64) -> f64 {
    const DIRECT: usize = 1000;
    let direct: f64 = (0..DIRECT).map(|j| (m + j as f64).powf(-s)).sum();
    let n = m + DIRECT as f64;
    // Euler-Maclaurin remainder from n onward
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    direct + tail
}

/// Prepared sampler for a validated [`InnovationLaw`].
#[derive(Clone, Debug)]
pub enum InnovationSampler {
    Pareto { inv_alpha: f64, sigma: f64 },
    Poisson(Poisson<f64>),
    Geometric { ln_q: f64 },
    Zero,
}

impl Distribution<u64> for InnovationSampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            InnovationSampler::Pareto { inv_alpha, sigma } => {
                let u: f64 = OpenClosed01.sample(rng);
                // float-to-int casts saturate at u64::MAX
                (sigma * u.powf(-inv_alpha)).floor() as u64
            }
            InnovationSampler::Poisson(p) => p.sample(rng) as u64,
            // P(floor(ln U / ln q) >= k) = P(U <= q^k) = q^k
            InnovationSampler::Geometric { ln_q } => {
                let u: f64 = OpenClosed01.sample(rng);
                (u.ln() / ln_q).floor() as u64
            }
            InnovationSampler::Zero => 0,
        }
    }
}

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Law of the random thinning coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiLaw {
    Degenerate { p: f64 },
    DiscreteAtoms { atoms: Vec<f64>, weights: Vec<f64> },
    BetaShape { a: f64, b: f64 },
}

const WEIGHT_SUM_TOL: f64 = 1e-9;

fn is_probability(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl PhiLaw {
    pub fn degenerate(p: f64) -> Result<Self> {
        let law = PhiLaw::Degenerate { p };
        law.validate()?;
        Ok(law)
    }

    pub fn atoms(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let law = PhiLaw::DiscreteAtoms { atoms, weights };
        law.validate()?;
        Ok(law)
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        let law = PhiLaw::BetaShape { a, b };
        law.validate()?;
        Ok(law)
    }

    /// Checks the support and `P(phi = 1) < 1`.
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiLaw::Degenerate { p } => {
                if !is_probability(*p) {
                    return Err(Error::InvalidLaw(format!("degenerate phi {p} outside [0, 1]")));
                }
                if *p == 1.0 {
                    return Err(Error::PhiAtOne(1.0));
                }
            }
            PhiLaw::DiscreteAtoms { atoms, weights } => {
                if atoms.is_empty() || atoms.len() != weights.len() {
                    return Err(Error::InvalidLaw(format!(
                        "phi atoms ({}) and weights ({}) must be non-empty and of equal length",
                        atoms.len(),
                        weights.len()
                    )));
                }
                if let Some(a) = atoms.iter().find(|a| !is_probability(**a)) {
                    return Err(Error::InvalidLaw(format!("phi atom {a} outside [0, 1]")));
                }
                if let Some(w) = weights.iter().find(|w| !is_probability(**w)) {
                    return Err(Error::InvalidLaw(format!("phi weight {w} outside [0, 1]")));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidLaw(format!("phi weights sum to {total}, not 1")));
                }
                let at_one: f64 = atoms
                    .iter()
                    .zip(weights)
                    .filter(|(a, _)| **a == 1.0)
                    .map(|(_, w)| *w)
                    .sum();
                if at_one >= 1.0 - WEIGHT_SUM_TOL {
                    return Err(Error::PhiAtOne(at_one));
                }
            }
            PhiLaw::BetaShape { a, b } => {
                if !(a.is_finite() && *a > 0.0 && b.is_finite() && *b > 0.0) {
                    return Err(Error::InvalidLaw(format!(
                        "beta shape parameters must be positive, got a={a}, b={b}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `E[phi^gamma]`, computed exactly.
    pub fn moment(&self, gamma: f64) -> f64 {
        debug_assert!(gamma > 0.0);
        match self {
            PhiLaw::Degenerate { p } => p.powf(gamma),
            PhiLaw::DiscreteAtoms { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .map(|(a, w)| w * a.powf(gamma))
                .sum(),
            // B(a + gamma, b) / B(a, b)
            PhiLaw::BetaShape { a, b } => {
                (ln_gamma(a + gamma) + ln_gamma(a + b) - ln_gamma(*a) - ln_gamma(a + b + gamma))
                    .exp()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    pub fn sampler(&self) -> Result<PhiSampler> {
        self.validate()?;
        Ok(match self {
            PhiLaw::Degenerate { p } => PhiSampler::Constant(*p),
            PhiLaw::DiscreteAtoms { atoms, weights } => {
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w;
                        acc
                    })
                    .collect();
                PhiSampler::Atoms {
                    atoms: atoms.clone(),
                    cumulative,
                }
            }
            PhiLaw::BetaShape { a, b } => PhiSampler::Beta(
                Beta::new(*a, *b).map_err(|e| Error::InvalidLaw(format!("beta: {e}")))?,
            ),
        })
    }

    /// One draw; builds a sampler on every call, so prefer [`PhiLaw::sampler`] in loops.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(self.sampler()?.sample(rng))
    }
}

/// Prepared sampler for a validated [`PhiLaw`].
#[derive(Clone, Debug)]
pub enum PhiSampler {
    Constant(f64),
    Atoms { atoms: Vec<f64>, cumulative: Vec<f64> },
    Beta(Beta<f64>),
}

impl Distribution<f64> for PhiSampler {
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PhiSampler::Constant(p) => *p,
            PhiSampler::Atoms { atoms, cumulative } => {
                let total = cumulative[cumulative.len() - 1];
                let u: f64 = rng.random::<f64>() * total;
                let i = cumulative.partition_point(|c| *c <= u);
                atoms[i.min(atoms.len() - 1)]
            }
            PhiSampler::Beta(beta) => beta.sample(rng),
        }
    }
}

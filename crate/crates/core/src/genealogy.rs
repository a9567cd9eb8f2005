//! Cohort-resolved simulation: who is alive at generation `n`, and which
//! immigration wave they descend from.
//!
//! `X_{k,n}` counts the individuals alive at time `n` whose immigrant
//! ancestor arrived at time `k`. Whether a thinning event is read as
//! reproduction or survival does not change these counts.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::distributions::{thin, PhiSampler};
use crate::engine::ModelSpec;
use crate::error::{Error, Result};

/// Generation cap for [`total_progeny`].
pub const MAX_PROGENY_GENERATIONS: u64 = 100_000_000;

/// Alive counts per immigration wave; only nonzero cohorts are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortLedger {
    n: u64,
    cohorts: BTreeMap<u64, u64>,
}

impl CohortLedger {
    /// Generation 0 holding `x0` individuals of cohort 0.
    pub fn new(x0: u64) -> Self {
        let mut cohorts = BTreeMap::new();
        if x0 > 0 {
            cohorts.insert(0, x0);
        }
        CohortLedger { n: 0, cohorts }
    }

    /// Builds a ledger directly; zero counts are dropped.
    pub fn from_counts(n: u64, counts: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut cohorts = BTreeMap::new();
        for (k, c) in counts {
            if k > n {
                return Err(Error::InvalidArgument(format!("cohort {k} born after generation {n}")));
            }
            if c > 0 {
                *cohorts.entry(k).or_insert(0) += c;
            }
        }
        Ok(CohortLedger { n, cohorts })
    }

    pub fn generation(&self) -> u64 {
        self.n
    }

    pub fn cohorts(&self) -> &BTreeMap<u64, u64> {
        &self.cohorts
    }

    pub fn total(&self) -> u64 {
        self.cohorts.values().fold(0u64, |acc, c| acc.saturating_add(*c))
    }

    /// Thins every cohort independently with `phi`, drops extinct ones and
    /// adds the `z` new immigrants as cohort `n + 1`. Returns the number of
    /// survivors (`phi ∘ X_n`).
    pub fn step<R: Rng + ?Sized>(&mut self, phi: f64, z: u64, rng: &mut R) -> u64 {
        let mut survivors = 0u64;
        self.cohorts.retain(|_, count| {
            *count = thin(*count, phi, rng);
            survivors = survivors.saturating_add(*count);
            *count > 0
        });
        self.n += 1;
        if z > 0 {
            self.cohorts.insert(self.n, z);
        }
        survivors
    }

    /// Maximal age `lambda_n = n - max { k < n : X_{k,n} > 0 }`.
    pub fn max_age(&self) -> Option<u64> {
        self.cohorts
            .range(..self.n)
            .next_back()
            .map(|(k, _)| self.n - k)
    }

    /// Count-weighted mean age; `None` when nobody is alive.
    pub fn avg_age(&self) -> Option<f64> {
        let total = self.cohorts.values().map(|&c| c as u128).sum::<u128>();
        if total == 0 {
            return None;
        }
        let weighted: u128 = self
            .cohorts
            .iter()
            .map(|(k, c)| u128::from(*c) * u128::from(self.n - k))
            .sum();
        Some(weighted as f64 / total as f64)
    }

    /// Exact law of the coalescence time of two individuals sampled without
    /// replacement; `None` when fewer than two are alive.
    ///
    /// The formula is well defined from two individuals on, so `X_n = 2` is
    /// included.
    pub fn coalescence_law(&self) -> Option<CoalescenceLaw> {
        let total = self.cohorts.values().map(|&c| c as u128).sum::<u128>();
        if total < 2 {
            return None;
        }
        let denominator = total * (total - 1);
        let numerators: BTreeMap<u64, u128> = self
            .cohorts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .map(|(k, &c)| (self.n - k, u128::from(c) * u128::from(c - 1)))
            .collect();
        Some(CoalescenceLaw::from_counts(numerators, denominator))
    }

    /// Samples two distinct individuals uniformly and returns their
    /// coalescence time (`Some(None)` for infinity).
    pub fn sample_coalescence<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Option<u64>> {
        let total = self.total();
        if total < 2 {
            return None;
        }
        let first = rng.random_range(0..total);
        let mut second = rng.random_range(0..total - 1);
        if second >= first {
            second += 1;
        }
        let a = self.cohort_of(first);
        let b = self.cohort_of(second);
        Some((a == b).then(|| self.n - a))
    }

    fn cohort_of(&self, index: u64) -> u64 {
        let mut acc = 0u64;
        for (k, c) in &self.cohorts {
            acc += c;
            if index < acc {
                return *k;
            }
        }
        unreachable!("index below total")
    }
}

/// Law of `T_n` on `{0, 1, ...} ∪ {inf}` given the cohort counts.
///
/// Probabilities are kept as integer numerators over a common denominator, so
/// they sum to one exactly before conversion to floating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalescenceLaw {
    pub pmf: BTreeMap<u64, f64>,
    pub p_infinity: f64,
    pub numerators: BTreeMap<u64, u128>,
    pub infinity_numerator: u128,
    pub denominator: u128,
}

impl CoalescenceLaw {
    fn from_counts(numerators: BTreeMap<u64, u128>, denominator: u128) -> Self {
        let finite: u128 = numerators.values().sum();
        let infinity_numerator = denominator - finite;
        let d = denominator as f64;
        CoalescenceLaw {
            pmf: numerators.iter().map(|(t, v)| (*t, *v as f64 / d)).collect(),
            p_infinity: infinity_numerator as f64 / d,
            numerators,
            infinity_numerator,
            denominator,
        }
    }

    /// `P(T <= t)`.
    pub fn cdf(&self, t: u64) -> f64 {
        let num: u128 = self.numerators.range(..=t).map(|(_, v)| v).sum();
        num as f64 / self.denominator as f64
    }

    /// Smallest `t` with `P(T <= t) >= q`; `None` means the quantile is infinite.
    pub fn quantile(&self, q: f64) -> Option<u64> {
        let mut acc = 0u128;
        for (t, v) in &self.numerators {
            acc += v;
            if acc as f64 >= q * self.denominator as f64 {
                return Some(*t);
            }
        }
        None
    }
}

/// Total progeny of `z0` immigrants over all generations, the immigrants
/// included: `c_0 = z0`, `c_{i+1} = phi_{i+1} ∘ c_i`, summed until extinction.
pub fn total_progeny<R: Rng + ?Sized>(z0: u64, phi: &PhiSampler, rng: &mut R) -> Result<u64> {
    let mut alive = z0;
    let mut total = 0u64;
    let mut generations = 0u64;
    while alive > 0 {
        total = total.saturating_add(alive);
        generations += 1;
        if generations > MAX_PROGENY_GENERATIONS {
            return Err(Error::RunawayProgeny(MAX_PROGENY_GENERATIONS));
        }
        alive = thin(alive, phi.sample(rng), rng);
    }
    Ok(total)
}

/// Per-generation age and coalescence summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: u64,
    pub total: u64,
    pub lambda: Option<u64>,
    pub eta: Option<f64>,
    pub p_infinity: Option<f64>,
    pub t_median: Option<Option<u64>>,
    pub t_q90: Option<Option<u64>>,
}

impl GenerationSummary {
    pub fn of(ledger: &CohortLedger) -> Self {
        let law = ledger.coalescence_law();
        GenerationSummary {
            generation: ledger.generation(),
            total: ledger.total(),
            lambda: ledger.max_age(),
            eta: ledger.avg_age(),
            p_infinity: law.as_ref().map(|l| l.p_infinity),
            t_median: law.as_ref().map(|l| l.quantile(0.5)),
            t_q90: law.as_ref().map(|l| l.quantile(0.9)),
        }
    }

    /// CSV with header `generation,total,lambda,eta,p_infinity,t_q50,t_q90`.
    /// Undefined values are empty; infinite quantiles are `inf`.
    pub fn write_csv<W: Write>(rows: &[GenerationSummary], mut out: W) -> std::io::Result<()> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        fn quant(v: Option<Option<u64>>) -> String {
            match v {
                None => String::new(),
                Some(None) => "inf".into(),
                Some(Some(t)) => t.to_string(),
            }
        }
        writeln!(out, "generation,total,lambda,eta,p_infinity,t_q50,t_q90")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.generation,
                r.total,
                opt(r.lambda),
                opt(r.eta),
                opt(r.p_infinity),
                quant(r.t_median),
                quant(r.t_q90)
            )?;
        }
        Ok(())
    }
}

/// Runs the cohort ledger for `n` steps from `X_0 = 0`, calling `observe`
/// after every step. Draw order matches [`crate::engine::ModelSampler::advance`].
pub fn simulate_ledger<R, F>(model: &ModelSpec, n: u64, rng: &mut R, mut observe: F) -> Result<CohortLedger>
where
    R: Rng + ?Sized,
    F: FnMut(&CohortLedger, u64),
{
    let sampler = model.sampler()?;
    let mut ledger = CohortLedger::new(0);
    for _ in 0..n {
        let phi = sampler.draw_phi(rng);
        let z = sampler.draw_z(rng);
        let survivors = ledger.step(phi, z, rng);
        observe(&ledger, survivors);
    }
    Ok(ledger)
}

//! The thinning recursion, stationary sampling, paths and regeneration cycles.

mod cycles;
mod stationary;

pub use cycles::{collect_cycles, CycleRecord, MAX_CYCLE_STEPS};
pub use stationary::{
    sample_stationary, StationaryConfig, StationaryMode, StationarySampler, MAX_SERIES_TERMS,
};

use std::io::Write;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    thin, thin_monotone, InnovationLaw, InnovationSampler, PhiLaw, PhiSampler,
};
use crate::error::{Error, Result};

/// The pair of coefficient laws `(phi-law, Z-law)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub phi: PhiLaw,
    #[serde(rename = "z")]
    pub innovation: InnovationLaw,
}

impl ModelSpec {
    pub fn new(phi: PhiLaw, innovation: InnovationLaw) -> Result<Self> {
        let m = ModelSpec { phi, innovation };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.phi.validate()?;
        self.innovation.validate()
    }

    pub fn sampler(&self) -> Result<ModelSampler> {
        Ok(ModelSampler {
            phi: self.phi.sampler()?,
            innovation: self.innovation.sampler()?,
        })
    }

    pub fn tail_index(&self) -> Option<f64> {
        self.innovation.tail_index()
    }

    /// `E[X_inf] = E[Z] / (1 - E[phi])`, `None` when `E[Z]` is infinite.
    pub fn stationary_mean(&self) -> Option<f64> {
        Some(self.innovation.mean()? / (1.0 - self.phi.mean()))
    }
}

/// One transition of the chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub phi: f64,
    pub z: u64,
    pub survivors: u64,
    pub x: u64,
}

/// Prepared samplers for a validated [`ModelSpec`].
#[derive(Clone, Debug)]
pub struct ModelSampler {
    pub phi: PhiSampler,
    pub innovation: InnovationSampler,
}

impl ModelSampler {
    #[inline]
    pub fn draw_phi<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.phi.sample(rng)
    }

    #[inline]
    pub fn draw_z<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.innovation.sample(rng)
    }

    /// Draws `phi_n`, then `Z_n`, then thins `x_prev`.
    #[inline]
    pub fn advance<R: Rng + ?Sized>(&self, x_prev: u64, rng: &mut R) -> Step {
        let phi = self.draw_phi(rng);
        let z = self.draw_z(rng);
        let (x, survivors) = step(x_prev, phi, z, rng);
        Step { phi, z, survivors, x }
    }
}

/// `X_n = phi_n ∘ X_{n-1} + Z_n`; returns `(X_n, phi_n ∘ X_{n-1})`.
#[inline]
pub fn step<R: Rng + ?Sized>(x_prev: u64, phi: f64, z: u64, rng: &mut R) -> (u64, u64) {
    let survivors = thin(x_prev, phi, rng);
    (survivors.saturating_add(z), survivors)
}

/// `phi_k ∘ ... ∘ phi_1 ∘ x`, applied one layer at a time.
pub fn composite_thin<R: Rng + ?Sized>(x: u64, phi_draws: &[f64], rng: &mut R) -> u64 {
    let mut alive = x;
    for &phi in phi_draws {
        if alive == 0 {
            break;
        }
        alive = thin(alive, phi, rng);
    }
    alive
}

/// A simulated path `X_0..X_n` with the per-step draws.
///
/// Index 0 records the initial state as if it had immigrated:
/// `survivors[0] = 0`, `z[0] = x[0]`, `phi[0] = 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub x: Vec<u64>,
    pub survivors: Vec<u64>,
    pub z: Vec<u64>,
    pub phi: Vec<f64>,
}

impl PathSample {
    fn with_start(x0: u64, capacity: usize) -> Self {
        let mut p = PathSample {
            x: Vec::with_capacity(capacity),
            survivors: Vec::with_capacity(capacity),
            z: Vec::with_capacity(capacity),
            phi: Vec::with_capacity(capacity),
        };
        p.x.push(x0);
        p.survivors.push(0);
        p.z.push(x0);
        p.phi.push(0.0);
        p
    }

    fn push(&mut self, s: Step) {
        self.x.push(s.x);
        self.survivors.push(s.survivors);
        self.z.push(s.z);
        self.phi.push(s.phi);
    }

    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.x.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// CSV with header `step,x,survivors,z,phi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,x,survivors,z,phi")?;
        for k in 0..self.x.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                k, self.x[k], self.survivors[k], self.z[k], self.phi[k]
            )?;
        }
        Ok(())
    }
}

pub fn simulate_path<R: Rng + ?Sized>(
    model: &ModelSpec,
    n: usize,
    x0: u64,
    rng: &mut R,
) -> Result<PathSample> {
    if n == 0 {
        return Err(Error::InvalidArgument("path length must be >= 1".into()));
    }
    let sampler = model.sampler()?;
    let mut path = PathSample::with_start(x0, n + 1);
    let mut x = x0;
    for _ in 0..n {
        let s = sampler.advance(x, rng);
        x = s.x;
        path.push(s);
    }
    Ok(path)
}

/// Runs one path per start value with shared `phi`, `Z` and per-slot
/// uniforms, so that thinning is monotone in the current state: a path
/// started higher stays at or above one started lower.
pub fn simulate_coupled<R: Rng + ?Sized>(
    model: &ModelSpec,
    n: usize,
    starts: &[u64],
    rng: &mut R,
) -> Result<Vec<PathSample>> {
    let sampler = model.sampler()?;
    let mut paths: Vec<PathSample> = starts
        .iter()
        .map(|&x0| PathSample::with_start(x0, n + 1))
        .collect();
    let mut state: Vec<u64> = starts.to_vec();
    let mut uniforms: Vec<f64> = Vec::new();
    for _ in 0..n {
        let phi = sampler.draw_phi(rng);
        let z = sampler.draw_z(rng);
        let widest = state.iter().copied().max().unwrap_or(0) as usize;
        uniforms.clear();
        uniforms.extend((0..widest).map(|_| rng.random::<f64>()));
        for (path, x) in paths.iter_mut().zip(state.iter_mut()) {
            let survivors = thin_monotone(*x, phi, &uniforms);
            *x = survivors.saturating_add(z);
            path.push(Step {
                phi,
                z,
                survivors,
                x: *x,
            });
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn model(phi: PhiLaw, z: InnovationLaw) -> ModelSpec {
        ModelSpec::new(phi, z).unwrap()
    }

    #[test]
    fn step_examples() {
        let mut rng = RngStream::new(1, 1);
        assert_eq!(step(0, 0.3, 3, &mut rng), (3, 0));
        assert_eq!(step(7, 1.0, 2, &mut rng), (9, 7));
    }

    #[test]
    fn step_survivors_binomial_mean() {
        let mut rng = RngStream::new(1, 2);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| step(10, 0.5, 0, &mut rng).1).sum();
        assert!((total as f64 / n as f64 - 5.0).abs() < 0.01);
    }

    #[test]
    fn zero_innovation_gives_zero_path() {
        let m = model(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::poisson(0.0).unwrap());
        let p = simulate_path(&m, 100, 0, &mut RngStream::new(2, 0)).unwrap();
        assert!(p.x.iter().all(|&x| x == 0));
        assert_eq!(p.x.len(), 101);
    }

    #[test]
    fn no_survivors_when_phi_is_zero() {
        let m = model(PhiLaw::degenerate(0.0).unwrap(), InnovationLaw::poisson(3.0).unwrap());
        let p = simulate_path(&m, 1000, 5, &mut RngStream::new(2, 1)).unwrap();
        assert_eq!(p.x[0], 5);
        for k in 1..=1000 {
            assert_eq!(p.x[k], p.z[k]);
            assert_eq!(p.survivors[k], 0);
        }
    }

    #[test]
    fn path_identity_holds() {
        let m = model(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::pareto(0.8, 1.0).unwrap());
        let p = simulate_path(&m, 10_000, 0, &mut RngStream::new(2, 2)).unwrap();
        for k in 1..p.x.len() {
            assert_eq!(p.x[k], p.survivors[k] + p.z[k]);
            assert!(p.survivors[k] <= p.x[k - 1]);
        }
    }

    #[test]
    fn long_path_mean() {
        let m = model(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::poisson(2.0).unwrap());
        let p = simulate_path(&m, 1_000_000, 0, &mut RngStream::new(2, 3)).unwrap();
        let mean = p.x.iter().sum::<u64>() as f64 / p.x.len() as f64;
        assert!((mean - 4.0).abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn composite_thin_cases() {
        let mut rng = RngStream::new(3, 0);
        assert_eq!(composite_thin(17, &[], &mut rng), 17);
        assert_eq!(composite_thin(17, &[0.9, 0.0, 0.8], &mut rng), 0);
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| composite_thin(20, &[0.5, 0.5], &mut rng)).sum();
        assert!((total as f64 / n as f64 - 5.0).abs() < 0.02);
    }

    #[test]
    fn coupled_paths_are_ordered() {
        let m = model(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::poisson(2.0).unwrap());
        let paths = simulate_coupled(&m, 5000, &[0, 10], &mut RngStream::new(4, 0)).unwrap();
        for k in 0..=5000 {
            assert!(paths[1].x[k] >= paths[0].x[k], "step {k}");
            assert_eq!(paths[0].x[k], paths[0].survivors[k] + paths[0].z[k]);
        }
        // the start is forgotten once both paths regenerate together
        assert_eq!(paths[0].x[5000], paths[1].x[5000]);
    }

    #[test]
    fn stationary_mean_formula() {
        let m = model(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::geometric(0.5).unwrap());
        assert!((m.stationary_mean().unwrap() - 2.0).abs() < 1e-12);
        let heavy = model(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::pareto(0.9, 1.0).unwrap());
        assert_eq!(heavy.stationary_mean(), None);
    }

    #[test]
    fn csv_layout() {
        let m = model(PhiLaw::degenerate(0.5).unwrap(), InnovationLaw::poisson(1.0).unwrap());
        let p = simulate_path(&m, 3, 0, &mut RngStream::new(5, 0)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,x,survivors,z,phi");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,0,0,"));
    }
}

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelSpec;
use crate::error::{Error, Result};

/// Longest admissible renewal epoch.
pub const MAX_CYCLE_STEPS: u64 = 100_000_000;

/// One renewal epoch: its length, the sum of the states visited, and the states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub sigma: u64,
    pub w: u128,
    pub r: Vec<u64>,
}

impl CycleRecord {
    pub fn write_csv<W: Write>(cycles: &[CycleRecord], mut out: W) -> std::io::Result<()> {
        writeln!(out, "cycle,sigma,w")?;
        for (i, c) in cycles.iter().enumerate() {
            writeln!(out, "{},{},{}", i + 1, c.sigma, c.w)?;
        }
        Ok(())
    }
}

/// Simulates from `X_0 = 0` and cuts the path at the regeneration times
/// `nu_0 = 1 < nu_1 < ...`, the steps where `phi_i ∘ X_{i-1} = 0`.
/// Cycle `n` holds `X_{nu_{n-1}}, ..., X_{nu_n - 1}`.
///
/// The random draws are consumed in the same order as
/// [`super::simulate_path`], so the two agree on a shared stream.
pub fn collect_cycles<R: Rng + ?Sized>(
    model: &ModelSpec,
    count: usize,
    rng: &mut R,
) -> Result<Vec<CycleRecord>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one cycle".into()));
    }
    let sampler = model.sampler()?;
    let mut cycles = Vec::with_capacity(count);
    // step 1 always regenerates since X_0 = 0
    let first = sampler.advance(0, rng);
    debug_assert_eq!(first.survivors, 0);
    let mut current = vec![first.x];
    let mut x = first.x;
    loop {
        let s = sampler.advance(x, rng);
        x = s.x;
        if s.survivors == 0 {
            let r = std::mem::replace(&mut current, vec![x]);
            cycles.push(CycleRecord {
                sigma: r.len() as u64,
                w: r.iter().map(|&v| u128::from(v)).sum(),
                r,
            });
            if cycles.len() == count {
                return Ok(cycles);
            }
        } else {
            if current.len() as u64 >= MAX_CYCLE_STEPS {
                return Err(Error::RunawayCycle(MAX_CYCLE_STEPS));
            }
            current.push(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{InnovationLaw, PhiLaw};
    use crate::engine::simulate_path;
    use crate::rng::RngStream;

    #[test]
    fn zero_phi_regenerates_every_step() {
        let m = ModelSpec::new(PhiLaw::degenerate(0.0).unwrap(), InnovationLaw::poisson(2.0).unwrap())
            .unwrap();
        let mut a = RngStream::new(1, 0);
        let mut b = a.clone();
        let cycles = collect_cycles(&m, 500, &mut a).unwrap();
        let path = simulate_path(&m, 500, 0, &mut b).unwrap();
        for (i, c) in cycles.iter().enumerate() {
            assert_eq!(c.sigma, 1);
            assert_eq!(c.w, u128::from(path.x[i + 1]));
        }
    }

    #[test]
    fn cycles_reassemble_the_path() {
        let m = ModelSpec::new(PhiLaw::beta(2.0, 2.0).unwrap(), InnovationLaw::pareto(1.5, 1.0).unwrap())
            .unwrap();
        let mut a = RngStream::new(2, 0);
        let mut b = a.clone();
        let cycles = collect_cycles(&m, 2000, &mut a).unwrap();
        let nu_m: u64 = 1 + cycles.iter().map(|c| c.sigma).sum::<u64>();
        let path = simulate_path(&m, nu_m as usize, 0, &mut b).unwrap();
        let joined: Vec<u64> = cycles.iter().flat_map(|c| c.r.iter().copied()).collect();
        assert_eq!(joined.as_slice(), &path.x[1..nu_m as usize]);
        for c in &cycles {
            assert_eq!(c.sigma as usize, c.r.len());
            assert_eq!(c.w, c.r.iter().map(|&v| u128::from(v)).sum::<u128>());
        }
        // regeneration steps are exactly the cycle starts
        let mut nu = 1usize;
        for c in &cycles {
            assert_eq!(path.survivors[nu], 0);
            for i in nu + 1..nu + c.sigma as usize {
                assert!(path.survivors[i] > 0);
            }
            nu += c.sigma as usize;
        }
        assert_eq!(path.survivors[nu], 0);
    }

    #[test]
    fn csv_header() {
        let cycles = vec![CycleRecord { sigma: 2, w: 5, r: vec![2, 3] }];
        let mut buf = Vec::new();
        CycleRecord::write_csv(&cycles, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cycle,sigma,w\n1,2,5\n");
    }
}

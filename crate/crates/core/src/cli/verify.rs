//! The acceptance criteria as library functions, one report per criterion.

use serde::Serialize;
use serde_json::{json, Value};
use statrs::distribution::{Binomial, Discrete};

use super::config::{Experiment, ExperimentConfig};
use super::runner::{execute_with_manifest, ledger_vs_path};
use crate::distributions::{thin, InnovationLaw, PhiLaw};
use crate::engine::{ModelSpec, StationaryConfig, StationarySampler};
use crate::error::Result;
use crate::genealogy::simulate_ledger;
use crate::limitlab::{
    cycle_tail_experiment, extremes_experiment, ks_two_sample, lln_check, oracle_limit_distance,
    partial_sums_experiment, stationary_tail_experiment, thinning_tail_check, y_tail_constant_experiment, Ecdf,
    LimitForm, SumsCase, SumsOptions, TailSensitivity,
};
use crate::rng::{mix64, StreamSource};

pub const CRITERIA: u8 = 14;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    /// One line with the decisive numbers.
    pub summary: String,
    pub values: Value,
}

pub fn title(id: u8) -> &'static str {
    match id {
        1 => "thinning law is exactly binomial",
        2 => "stationary tail constant",
        3 => "thinned tail scaling",
        4 => "path maxima against the innovation-maximum oracle",
        5 => "regeneration cycle lengths",
        6 => "cycle-sum tail index",
        7 => "law of large numbers",
        8 => "central limit theorem",
        9 => "stable sums below index one",
        10 => "centered stable sums",
        11 => "total-progeny tail constant",
        12 => "stationary samplers agree",
        13 => "cohort ledger consistency",
        14 => "reproducibility across worker counts",
        _ => "unknown",
    }
}

fn pareto(phi: PhiLaw, alpha: f64) -> Result<ModelSpec> {
    ModelSpec::new(phi, InnovationLaw::pareto(alpha, 1.0)?)
}

fn poisson_half() -> Result<ModelSpec> {
    ModelSpec::new(PhiLaw::degenerate(0.5)?, InnovationLaw::poisson(2.0)?)
}

fn beta22() -> Result<PhiLaw> {
    PhiLaw::beta(2.0, 2.0)
}

/// Hill index at k/2 and 2k, for the summary line.
fn sensitivity(s: &TailSensitivity) -> String {
    let show = |f: &Option<crate::limitlab::TailFit>| f.map_or("n/a".to_string(), |f| format!("{:.3}", f.alpha_hat));
    format!("k/2: {}, 2k: {}", show(&s.half_k), show(&s.double_k))
}

fn in_range(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

/// Runs criterion `id` with streams derived from `seed`.
pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionReport> {
    let source = StreamSource::new(mix64(seed ^ u64::from(id)));
    let (pass, summary, values) = match id {
        1 => thinning_exactness(&source)?,
        2 => stationary_tail(&source)?,
        3 => thinned_tail(&source)?,
        4 => extremes(&source)?,
        5 => regeneration(&source)?,
        6 => cycle_sums(&source)?,
        7 => lln(&source)?,
        8 => clt(&source)?,
        9 => stable_subcritical(&source)?,
        10 => stable_centered(&source)?,
        11 => progeny_tail(&source)?,
        12 => sampler_agreement(&source)?,
        13 => ledger_consistency(&source)?,
        14 => reproducibility(seed)?,
        _ => return Err(crate::Error::InvalidArgument(format!("no criterion {id}"))),
    };
    Ok(CriterionReport {
        id,
        title: title(id),
        pass,
        summary,
        values,
    })
}

/// Runs every criterion in order, calling `on_report` after each.
pub fn run_all(seed: u64, mut on_report: impl FnMut(&CriterionReport)) -> Result<Vec<CriterionReport>> {
    (1..=CRITERIA)
        .map(|id| {
            let r = run_criterion(id, seed)?;
            on_report(&r);
            Ok(r)
        })
        .collect()
}

type Verdict = (bool, String, Value);

fn thinning_exactness(source: &StreamSource) -> Result<Verdict> {
    const DRAWS: u64 = 1_000_000;
    let cases: Vec<(u64, f64)> = (0..=12u64)
        .flat_map(|x| (1..=9).map(move |i| (x, f64::from(i) / 10.0)))
        .collect();
    let tvs = source.replicate("thinning_exactness", cases.len() as u64, |r, rng| {
        let (x, phi) = cases[r as usize];
        let mut counts = vec![0u64; x as usize + 1];
        for _ in 0..DRAWS {
            counts[thin(x, phi, rng) as usize] += 1;
        }
        let law = Binomial::new(phi, x).expect("valid binomial");
        0.5 * counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (c as f64 / DRAWS as f64 - law.pmf(k as u64)).abs())
            .sum::<f64>()
    });
    let (worst, at) = tvs
        .iter()
        .zip(&cases)
        .fold((0.0f64, cases[0]), |acc, (tv, c)| if *tv > acc.0 { (*tv, *c) } else { acc });
    Ok((
        worst < 0.005,
        format!("max TV {worst:.5} at x={} phi={} (limit 0.005)", at.0, at.1),
        json!({ "max_tv": worst, "x": at.0, "phi": at.1, "cases": cases.len() }),
    ))
}

fn stationary_tail(source: &StreamSource) -> Result<Verdict> {
    let cfg = StationaryConfig::default();
    let main = stationary_tail_experiment(&pareto(beta22()?, 1.5)?, 1_000_000, cfg, None, source)?;
    let base_source = StreamSource::new(mix64(source.master_seed()));
    let base = stationary_tail_experiment(&pareto(PhiLaw::degenerate(0.0)?, 1.5)?, 1_000_000, cfg, None, &base_source)?;
    let c_base = base.fit.fit.c_hat;
    Ok((
        main.rel_error <= 0.15 && in_range(c_base, 0.9, 1.1),
        format!(
            "c_hat {:.4} vs target {:.4} (rel err {:.4}, limit 0.15); phi=0 c_hat {:.4} in [0.9, 1.1]",
            main.fit.fit.c_hat, main.target, main.rel_error, c_base
        ),
        json!({ "beta": main.fit, "target": main.target, "rel_error": main.rel_error, "base": base.fit }),
    ))
}

fn thinned_tail(source: &StreamSource) -> Result<Verdict> {
    let r = thinning_tail_check(&pareto(PhiLaw::degenerate(0.0)?, 1.5)?, 0.6, 10_000_000, None, source)?;
    Ok((
        r.error <= 0.10,
        format!("constant {:.4} vs 0.6^1.5 = {:.4} (rel err {:.4}, limit 0.10)", r.constant, r.target, r.error),
        json!(r),
    ))
}

fn extremes(source: &StreamSource) -> Result<Verdict> {
    let m = pareto(beta22()?, 1.5)?;
    let r = extremes_experiment(&m, 10_000, 10_000, source)?;
    let limit = oracle_limit_distance(&m.innovation, 100_000, LimitForm::Frechet)?;
    let other = oracle_limit_distance(&m.innovation, 100_000, LimitForm::InverseExponent)?;
    Ok((
        r.ks.statistic <= 0.03 && limit <= 0.01,
        format!(
            "KS(M_n, K_n oracle) {:.4} (limit 0.03); oracle vs exp(-x^-a) at n=1e5 {:.5} (limit 0.01); vs exp(-x^(-1/a)) {:.4}",
            r.ks.statistic, limit, other
        ),
        json!({ "ks": r.ks, "frechet_distance_1e5": limit, "inverse_exponent_distance_1e5": other }),
    ))
}

fn regeneration(source: &StreamSource) -> Result<Verdict> {
    let r = cycle_tail_experiment(&poisson_half()?, 100_000, None, source)?;
    let rho = r.adjacent_correlation.unwrap_or(0.0);
    let f = &r.sigma_fit;
    let slope = f.slope.unwrap_or(f64::NAN);
    let r2 = f.r_squared.unwrap_or(f64::NAN);
    Ok((
        rho.abs() <= 0.02 && slope < 0.0 && r2 > 0.9,
        format!(
            "adjacent rho {rho:.4} (|rho| <= 0.02); log-survival slope {slope:.4} < 0, R^2 {r2:.4} > 0.9 on [{}, {}]",
            f.t_low, f.t_high
        ),
        json!({ "adjacent_correlation": rho, "sigma_fit": f, "mean_sigma": r.mean_sigma }),
    ))
}

fn cycle_sums(source: &StreamSource) -> Result<Verdict> {
    let r = cycle_tail_experiment(&pareto(beta22()?, 1.5)?, 100_000, None, source)?;
    let fit = r.w_fit.expect("heavy-tailed model");
    let a = fit.fit.alpha_hat;
    Ok((
        in_range(a, 1.35, 1.65),
        format!("Hill index of W {a:.4} (k={}; {}) in [1.35, 1.65]", fit.fit.k_used, sensitivity(&fit)),
        json!({ "w_fit": fit, "mean_sigma": r.mean_sigma }),
    ))
}

fn lln(source: &StreamSource) -> Result<Verdict> {
    let r = lln_check(&poisson_half()?, 1_000_000, source)?;
    Ok((
        r.error <= 0.02,
        format!("S_n/n {:.4} vs 4 (rel err {:.5}, limit 0.02)", r.mean, r.error),
        json!(r),
    ))
}

fn clt(source: &StreamSource) -> Result<Verdict> {
    let r = partial_sums_experiment(&poisson_half()?, SumsCase::Gaussian, 10_000, 10_000, &SumsOptions::default(), source)?;
    let g = r.gaussian.expect("gaussian case");
    Ok((
        g.ks.pass,
        format!(
            "KS vs N(0,1) {:.4} (threshold {:.4}); long-run variance {:.4}",
            g.ks.statistic, g.ks.threshold, g.long_run_variance
        ),
        json!({ "ks": g.ks, "long_run_variance": g.long_run_variance }),
    ))
}

fn stable_subcritical(source: &StreamSource) -> Result<Verdict> {
    let opts = SumsOptions {
        compare_factor: 10,
        ..SumsOptions::default()
    };
    let r = partial_sums_experiment(&pareto(beta22()?, 0.7)?, SumsCase::SubCritical, 1000, 10_000, &opts, source)?;
    let hill = r.hill.as_ref().expect("stable case");
    let a = hill.fit.alpha_hat;
    let ks = r.self_consistency.statistic;
    Ok((
        r.all_nonnegative && in_range(a, 0.6, 0.8) && ks <= 0.05,
        format!(
            "min {:.4} >= 0; Hill index {a:.4} (k={}; {}) in [0.6, 0.8]; KS(n=1e3, n=1e4) {ks:.4} (limit 0.05)",
            r.min, hill.fit.k_used, sensitivity(hill)
        ),
        json!({ "min": r.min, "hill": hill, "self_consistency": r.self_consistency }),
    ))
}

fn stable_centered(source: &StreamSource) -> Result<Verdict> {
    let r = partial_sums_experiment(&pareto(beta22()?, 1.5)?, SumsCase::MidStable, 1000, 10_000, &SumsOptions::default(), source)?;
    let hill = r.hill.as_ref().expect("stable case");
    let a = hill.fit.alpha_hat;
    let ks = r.self_consistency.statistic;
    Ok((
        ks <= 0.05 && in_range(a, 1.3, 1.7),
        format!(
            "KS(n=1e3, n=4e3) {ks:.4} (limit 0.05); Hill index {a:.4} (k={}; {}) in [1.3, 1.7]; mean {:.4}, pre-sample mean {:.4}",
            hill.fit.k_used,
            sensitivity(hill),
            r.mean.unwrap_or(f64::NAN),
            r.mean_hat.unwrap_or(f64::NAN)
        ),
        json!({ "hill": hill, "self_consistency": r.self_consistency, "mean": r.mean, "mean_hat": r.mean_hat }),
    ))
}

fn progeny_tail(source: &StreamSource) -> Result<Verdict> {
    let r = y_tail_constant_experiment(&pareto(beta22()?, 0.7)?, 1_000_000, None, source)?;
    let det_source = StreamSource::new(mix64(source.master_seed()));
    let d = y_tail_constant_experiment(&pareto(PhiLaw::degenerate(0.5)?, 0.7)?, 1_000_000, None, &det_source)?;
    let exact = 2f64.powf(0.7);
    let d_err = (d.fit.fit.c_hat / exact - 1.0).abs();
    Ok((
        r.rel_error <= 0.2 && d_err <= 0.1,
        format!(
            "c_hat {:.4} vs target {:.4} (rel err {:.4}, limit 0.2); phi=0.5 c_hat {:.4} vs 2^0.7 {:.4} (rel err {d_err:.4}, limit 0.1)",
            r.fit.fit.c_hat, r.target, r.rel_error, d.fit.fit.c_hat, exact
        ),
        json!({ "beta": { "fit": r.fit, "target": r.target, "target_se": r.target_se, "rel_error": r.rel_error },
                "degenerate": { "fit": d.fit, "target": exact, "rel_error": d_err } }),
    ))
}

fn sampler_agreement(source: &StreamSource) -> Result<Verdict> {
    const DRAWS: usize = 100_000;
    let m = ModelSpec::new(PhiLaw::atoms(vec![0.2, 0.8], vec![0.5, 0.5])?, InnovationLaw::geometric(0.5)?)?;
    let series = StationarySampler::new(&m, StationaryConfig::truncated(1e-6))?;
    let burn = StationarySampler::new(&m, StationaryConfig::burn_in(100_000))?;
    let a = source.try_draw("series", DRAWS, |rng| series.sample(rng))?;
    let b = source.try_draw("burn_in", DRAWS, |rng| burn.sample(rng))?;
    let ks = ks_two_sample(&Ecdf::from_counts(&a)?, &Ecdf::from_counts(&b)?);
    Ok((
        ks.statistic <= 0.01,
        format!("KS(truncated series, burn-in 1e5) {:.5} (limit 0.01)", ks.statistic),
        json!({ "ks": ks }),
    ))
}

fn ledger_consistency(source: &StreamSource) -> Result<Verdict> {
    let m = ModelSpec::new(beta22()?, InnovationLaw::poisson(2.0)?)?;
    let (_, totals, plain, exact) = ledger_vs_path(&m, 200, 100_000, source)?;
    let ks = ks_two_sample(&Ecdf::from_counts(&totals)?, &Ecdf::from_counts(&plain)?);

    let ages = |tag: &str, n: u64| -> Result<Vec<(f64, Option<f64>)>> {
        source
            .replicate(tag, 10_000, |_, rng| {
                simulate_ledger(&m, n, rng, |_, _| {})
                    .map(|l| (l.max_age().map_or(-1.0, |v| v as f64), l.avg_age()))
            })
            .into_iter()
            .collect()
    };
    let short = ages("ages_short", 1000)?;
    let long = ages("ages_long", 2000)?;
    let lambda = |v: &[(f64, Option<f64>)]| Ecdf::new(v.iter().map(|p| p.0).collect());
    let lambda_ks = ks_two_sample(&lambda(&short)?, &lambda(&long)?);
    let eta_stats = |v: &[(f64, Option<f64>)]| {
        let mut e: Vec<f64> = v.iter().filter_map(|p| p.1).collect();
        e.sort_by(f64::total_cmp);
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var / n)
    };
    let (m1, v1) = eta_stats(&short);
    let (m2, v2) = eta_stats(&long);
    let joint_se = (v1 + v2).sqrt();
    let eta_ok = (m1 - m2).abs() <= 3.0 * joint_se;
    Ok((
        ks.statistic <= 0.01 && exact && lambda_ks.statistic <= 0.05 && eta_ok,
        format!(
            "KS(ledger X_n, path X_n) {:.5} (limit 0.01); coalescence exact {exact}; lambda KS(1e3, 2e3) {:.4} (limit 0.05); eta means {m1:.4} vs {m2:.4} (|diff| {:.4} <= 3 SE {:.4})",
            ks.statistic,
            lambda_ks.statistic,
            (m1 - m2).abs(),
            3.0 * joint_se
        ),
        json!({ "ks": ks, "coalescence_exact": exact, "lambda_ks": lambda_ks,
                "eta_mean": [m1, m2], "eta_joint_se": joint_se }),
    ))
}

fn reproducibility(seed: u64) -> Result<Verdict> {
    let heavy = pareto(beta22()?, 1.5)?;
    let sub = pareto(beta22()?, 0.7)?;
    let runs = [
        ExperimentConfig { n: 1000, reps: 1000, ..ExperimentConfig::with_model(Experiment::Extremes, heavy.clone()) },
        ExperimentConfig { reps: 100_000, ..ExperimentConfig::with_model(Experiment::Tails, heavy.clone()) },
        ExperimentConfig { n: 200, reps: 2000, pre_sample: 100_000, ..ExperimentConfig::with_model(Experiment::Sums, heavy) },
        ExperimentConfig { n: 100, reps: 2000, ..ExperimentConfig::with_model(Experiment::Sums, sub.clone()) },
        ExperimentConfig { n: 200, reps: 2000, ..ExperimentConfig::with_model(Experiment::Genealogy, poisson_half()?) },
        ExperimentConfig { reps: 20_000, ..ExperimentConfig::with_model(Experiment::Ytail, sub) },
    ];
    let mut identical = true;
    let mut compared = Vec::new();
    for base in runs {
        let one = ExperimentConfig { seed, workers: 1, ..base };
        let (a, manifest) = execute_with_manifest(&one)?;
        // replay from the serialized manifest on 8 workers
        let restored: super::runner::RunManifest = serde_json::from_str(&serde_json::to_string(&manifest)?)?;
        let eight = ExperimentConfig { workers: 8, ..restored.config };
        let (b, _) = execute_with_manifest(&eight)?;
        let same = a.summary == b.summary && a.csv == b.csv;
        identical &= same;
        compared.push(json!({ "experiment": one.experiment, "bytes": a.summary.len() + a.csv.len(), "identical": same }));
    }
    Ok((
        identical,
        format!("{} manifest replays on 1 vs 8 workers byte-identical: {identical}", compared.len()),
        json!(compared),
    ))
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;

use rcinar::cli::{parse_config, read_manifest, run, Experiment, ExperimentConfig, RunOutcome};

/// Simulation experiments for random-coefficient INAR(1) processes.
#[derive(Parser, Debug)]
#[command(name = "rcinar", version)]
struct Args {
    /// simulate, stationary, tails, extremes, sums, regen, genealogy, ytail, lln, verify, or replay
    command: String,
    /// TOML config (optional for verify)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifest to replay
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores); never changes the results
    #[arg(long)]
    workers: Option<usize>,
}

fn load(args: &Args) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = if args.command == "replay" {
        let Some(path) = &args.manifest else { bail!("replay needs --manifest") };
        let manifest = read_manifest(path)?;
        if args.seed.is_some() || args.reps.is_some() {
            bail!("replay takes its seed and reps from the manifest");
        }
        manifest.config
    } else {
        let experiment = Experiment::parse(&args.command)?;
        match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_config(&text, Some(experiment)).with_context(|| path.display().to_string())?
            }
            None if experiment == Experiment::Verify => ExperimentConfig::new(experiment),
            None => bail!("`{}` needs --config", args.command),
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(cfg: &ExperimentConfig, outcome: &RunOutcome) -> anyhow::Result<()> {
    if cfg.experiment == Experiment::Verify {
        let text = std::fs::read_to_string(&outcome.summary_path)?;
        let summary: serde_json::Value = serde_json::from_str(&text)?;
        for c in summary["estimates"].as_array().into_iter().flatten() {
            let verdict = if c["pass"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            println!("[{verdict}] {:>2} {}: {}", c["id"], c["title"].as_str().unwrap_or(""), c["summary"].as_str().unwrap_or(""));
        }
    }
    println!("summary:  {}", outcome.summary_path.display());
    println!("raw data: {}", outcome.csv_path.display());
    println!("manifest: {}", outcome.manifest_path.display());
    println!("{}: {}", cfg.experiment.name(), if outcome.pass { "pass" } else { "FAIL" });
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|cfg| {
        let outcome = run(&cfg)?;
        report(&cfg, &outcome)?;
        Ok(outcome.pass)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

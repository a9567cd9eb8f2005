use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::distributions::{InnovationLaw, PhiLaw};
use crate::engine::{ModelSpec, StationaryConfig, StationaryMode};
use crate::error::{Error, Result};
use crate::limitlab::SumsCase;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Stationary,
    Tails,
    Extremes,
    Sums,
    Regen,
    Genealogy,
    Ytail,
    Lln,
    Verify,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::Simulate,
        Experiment::Stationary,
        Experiment::Tails,
        Experiment::Extremes,
        Experiment::Sums,
        Experiment::Regen,
        Experiment::Genealogy,
        Experiment::Ytail,
        Experiment::Lln,
        Experiment::Verify,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Stationary => "stationary",
            Experiment::Tails => "tails",
            Experiment::Extremes => "extremes",
            Experiment::Sums => "sums",
            Experiment::Regen => "regen",
            Experiment::Genealogy => "genealogy",
            Experiment::Ytail => "ytail",
            Experiment::Lln => "lln",
            Experiment::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }

    fn needs_n(self) -> bool {
        matches!(
            self,
            Experiment::Simulate | Experiment::Extremes | Experiment::Sums | Experiment::Genealogy | Experiment::Lln
        )
    }

    fn needs_reps(self) -> bool {
        matches!(
            self,
            Experiment::Stationary
                | Experiment::Tails
                | Experiment::Extremes
                | Experiment::Sums
                | Experiment::Regen
                | Experiment::Genealogy
                | Experiment::Ytail
        )
    }
}

/// A validated run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: Option<ModelSpec>,
    pub n: u64,
    pub reps: u64,
    pub seed: u64,
    pub case: Option<SumsCase>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses all cores. Never changes the output.
    pub workers: usize,
    /// Most raw values written to the CSV.
    pub sample_cap: usize,
    pub stationary: StationaryConfig,
    pub x0: u64,
    pub thin_phi: f64,
    pub compare_factor: u64,
    pub pre_sample: usize,
    pub hill_k: Option<usize>,
    /// Pass/fail tolerance; `None` takes the experiment's default.
    pub tolerance: Option<f64>,
}

impl ExperimentConfig {
    /// Defaults for `experiment` with no model.
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            model: None,
            n: 1,
            reps: 1,
            seed: 0,
            case: None,
            out_dir: PathBuf::from("out"),
            workers: 0,
            sample_cap: 10_000_000,
            stationary: StationaryConfig::default(),
            x0: 0,
            thin_phi: 0.6,
            compare_factor: 4,
            pre_sample: 1_000_000,
            hill_k: None,
            tolerance: None,
        }
    }

    pub fn with_model(experiment: Experiment, model: ModelSpec) -> Self {
        ExperimentConfig {
            model: Some(model),
            ..ExperimentConfig::new(experiment)
        }
    }

    pub fn model(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config(format!("experiment `{}` needs a model", self.experiment.name())))
    }

    /// The sums regime: the configured case, else the one implied by the model.
    pub fn sums_case(&self) -> Result<SumsCase> {
        let implied = SumsCase::for_tail_index(self.model()?.tail_index());
        Ok(self.case.unwrap_or(implied))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment == Experiment::Verify {
            return Ok(());
        }
        let model = self.model()?;
        model.validate()?;
        if self.n == 0 || self.reps == 0 {
            return Err(Error::Config("n and reps must be >= 1".into()));
        }
        match self.experiment {
            Experiment::Stationary | Experiment::Sums => self.stationary.validate(model)?,
            _ => {}
        }
        if self.experiment == Experiment::Sums {
            let case = self.sums_case()?;
            let implied = SumsCase::for_tail_index(model.tail_index());
            if case != implied {
                let detail = match model.tail_index() {
                    Some(a) => format!("tail index {a} calls for {}", implied.name()),
                    None => format!("light-tailed innovations call for {}", implied.name()),
                };
                return Err(Error::CaseMismatch { case, detail });
            }
        }
        if !(0.0..=1.0).contains(&self.thin_phi) {
            return Err(Error::Config(format!("thin_phi {} outside [0, 1]", self.thin_phi)));
        }
        if self.compare_factor < 2 {
            return Err(Error::Config("compare_factor must be >= 2".into()));
        }
        Ok(())
    }
}

/// Keys accepted in a config document, after flattening nested tables with dots.
pub const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "n",
    "reps",
    "case",
    "out_dir",
    "workers",
    "sample_cap",
    "x0",
    "thin_phi",
    "compare_factor",
    "pre_sample",
    "hill_k",
    "tolerance",
    "epsilon",
    "gamma",
    "burn_in",
    "stationary.mode",
    "model.phi.kind",
    "model.phi.p",
    "model.phi.atoms",
    "model.phi.weights",
    "model.phi.a",
    "model.phi.b",
    "model.z.kind",
    "model.z.alpha",
    "model.z.sigma",
    "model.z.lambda",
    "model.z.q",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, toml::Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys(BTreeMap<String, toml::Value>);

impl Keys {
    fn take(&mut self, key: &str) -> Option<toml::Value> {
        self.0.remove(key)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(f)),
            Some(toml::Value::Integer(i)) => Ok(Some(i as f64)),
            Some(v) => Err(Error::Config(format!("`{key}` must be a number, got {v}"))),
        }
    }

    fn req_float(&mut self, key: &str) -> Result<f64> {
        self.float(key)?.ok_or_else(|| Error::Config(format!("missing `{key}`")))
    }

    fn uint(&mut self, key: &str) -> Result<Option<u64>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if i >= 0 => Ok(Some(i as u64)),
            // large seeds may be written as strings
            Some(toml::Value::String(s)) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}` must be a non-negative integer, got {s:?}"))),
            Some(v) => Err(Error::Config(format!("`{key}` must be a non-negative integer, got {v}"))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Error::Config(format!("`{key}` must be a string, got {v}"))),
        }
    }

    fn floats(&mut self, key: &str) -> Result<Vec<f64>> {
        match self.take(key) {
            Some(toml::Value::Array(a)) => a
                .into_iter()
                .map(|v| match v {
                    toml::Value::Float(f) => Ok(f),
                    toml::Value::Integer(i) => Ok(i as f64),
                    v => Err(Error::Config(format!("`{key}` entries must be numbers, got {v}"))),
                })
                .collect(),
            None => Err(Error::Config(format!("missing `{key}`"))),
            Some(v) => Err(Error::Config(format!("`{key}` must be an array, got {v}"))),
        }
    }
}

fn parse_case(s: &str) -> Result<SumsCase> {
    let key: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_lowercase();
    Ok(match key.as_str() {
        "subcritical" => SumsCase::SubCritical,
        "unit" => SumsCase::Unit,
        "midstable" => SumsCase::MidStable,
        "boundary" => SumsCase::Boundary,
        "gaussian" => SumsCase::Gaussian,
        _ => return Err(Error::Config(format!("unknown case `{s}`"))),
    })
}

fn parse_model(keys: &mut Keys) -> Result<Option<ModelSpec>> {
    let phi_kind = keys.string("model.phi.kind")?;
    let z_kind = keys.string("model.z.kind")?;
    let (phi_kind, z_kind) = match (phi_kind, z_kind) {
        (None, None) => return Ok(None),
        (Some(p), Some(z)) => (p, z),
        (None, Some(_)) => return Err(Error::Config("missing `model.phi.kind`".into())),
        (Some(_), None) => return Err(Error::Config("missing `model.z.kind`".into())),
    };
    let phi = match phi_kind.as_str() {
        "degenerate" => PhiLaw::Degenerate { p: keys.req_float("model.phi.p")? },
        "discrete_atoms" => PhiLaw::DiscreteAtoms {
            atoms: keys.floats("model.phi.atoms")?,
            weights: keys.floats("model.phi.weights")?,
        },
        "beta_shape" | "beta" => PhiLaw::BetaShape {
            a: keys.req_float("model.phi.a")?,
            b: keys.req_float("model.phi.b")?,
        },
        other => return Err(Error::Config(format!("unknown `model.phi.kind` `{other}`"))),
    };
    let z = match z_kind.as_str() {
        "discrete_pareto" | "pareto" => InnovationLaw::DiscretePareto {
            alpha: keys.req_float("model.z.alpha")?,
            sigma: keys.float("model.z.sigma")?.unwrap_or(1.0),
        },
        "poisson" => InnovationLaw::Poisson { lambda: keys.req_float("model.z.lambda")? },
        "geometric" => InnovationLaw::Geometric { q: keys.req_float("model.z.q")? },
        other => return Err(Error::Config(format!("unknown `model.z.kind` `{other}`"))),
    };
    Ok(Some(ModelSpec::new(phi, z)?))
}

/// Parses a TOML document of dotted keys (`model.phi.kind = "beta_shape"`)
/// or the equivalent nested tables. `experiment` may be given by the caller
/// instead of the document.
pub fn parse_config(text: &str, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
    let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
    let mut flat = BTreeMap::new();
    flatten("", &table, &mut flat);
    if let Some(unknown) = flat.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown key `{unknown}`")));
    }
    let mut keys = Keys(flat);
    let in_doc = keys.string("experiment")?.map(|s| Experiment::parse(&s)).transpose()?;
    let experiment = match (experiment, in_doc) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Config(format!(
                "experiment `{}` does not match the config's `{}`",
                a.name(),
                b.name()
            )))
        }
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => return Err(Error::Config("missing `experiment`".into())),
    };
    let mut cfg = ExperimentConfig::new(experiment);
    cfg.model = parse_model(&mut keys)?;
    let n = keys.uint("n")?;
    let reps = keys.uint("reps")?;
    if experiment.needs_n() && n.is_none() {
        return Err(Error::Config(format!("experiment `{}` needs `n`", experiment.name())));
    }
    if experiment.needs_reps() && reps.is_none() {
        return Err(Error::Config(format!("experiment `{}` needs `reps`", experiment.name())));
    }
    cfg.n = n.unwrap_or(cfg.n);
    cfg.reps = reps.unwrap_or(cfg.reps);
    cfg.seed = keys.uint("seed")?.unwrap_or(cfg.seed);
    cfg.case = keys.string("case")?.map(|s| parse_case(&s)).transpose()?;
    if let Some(dir) = keys.string("out_dir")? {
        cfg.out_dir = PathBuf::from(dir);
    }
    cfg.workers = keys.uint("workers")?.map_or(cfg.workers, |v| v as usize);
    cfg.sample_cap = keys.uint("sample_cap")?.map_or(cfg.sample_cap, |v| v as usize);
    cfg.x0 = keys.uint("x0")?.unwrap_or(cfg.x0);
    cfg.thin_phi = keys.float("thin_phi")?.unwrap_or(cfg.thin_phi);
    cfg.compare_factor = keys.uint("compare_factor")?.unwrap_or(cfg.compare_factor);
    cfg.pre_sample = keys.uint("pre_sample")?.map_or(cfg.pre_sample, |v| v as usize);
    cfg.hill_k = keys.uint("hill_k")?.map(|v| v as usize);
    cfg.tolerance = keys.float("tolerance")?;
    cfg.stationary.epsilon = keys.float("epsilon")?.unwrap_or(cfg.stationary.epsilon);
    cfg.stationary.gamma = keys.float("gamma")?;
    cfg.stationary.burn_in_steps = keys.uint("burn_in")?.unwrap_or(cfg.stationary.burn_in_steps);
    if let Some(mode) = keys.string("stationary.mode")? {
        cfg.stationary.mode = match mode.as_str() {
            "truncated_series" => StationaryMode::TruncatedSeries,
            "burn_in" => StationaryMode::BurnIn,
            other => return Err(Error::Config(format!("unknown `stationary.mode` `{other}`"))),
        };
    }
    debug_assert!(keys.0.is_empty(), "unconsumed keys {:?}", keys.0.keys());
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "simulate"
n = 100
model.phi.kind = "degenerate"
model.phi.p = 0.5
model.z.kind = "poisson"
model.z.lambda = 2.0
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL, None).unwrap();
        assert_eq!(c.experiment, Experiment::Simulate);
        assert_eq!(c.n, 100);
        assert_eq!(c.reps, 1);
        assert_eq!(c.stationary.epsilon, 1e-6);
        assert_eq!(c.stationary.gamma, None);
        assert_eq!(c.sample_cap, 10_000_000);
        let m = c.model().unwrap();
        assert_eq!(m.phi, PhiLaw::Degenerate { p: 0.5 });
        assert_eq!(m.innovation, InnovationLaw::Poisson { lambda: 2.0 });
    }

    #[test]
    fn nested_tables_are_equivalent() {
        let nested = r#"
experiment = "simulate"
n = 100
[model.phi]
kind = "degenerate"
p = 0.5
[model.z]
kind = "poisson"
lambda = 2.0
"#;
        assert_eq!(parse_config(nested, None).unwrap(), parse_config(MINIMAL, None).unwrap());
    }

    #[test]
    fn phi_at_one_is_rejected_with_a1_message() {
        let text = MINIMAL.replace("model.phi.p = 0.5", "model.phi.p = 1.0");
        let err = parse_config(&text, None).unwrap_err().to_string();
        assert!(err.contains("(A1)"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{MINIMAL}model.z.shape = 3\n");
        let err = parse_config(&text, None).unwrap_err().to_string();
        assert!(err.contains("model.z.shape"), "{err}");
    }

    #[test]
    fn case_must_fit_the_model() {
        let text = r#"
experiment = "sums"
n = 100
reps = 10
case = "SubCritical"
model.phi.kind = "beta_shape"
model.phi.a = 2
model.phi.b = 2
model.z.kind = "discrete_pareto"
model.z.alpha = 1.5
"#;
        let err = parse_config(text, None).unwrap_err();
        assert!(matches!(err, Error::CaseMismatch { case: SumsCase::SubCritical, .. }), "{err}");
        let ok = parse_config(&text.replace("SubCritical", "mid_stable"), None).unwrap();
        assert_eq!(ok.sums_case().unwrap(), SumsCase::MidStable);
    }

    #[test]
    fn missing_fields_are_reported() {
        let err = parse_config(&MINIMAL.replace("n = 100\n", ""), None).unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
        let err = parse_config("experiment = \"lln\"\nn = 5\n", None).unwrap_err().to_string();
        assert!(err.contains("model"), "{err}");
        assert!(parse_config(MINIMAL, Some(Experiment::Lln)).is_err());
        assert!(parse_config("", Some(Experiment::Verify)).is_ok());
    }

    #[test]
    fn atoms_and_overrides() {
        let text = r#"
experiment = "stationary"
reps = 1000
seed = "18446744073709551615"
stationary.mode = "burn_in"
burn_in = 500
model.phi.kind = "discrete_atoms"
model.phi.atoms = [0.2, 0.8]
model.phi.weights = [0.5, 0.5]
model.z.kind = "geometric"
model.z.q = 0.5
"#;
        let c = parse_config(text, None).unwrap();
        assert_eq!(c.seed, u64::MAX);
        assert_eq!(c.stationary.mode, StationaryMode::BurnIn);
        assert_eq!(c.stationary.burn_in_steps, 500);
    }
}

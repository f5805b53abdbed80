use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::catalog::Experiment;
use crate::LabError;

/// Default output directory when neither `--out` nor the config names one.
pub const OUT_ENV: &str = "TYPICALITY_LAB_OUT";
pub const DEFAULT_OUT: &str = "lab-output";

/// Config file as written by the user. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Replaces the typicality threshold τ of experiments that have one.
    pub tau: Option<f64>,
    #[serde(default)]
    pub spec: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(format!("{e}")))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

/// Fully resolved configuration; this is what reports echo.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub tau: Option<f64>,
    pub spec: Value,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl ExperimentConfig {
    pub fn resolve(file: ConfigFile, cli: Overrides) -> Result<Self, LabError> {
        let name = match (cli.experiment, file.experiment) {
            (Some(a), Some(b)) if a != b => {
                return Err(LabError::Config(format!("command line names '{a}' but the config names '{b}'")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(LabError::Config("no experiment named".into())),
        };
        let experiment = Experiment::from_name(&name)?;
        let workers = cli.workers.or(file.workers).unwrap_or_else(default_workers);
        if workers == 0 {
            return Err(LabError::Config("workers must be at least 1".into()));
        }
        let output_dir = cli
            .output_dir
            .or(file.output_dir)
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let mut spec = experiment.resolve_spec(file.spec)?;
        if let Some(tau) = file.tau {
            if !(tau > 0.0 && tau < 0.5) {
                return Err(LabError::Config(format!("tau = {tau} must lie in (0, 0.5)")));
            }
            match spec.get_mut("tau") {
                Some(slot) => *slot = json!(tau),
                None => return Err(LabError::Config(format!("{name} has no typicality threshold to override"))),
            }
        }
        Ok(ExperimentConfig { experiment, seed: cli.seed.or(file.seed).unwrap_or(0), workers, output_dir, tau: file.tau, spec })
    }

    /// The config echo stored in reports.
    pub fn echo(&self) -> Value {
        json!({
            "experiment": self.experiment.name(),
            "seed": self.seed,
            "workers": self.workers,
            "output_dir": self.output_dir,
            "tau": self.tau,
            "spec": self.spec,
        })
    }

    /// Rebuilds a config from a report's echo.
    pub fn from_echo(echo: &Value) -> Result<Self, LabError> {
        let bad = || LabError::Config("malformed config echo".into());
        let experiment = Experiment::from_name(echo["experiment"].as_str().ok_or_else(bad)?)?;
        let spec = echo.get("spec").cloned().ok_or_else(bad)?;
        // round trip through the typed spec to reject tampering
        experiment.check_spec(&spec)?;
        Ok(ExperimentConfig {
            experiment,
            seed: echo["seed"].as_u64().ok_or_else(bad)?,
            workers: echo["workers"].as_u64().ok_or_else(bad)? as usize,
            output_dir: PathBuf::from(echo["output_dir"].as_str().ok_or_else(bad)?),
            tau: echo["tau"].as_f64(),
            spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Result<ExperimentConfig, LabError> {
        ExperimentConfig::resolve(ConfigFile::parse(text)?, Overrides::default())
    }

    #[test]
    fn sparse_file_gets_defaults() {
        let c = resolve("experiment = \"coin-lln\"\n[spec]\nseeds = 7\n").unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.spec["seeds"], 7);
        assert_eq!(c.spec["epsilon"], 0.01);
        assert_eq!(c.spec["machine"]["g"], 9.8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(resolve("experiment = \"coin-lln\"\nsed = 3\n"), Err(LabError::Config(_))));
        assert!(matches!(resolve("experiment = \"coin-lln\"\n[spec]\nsedes = 3\n"), Err(LabError::Config(_))));
        assert!(matches!(resolve("experiment = \"coin-lln\"\n[spec.machine]\ngravity = 3\n"), Err(LabError::Config(_))));
        assert!(matches!(resolve("experiment = \"quantum-toaster\"\n"), Err(LabError::Config(_))));
    }

    #[test]
    fn command_line_wins() {
        let file = ConfigFile::parse("experiment = \"born-lln\"\nseed = 3\nworkers = 2\n").unwrap();
        let cli = Overrides { seed: Some(9), workers: Some(1), ..Default::default() };
        let c = ExperimentConfig::resolve(file, cli).unwrap();
        assert_eq!((c.seed, c.workers), (9, 1));
        let clash = Overrides { experiment: Some("coin-lln".into()), ..Default::default() };
        let file = ConfigFile::parse("experiment = \"born-lln\"\n").unwrap();
        assert!(ExperimentConfig::resolve(file, clash).is_err());
    }

    #[test]
    fn tau_override() {
        let c = resolve("experiment = \"born-lln\"\ntau = 0.05\n").unwrap();
        assert_eq!(c.spec["tau"], 0.05);
        assert!(resolve("experiment = \"effective-detect\"\ntau = 0.05\n").is_err());
        assert!(resolve("experiment = \"born-lln\"\ntau = 0.7\n").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = resolve("experiment = \"stone-robustness\"\nseed = 4\nworkers = 3\noutput_dir = \"x\"\n").unwrap();
        assert_eq!(ExperimentConfig::from_echo(&c.echo()).unwrap(), c);
    }
}

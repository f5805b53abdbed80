use serde::Serialize;
use serde_json::Value;
use typicality_core::bohm::{equivariance_check, EquivarianceSpec};
use typicality_core::classical::{liouville_experiment, LiouvilleSpec};
use typicality_core::classical_experiments::{
    coin_lln_experiment, maxwell_lln_experiment, stone_throw_robustness, CoinLlnSpec, MaxwellLlnSpec,
    StoneThrowSpec,
};
use typicality_core::report::ExperimentRun;
use typicality_core::subsystems::{
    absolute_uncertainty_experiment, born_lln_experiment, conditional_born_statistics,
    effective_detection_experiment, AbsoluteUncertaintySpec, BornLlnSpec, ConditionalBornSpec,
    EffectiveDetectSpec,
};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    MaxwellLln,
    LiouvilleCheck,
    CoinLln,
    StoneRobustness,
    Equivariance,
    ConditionalBorn,
    EffectiveDetect,
    BornLln,
    AbsoluteUncertainty,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::MaxwellLln,
        Experiment::LiouvilleCheck,
        Experiment::CoinLln,
        Experiment::StoneRobustness,
        Experiment::Equivariance,
        Experiment::ConditionalBorn,
        Experiment::EffectiveDetect,
        Experiment::BornLln,
        Experiment::AbsoluteUncertainty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::MaxwellLln => "maxwell-lln",
            Experiment::LiouvilleCheck => "liouville-check",
            Experiment::CoinLln => "coin-lln",
            Experiment::StoneRobustness => "stone-robustness",
            Experiment::Equivariance => "equivariance",
            Experiment::ConditionalBorn => "conditional-born",
            Experiment::EffectiveDetect => "effective-detect",
            Experiment::BornLln => "born-lln",
            Experiment::AbsoluteUncertainty => "absolute-uncertainty",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, LabError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| LabError::Config(format!("unknown experiment '{name}' (see `typicality-lab list`)")))
    }

    /// Where the experiment sits in the typicality argument.
    pub fn anchors(self) -> &'static [&'static str] {
        match self {
            Experiment::MaxwellLln => &[
                "Maxwell distribution of typical ideal-gas microstates",
                "law of large numbers over the microcanonical measure",
            ],
            Experiment::LiouvilleCheck => &["Liouville's theorem: stationarity of phase-space volume"],
            Experiment::CoinLln => &["coin tossing: heads frequency for typical initial conditions"],
            Experiment::StoneRobustness => &["stone throw: robustness under small changes of initial data"],
            Experiment::Equivariance => &["equivariance of |Psi|^2 under the guiding equation"],
            Experiment::ConditionalBorn => &["conditional measure |psi^Y(x)|^2 dx given the environment"],
            Experiment::EffectiveDetect => &["effective wave function from disjoint y-supports"],
            Experiment::BornLln => &[
                "Born's rule as a law of large numbers for identically prepared subsystems",
                "quantum equilibrium",
            ],
            Experiment::AbsoluteUncertainty => &["absolute uncertainty: velocity spread versus packet width"],
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::MaxwellLln => "deviation-set measure of the empirical velocity fraction along an N-ladder",
            Experiment::LiouvilleCheck => "phase-space volume of a harmonic-oscillator square after transport",
            Experiment::CoinLln => "heads frequency of a rigid spinning coin, wide and narrow spin ranges",
            Experiment::StoneRobustness => "sup-norm deviation of perturbed ballistic throws",
            Experiment::Equivariance => "L1 distance between transported samples and |Psi_t|^2 over a beat period",
            Experiment::ConditionalBorn => "per-y-bin X histograms against sliced conditional densities",
            Experiment::EffectiveDetect => "neighbourhood-overlap detection of effective wave functions",
            Experiment::BornLln => "region frequencies of M subsystems against the exact binomial tail",
            Experiment::AbsoluteUncertainty => "dx0 * m * dv against hbar/2 for a ladder of Gaussian widths",
        }
    }

    /// Fully materialized default spec.
    pub fn default_spec(self) -> Value {
        let v = match self {
            Experiment::MaxwellLln => serde_json::to_value(MaxwellLlnSpec::default()),
            Experiment::LiouvilleCheck => serde_json::to_value(LiouvilleSpec::default()),
            Experiment::CoinLln => serde_json::to_value(CoinLlnSpec::default()),
            Experiment::StoneRobustness => serde_json::to_value(StoneThrowSpec::default()),
            Experiment::Equivariance => serde_json::to_value(EquivarianceSpec::default()),
            Experiment::ConditionalBorn => serde_json::to_value(ConditionalBornSpec::default()),
            Experiment::EffectiveDetect => serde_json::to_value(EffectiveDetectSpec::default()),
            Experiment::BornLln => serde_json::to_value(BornLlnSpec::default()),
            Experiment::AbsoluteUncertainty => serde_json::to_value(AbsoluteUncertaintySpec::default()),
        };
        v.expect("default specs serialize")
    }

    /// Parses a (possibly sparse) spec table, fills defaults and returns the
    /// resolved spec as JSON.
    pub fn resolve_spec(self, table: toml::Table) -> Result<Value, LabError> {
        fn go<T>(table: toml::Table) -> Result<Value, LabError>
        where
            T: serde::de::DeserializeOwned + Serialize,
        {
            let spec: T = toml::Value::Table(table).try_into().map_err(|e| LabError::Config(format!("{e}")))?;
            Ok(serde_json::to_value(spec).expect("specs serialize"))
        }
        match self {
            Experiment::MaxwellLln => go::<MaxwellLlnSpec>(table),
            Experiment::LiouvilleCheck => go::<LiouvilleSpec>(table),
            Experiment::CoinLln => go::<CoinLlnSpec>(table),
            Experiment::StoneRobustness => go::<StoneThrowSpec>(table),
            Experiment::Equivariance => go::<EquivarianceSpec>(table),
            Experiment::ConditionalBorn => go::<ConditionalBornSpec>(table),
            Experiment::EffectiveDetect => go::<EffectiveDetectSpec>(table),
            Experiment::BornLln => go::<BornLlnSpec>(table),
            Experiment::AbsoluteUncertainty => go::<AbsoluteUncertaintySpec>(table),
        }
    }

    /// Checks that a resolved spec parses as this experiment's spec type.
    pub fn check_spec(self, spec: &Value) -> Result<(), LabError> {
        match self {
            Experiment::MaxwellLln => parse::<MaxwellLlnSpec>(spec).map(drop),
            Experiment::LiouvilleCheck => parse::<LiouvilleSpec>(spec).map(drop),
            Experiment::CoinLln => parse::<CoinLlnSpec>(spec).map(drop),
            Experiment::StoneRobustness => parse::<StoneThrowSpec>(spec).map(drop),
            Experiment::Equivariance => parse::<EquivarianceSpec>(spec).map(drop),
            Experiment::ConditionalBorn => parse::<ConditionalBornSpec>(spec).map(drop),
            Experiment::EffectiveDetect => parse::<EffectiveDetectSpec>(spec).map(drop),
            Experiment::BornLln => parse::<BornLlnSpec>(spec).map(drop),
            Experiment::AbsoluteUncertainty => parse::<AbsoluteUncertaintySpec>(spec).map(drop),
        }
    }

    /// Runs on the current rayon pool.
    pub fn run(self, spec: &Value, seed: u64) -> Result<ExperimentRun, LabError> {
        let run = match self {
            Experiment::MaxwellLln => maxwell_lln_experiment(&parse(spec)?, seed),
            Experiment::LiouvilleCheck => liouville_experiment(&parse(spec)?, seed),
            Experiment::CoinLln => coin_lln_experiment(&parse(spec)?, seed),
            Experiment::StoneRobustness => stone_throw_robustness(&parse(spec)?, seed),
            Experiment::Equivariance => equivariance_check(&parse(spec)?, seed),
            Experiment::ConditionalBorn => conditional_born_statistics(&parse(spec)?, seed),
            Experiment::EffectiveDetect => effective_detection_experiment(&parse(spec)?, seed),
            Experiment::BornLln => born_lln_experiment(&parse(spec)?, seed),
            Experiment::AbsoluteUncertainty => absolute_uncertainty_experiment(&parse(spec)?, seed),
        };
        Ok(run?)
    }
}

fn parse<T: serde::de::DeserializeOwned>(spec: &Value) -> Result<T, LabError> {
    T::deserialize(spec).map_err(|e| LabError::Config(format!("{e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub anchors: &'static [&'static str],
    pub summary: &'static str,
    pub defaults: Value,
}

pub fn list_experiments() -> Vec<CatalogEntry> {
    Experiment::ALL
        .into_iter()
        .map(|e| CatalogEntry { name: e.name(), anchors: e.anchors(), summary: e.summary(), defaults: e.default_spec() })
        .collect()
}

use std::collections::BTreeMap;
use std::path::Path;

use typicality_core::report::ExperimentReport;
use typicality_lab::{run_experiment, write_artifacts, ConfigFile, Experiment, ExperimentConfig, Overrides};

fn config(toml: &str, workers: usize) -> ExperimentConfig {
    ExperimentConfig::resolve(ConfigFile::parse(toml).unwrap(), Overrides { workers: Some(workers), ..Default::default() })
        .unwrap()
}

fn tables(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn run_into(cfg: &ExperimentConfig, dir: &Path) -> ExperimentReport {
    let run = run_experiment(cfg).unwrap();
    write_artifacts(&run, dir).unwrap();
    run.report
}

#[test]
fn maxwell_defaults_smoke() {
    let cfg = config("experiment = \"maxwell-lln\"\n", 2);
    let run = run_experiment(&cfg).unwrap();
    let ladder = run.table("deviation_ladder").unwrap();
    assert_eq!(ladder.rows.len(), 4);
    for n in [100, 1000, 10_000, 100_000] {
        assert!(run.report.metric(&format!("deviation_measure[N={n}]")).is_some());
    }
    assert!(run.report.metrics.iter().all(|m| m.value.is_finite()));
    assert!(run.report.wall_time_s > 0.0);
    assert_eq!(run.report.workers, 2);
}

#[test]
fn identical_config_gives_identical_tables() {
    let cfg = config("experiment = \"born-lln\"\nseed = 21\n[spec]\nseeds = 200\n", 2);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(&cfg, a.path());
    run_into(&cfg, b.path());
    let (ta, tb) = (tables(a.path()), tables(b.path()));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
}

#[test]
fn worker_count_does_not_change_statistics() {
    for toml in [
        "experiment = \"equivariance\"\n[spec]\nn_samples = 500\nnoise_trials = 40\ncheckpoints = 2\n",
        "experiment = \"liouville-check\"\n[spec]\nn_samples = 30000\n",
        "experiment = \"conditional-born\"\n[spec]\ngrid_points = 64\nn_samples = 5000\nnoise_trials = 30\ny_bins = 4\n",
    ] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = run_into(&config(toml, 1), a.path());
        let rb = run_into(&config(toml, 8), b.path());
        assert_eq!(tables(a.path()), tables(b.path()), "{toml}");
        let values = |r: &ExperimentReport| r.metrics.iter().map(|m| (m.name.clone(), m.value.to_bits())).collect::<Vec<_>>();
        assert_eq!(values(&ra), values(&rb));
    }
}

#[test]
fn report_round_trips_and_reruns_from_its_echo() {
    let cfg = config("experiment = \"stone-robustness\"\nseed = 8\n[spec]\nn_perturbations = 100\n", 1);
    let dir = tempfile::tempdir().unwrap();
    let report = run_into(&cfg, dir.path());
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: ExperimentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert!(back.metrics.iter().all(|m| m.recompute() == m.pass));

    let again = ExperimentConfig::from_echo(&back.config).unwrap();
    assert_eq!(again, cfg);
    let dir2 = tempfile::tempdir().unwrap();
    run_into(&again, dir2.path());
    assert_eq!(tables(dir.path()), tables(dir2.path()));
}

#[test]
fn every_experiment_resolves_its_own_defaults() {
    for e in Experiment::ALL {
        let spec = e.resolve_spec(toml::Table::new()).unwrap();
        assert_eq!(spec, e.default_spec(), "{}", e.name());
        assert!(!e.anchors().is_empty());
    }
}

use std::path::{Path, PathBuf};
use std::time::Instant;

use typicality_core::report::ExperimentRun;

use crate::config::ExperimentConfig;
use crate::{svg, LabError};

/// Runs the configured experiment on a pool of `config.workers` threads and
/// stamps the report with the config echo, worker count and wall time.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun, LabError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| LabError::Config(format!("cannot build worker pool: {e}")))?;
    let start = Instant::now();
    let mut run = pool.install(|| config.experiment.run(&config.spec, config.seed))?;
    run.report.wall_time_s = start.elapsed().as_secs_f64();
    run.report.workers = config.workers;
    run.report.config = config.echo();
    Ok(run)
}

/// Writes `report.json`, one CSV per table and one SVG per plot into
/// `dir`, returning the paths written.
pub fn write_artifacts(run: &ExperimentRun, dir: &Path) -> Result<Vec<PathBuf>, LabError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<(), LabError> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    let report = serde_json::to_string_pretty(&run.report).expect("reports serialize");
    put("report.json".into(), report + "\n")?;
    for t in &run.tables {
        put(format!("{}.csv", t.name), t.to_csv())?;
    }
    for p in &run.plots {
        put(format!("{}.svg", p.name), svg::render(p))?;
    }
    Ok(written)
}

/// Output directory of one experiment under the configured root.
pub fn artifact_dir(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.join(config.experiment.name())
}

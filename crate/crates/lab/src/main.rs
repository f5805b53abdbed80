use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use typicality_lab::{
    artifact_dir, list_experiments, run_experiment, write_artifacts, ConfigFile, ExperimentConfig, LabError,
    Overrides,
};

#[derive(Parser)]
#[command(name = "typicality-lab", version, about = "Typicality experiments in classical and Bohmian mechanics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report, tables and plots.
    Run {
        experiment: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output root; defaults to $TYPICALITY_LAB_OUT, then ./lab-output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the experiment catalog.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Resolve a config file and print it with all defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<u8, LabError> {
    match command {
        Command::Run { experiment, config, seed, workers, out } => {
            let file = config.as_deref().map(ConfigFile::load).transpose()?.unwrap_or_default();
            let cfg = ExperimentConfig::resolve(
                file,
                Overrides { experiment: Some(experiment), seed, workers, output_dir: out },
            )?;
            let run = run_experiment(&cfg)?;
            let dir = artifact_dir(&cfg);
            write_artifacts(&run, &dir)?;
            for m in &run.report.metrics {
                println!("{:<48} {:>14.6e}  {}", m.name, m.value, if m.pass { "ok" } else { "FAIL" });
            }
            for f in &run.report.flags {
                println!("flag: {f}");
            }
            println!("{} in {:.2}s, artifacts in {}", cfg.experiment.name(), run.report.wall_time_s, dir.display());
            Ok(if run.report.all_pass() { 0 } else { 1 })
        }
        Command::List { json } => {
            let catalog = list_experiments();
            if json {
                println!("{}", serde_json::to_string_pretty(&catalog).expect("catalog serializes"));
            } else {
                for e in &catalog {
                    println!("{:<22} {}", e.name, e.summary);
                    for a in e.anchors {
                        println!("{:<22}   anchor: {a}", "");
                    }
                }
            }
            Ok(0)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::resolve(ConfigFile::load(&config)?, Overrides::default())?;
            println!("{}", serde_json::to_string_pretty(&cfg.echo()).expect("echo serializes"));
            Ok(0)
        }
    }
}

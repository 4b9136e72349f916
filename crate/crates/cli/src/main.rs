use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use abcrl::costs::{summarize, trace_costs, write_cost_report, ActionTrace, CostConfig};
use abcrl::harness::{self, HumanSummary, RunConfig};
use abcrl::Error;
use clap::{Parser, Subcommand};

/// Train and evaluate agents with adaptive behavioral costs.
///
/// Exit status: 0 on success, 1 on a runtime failure or a failed check,
/// 2 on invalid input (config, trace or run log files).
#[derive(Debug, Parser)]
#[command(name = "abcrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every agent in a TOML run config under every seed.
    ///
    /// ABCRL_SEED_OVERRIDE (comma-separated) replaces the config's seeds.
    Train {
        config: PathBuf,
        /// Write outputs here instead of the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step shaking, spin and combined costs of an action trace.
    ///
    /// The CSV goes to stdout and a one-line summary to stderr.
    Cost {
        trace: PathBuf,
        #[arg(long, default_value_t = 8)]
        w: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long = "step-angle", default_value_t = 72)]
        step_angle: u32,
        /// Also count forward/backward reversals as shaking.
        #[arg(long)]
        shake_moves: bool,
        /// Also write the summary as CSV, for `compare --human`.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Check the closed-form math against numerical oracles.
    Verify,
    /// Summarize the run logs in a directory.
    Compare {
        dir: PathBuf,
        /// Cost summary of human play to overlay.
        #[arg(long)]
        human: Option<PathBuf>,
        /// Write reports here instead of into `dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trailing window, in episodes, for the learning curves.
        #[arg(long, default_value_t = 50)]
        smooth: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out } => train(&config, out),
        Command::Cost {
            trace,
            w,
            alpha,
            step_angle,
            shake_moves,
            summary,
        } => {
            let config = CostConfig {
                w,
                alpha,
                step_angle,
                shake_moves,
            };
            cost(&trace, &config, summary.as_deref())
        }
        Command::Verify => verify(),
        Command::Compare {
            dir,
            human,
            out,
            smooth,
        } => compare(&dir, human.as_deref(), out.as_deref(), smooth),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn stdout_error(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn train(path: &Path, out: Option<PathBuf>) -> Result<ExitCode, Error> {
    let mut config = RunConfig::load(path)?;
    config.apply_seed_override()?;
    if let Some(out) = out {
        config.output_dir = out;
    }
    let written = harness::train(&config)?;
    eprintln!(
        "{} agents x {} seeds x {} episodes: wrote {} files to {}",
        config.agents.len(),
        config.seeds.len(),
        config.episodes,
        written.len(),
        config.output_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cost(path: &Path, config: &CostConfig, summary_path: Option<&Path>) -> Result<ExitCode, Error> {
    config.validate()?;
    let trace = ActionTrace::load(path)?;
    let signals = trace_costs(&trace, config)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    write_cost_report(&mut out, &trace, &signals)
        .and_then(|_| out.flush())
        .map_err(stdout_error)?;
    let summary = summarize(&signals);
    eprintln!(
        "steps={} mean_shaking={} total_spins={} mean_combined={}",
        summary.steps, summary.mean_shaking, summary.total_spins, summary.mean_combined
    );
    if let Some(dest) = summary_path {
        let label = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let text = HumanSummary::to_csv(&[HumanSummary::new(label, &summary)]);
        std::fs::write(dest, text).map_err(|e| Error::Io {
            path: dest.to_path_buf(),
            source: e,
        })?;
    }
    Ok(ExitCode::SUCCESS)
}

fn verify() -> Result<ExitCode, Error> {
    let report = harness::run_verify();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    report
        .write_json_lines(&mut out)
        .and_then(|_| out.flush())
        .map_err(stdout_error)?;
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn compare(dir: &Path, human: Option<&Path>, out: Option<&Path>, smooth: usize) -> Result<ExitCode, Error> {
    let logs = harness::load_runlogs(dir)?;
    let humans = match human {
        Some(path) => HumanSummary::load(path)?,
        None => Vec::new(),
    };
    let comparison = harness::compare(&logs, &humans, smooth)?;
    comparison.write(out.unwrap_or(dir))?;
    print!("{}", comparison.summary_csv());
    Ok(ExitCode::SUCCESS)
}

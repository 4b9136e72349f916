use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runlog::{read_runlog, write_file, LoadedRunLog};
use crate::costs::CostSummary;
use crate::error::{Error, Result};
use crate::learner::RunLogRow;

pub const SUMMARY_HEADER: &str = "agent,seeds,terminal_episodes,raw_return,shaking,spins,combined";
pub const SEED_SUMMARY_HEADER: &str = "agent,seed,terminal_episodes,raw_return,shaking,spins,combined";
pub const CURVES_HEADER: &str = "agent,seed,episode,metric,value";
pub const HUMAN_SUMMARY_HEADER: &str = "trace,steps,mean_shaking,total_spins,mean_combined";

/// Means over the last tenth of a run's episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalStats {
    /// Episodes averaged (per seed, for aggregates).
    pub episodes: usize,
    pub raw_return: f64,
    /// Mean per-step shaking cost.
    pub shaking: f64,
    /// Spins per episode.
    pub spins: f64,
    /// Mean per-step combined cost, `shaking + alpha * spins / steps`.
    pub combined: f64,
}

impl TerminalStats {
    /// Length of the terminal window for a run of `episodes` episodes.
    pub fn window(episodes: usize) -> usize {
        episodes.div_ceil(10)
    }

    /// Statistics of the terminal window; `None` for an empty log.
    pub fn from_rows(rows: &[RunLogRow], alpha: f64, episode_steps: usize) -> Option<Self> {
        let tail = &rows[rows.len() - Self::window(rows.len())..];
        if tail.is_empty() {
            return None;
        }
        let n = tail.len() as f64;
        let mean = |f: &dyn Fn(&RunLogRow) -> f64| tail.iter().map(f).sum::<f64>() / n;
        Some(TerminalStats {
            episodes: tail.len(),
            raw_return: mean(&|r| r.raw_return),
            shaking: mean(&|r| r.shaking_mean),
            spins: mean(&|r| r.spin_total as f64),
            combined: mean(&|r| combined_cost(r, alpha, episode_steps)),
        })
    }

    fn mean_of(stats: &[TerminalStats]) -> Option<Self> {
        let n = stats.len() as f64;
        let mean = |f: fn(&TerminalStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
        (!stats.is_empty()).then(|| TerminalStats {
            episodes: stats.iter().map(|s| s.episodes).max().unwrap_or(0),
            raw_return: mean(|s| s.raw_return),
            shaking: mean(|s| s.shaking),
            spins: mean(|s| s.spins),
            combined: mean(|s| s.combined),
        })
    }
}

fn combined_cost(row: &RunLogRow, alpha: f64, episode_steps: usize) -> f64 {
    row.shaking_mean + alpha * row.spin_total as f64 / episode_steps as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub agent: String,
    pub seed: u64,
    pub stats: Option<TerminalStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSummary {
    pub agent: String,
    pub seeds: usize,
    /// Seed-averaged terminal statistics.
    pub stats: Option<TerminalStats>,
}

/// One row of a human cost summary, as written by `cost --summary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanSummary {
    pub trace: String,
    pub steps: usize,
    pub mean_shaking: f64,
    pub total_spins: u64,
    pub mean_combined: f64,
}

impl HumanSummary {
    pub fn new(trace: impl Into<String>, summary: &CostSummary) -> Self {
        HumanSummary {
            trace: trace.into(),
            steps: summary.steps,
            mean_shaking: summary.mean_shaking,
            total_spins: summary.total_spins,
            mean_combined: summary.mean_combined,
        }
    }

    pub fn to_csv(rows: &[HumanSummary]) -> String {
        let mut out = format!("{HUMAN_SUMMARY_HEADER}\n");
        for r in rows {
            writeln!(out, "{},{},{},{},{}", r.trace, r.steps, r.mean_shaking, r.total_spins, r.mean_combined)
                .unwrap();
        }
        out
    }

    pub fn load(path: &Path) -> Result<Vec<HumanSummary>> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: e.to_string(),
        })?;
        let header = reader
            .headers()
            .map(|h| h.iter().collect::<Vec<_>>().join(","))
            .unwrap_or_default();
        if header != HUMAN_SUMMARY_HEADER {
            return Err(Error::Inconsistent(format!(
                "{}: header {header:?} is not {HUMAN_SUMMARY_HEADER:?}",
                path.display()
            )));
        }
        reader
            .deserialize()
            .enumerate()
            .map(|(i, r)| {
                r.map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    reason: e.to_string(),
                })
            })
            .collect()
    }
}

/// Human traces pooled into the same units as [`TerminalStats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanOverlay {
    pub traces: usize,
    pub shaking: f64,
    /// Spins per `episode_steps` steps of play.
    pub spins: f64,
    /// Recomputed with the runs' `alpha`.
    pub combined: f64,
}

impl HumanOverlay {
    fn pool(rows: &[HumanSummary], alpha: f64, episode_steps: usize) -> Option<Self> {
        let steps: usize = rows.iter().map(|r| r.steps).sum();
        if steps == 0 {
            return None;
        }
        let steps = steps as f64;
        let shaking = rows.iter().map(|r| r.mean_shaking * r.steps as f64).sum::<f64>() / steps;
        let spins_per_step = rows.iter().map(|r| r.total_spins as f64).sum::<f64>() / steps;
        Some(HumanOverlay {
            traces: rows.len(),
            shaking,
            spins: spins_per_step * episode_steps as f64,
            combined: shaking + alpha * spins_per_step,
        })
    }
}

/// One point of a smoothed learning curve. `seed = None` is the mean over
/// seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub agent: String,
    pub seed: Option<u64>,
    pub episode: usize,
    pub metric: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub config_hash: String,
    pub seeds: Vec<SeedSummary>,
    pub agents: Vec<AgentSummary>,
    pub human: Option<HumanOverlay>,
    pub curves: Vec<CurvePoint>,
}

/// Reads every `*.runlog.csv` in `dir`.
pub fn load_runlogs(dir: &Path) -> Result<Vec<LoadedRunLog>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.to_string_lossy().ends_with(".runlog.csv") {
            paths.push(path);
        }
    }
    if paths.is_empty() {
        return Err(Error::Inconsistent(format!("no *.runlog.csv files in {}", dir.display())));
    }
    paths.sort();
    paths.iter().map(|p| read_runlog(p)).collect()
}

const METRICS: [&str; 5] = ["raw_return", "shaking", "spins", "combined", "weight"];

fn metric(row: &RunLogRow, name: &str, alpha: f64, episode_steps: usize) -> f64 {
    match name {
        "raw_return" => row.raw_return,
        "shaking" => row.shaking_mean,
        "spins" => row.spin_total as f64,
        "combined" => combined_cost(row, alpha, episode_steps),
        "weight" => row.weight,
        _ => unreachable!("unknown metric {name}"),
    }
}

/// Trailing mean over up to `window` values.
fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Summarizes run logs that all come from one config.
///
/// Input order does not matter. Logs must agree on config hash and appear
/// at most once per (agent, seed), and episodes must be numbered 1, 2, ...
pub fn compare(logs: &[LoadedRunLog], humans: &[HumanSummary], smoothing: usize) -> Result<Comparison> {
    let first = logs
        .first()
        .ok_or_else(|| Error::Inconsistent("no run logs to compare".into()))?;
    if smoothing == 0 {
        return Err(Error::config("smooth", "must be >= 1"));
    }
    let mut by_key: BTreeMap<(&str, u64), &LoadedRunLog> = BTreeMap::new();
    for log in logs {
        let m = &log.meta;
        if m.config_hash != first.meta.config_hash {
            return Err(Error::Inconsistent(format!(
                "{} has config hash {}, but {} has {}",
                log.path.display(),
                m.config_hash,
                first.path.display(),
                first.meta.config_hash
            )));
        }
        if m.alpha.to_bits() != first.meta.alpha.to_bits() || m.episode_steps != first.meta.episode_steps {
            return Err(Error::Inconsistent(format!(
                "{} disagrees with {} on alpha or episode_steps",
                log.path.display(),
                first.path.display()
            )));
        }
        if let Some((i, _)) = log.rows.iter().enumerate().find(|(i, r)| r.episode != i + 1) {
            return Err(Error::Inconsistent(format!(
                "{}: row {} is not episode {}",
                log.path.display(),
                i + 1,
                i + 1
            )));
        }
        if by_key.insert((m.agent.as_str(), m.seed), log).is_some() {
            return Err(Error::Inconsistent(format!("{} seed {} appears twice", m.agent, m.seed)));
        }
    }
    let alpha = first.meta.alpha;
    let steps = first.meta.episode_steps;

    let seeds: Vec<SeedSummary> = by_key
        .iter()
        .map(|(&(agent, seed), log)| SeedSummary {
            agent: agent.to_owned(),
            seed,
            stats: TerminalStats::from_rows(&log.rows, alpha, steps),
        })
        .collect();

    let mut agents = Vec::new();
    let mut curves = Vec::new();
    let mut grouped: BTreeMap<&str, Vec<&LoadedRunLog>> = BTreeMap::new();
    for (&(agent, _), log) in &by_key {
        grouped.entry(agent).or_default().push(log);
    }
    for (agent, runs) in &grouped {
        let stats: Vec<_> = seeds
            .iter()
            .filter(|s| s.agent == *agent)
            .filter_map(|s| s.stats)
            .collect();
        agents.push(AgentSummary {
            agent: (*agent).to_owned(),
            seeds: runs.len(),
            stats: TerminalStats::mean_of(&stats),
        });

        for name in METRICS {
            let per_seed: Vec<Vec<f64>> = runs
                .iter()
                .map(|log| {
                    let raw: Vec<f64> = log.rows.iter().map(|r| metric(r, name, alpha, steps)).collect();
                    smooth(&raw, smoothing)
                })
                .collect();
            for (log, values) in runs.iter().zip(&per_seed) {
                curves.extend(values.iter().enumerate().map(|(i, &value)| CurvePoint {
                    agent: (*agent).to_owned(),
                    seed: Some(log.meta.seed),
                    episode: i + 1,
                    metric: name,
                    value,
                }));
            }
            let common = per_seed.iter().map(Vec::len).min().unwrap_or(0);
            for i in 0..common {
                let value = per_seed.iter().map(|v| v[i]).sum::<f64>() / per_seed.len() as f64;
                curves.push(CurvePoint {
                    agent: (*agent).to_owned(),
                    seed: None,
                    episode: i + 1,
                    metric: name,
                    value,
                });
            }
        }
    }

    let human = HumanOverlay::pool(humans, alpha, steps);
    if let Some(h) = human {
        let last = logs.iter().map(|l| l.rows.len()).max().unwrap_or(0).max(1);
        for episode in [1, last] {
            for (name, value) in [("shaking", h.shaking), ("spins", h.spins), ("combined", h.combined)] {
                curves.push(CurvePoint {
                    agent: "human".into(),
                    seed: None,
                    episode,
                    metric: name,
                    value,
                });
            }
        }
    }

    Ok(Comparison {
        config_hash: first.meta.config_hash.clone(),
        seeds,
        agents,
        human,
        curves,
    })
}

fn stats_fields(stats: Option<TerminalStats>) -> String {
    match stats {
        Some(s) => format!("{},{},{},{},{}", s.episodes, s.raw_return, s.shaking, s.spins, s.combined),
        None => "0,,,,".into(),
    }
}

impl Comparison {
    pub fn summary_csv(&self) -> String {
        let mut out = format!("# config_hash={}\n{SUMMARY_HEADER}\n", self.config_hash);
        for a in &self.agents {
            writeln!(out, "{},{},{}", a.agent, a.seeds, stats_fields(a.stats)).unwrap();
        }
        if let Some(h) = self.human {
            writeln!(out, "human,{},0,,{},{},{}", h.traces, h.shaking, h.spins, h.combined).unwrap();
        }
        out
    }

    pub fn seeds_csv(&self) -> String {
        let mut out = format!("# config_hash={}\n{SEED_SUMMARY_HEADER}\n", self.config_hash);
        for s in &self.seeds {
            writeln!(out, "{},{},{}", s.agent, s.seed, stats_fields(s.stats)).unwrap();
        }
        out
    }

    pub fn curves_csv(&self) -> String {
        let mut out = format!("# config_hash={}\n{CURVES_HEADER}\n", self.config_hash);
        for p in &self.curves {
            let seed = p.seed.map_or_else(|| "mean".to_owned(), |s| s.to_string());
            writeln!(out, "{},{},{},{},{}", p.agent, seed, p.episode, p.metric, p.value).unwrap();
        }
        out
    }

    /// Writes `summary.csv`, `seeds.csv` and `curves.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("summary.csv", self.summary_csv()),
            ("seeds.csv", self.seeds_csv()),
            ("curves.csv", self.curves_csv()),
        ];
        files
            .into_iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                write_file(&path, text.as_bytes()).map(|_| path)
            })
            .collect()
    }
}

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{RunLog, RunLogRow, SoftmaxPolicy};
use crate::schedule::SchedulerSnapshot;

pub const RUNLOG_HEADER: &str =
    "episode,raw_return,adjusted_return,shaking_mean,spin_total,weight,lambda,v_avg,v_th";
pub const SCHEDULER_HEADER: &str = "episode,v_avg,v_max,v_th,lambda,weight";

/// Provenance stamped on the first line of every per-run file, as a
/// `# key=value,...` comment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub agent: String,
    pub seed: u64,
    pub config_hash: String,
    /// Spin weight, needed to rebuild the combined cost from a log.
    pub alpha: f64,
    pub episode_steps: usize,
}

impl RunMeta {
    pub fn comment(&self) -> String {
        format!(
            "# agent={},seed={},config_hash={},alpha={},episode_steps={}",
            self.agent, self.seed, self.config_hash, self.alpha, self.episode_steps
        )
    }

    pub fn parse_comment(line: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason,
        };
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| bad("expected a '# agent=...' provenance line".into()))?;
        let (mut agent, mut seed, mut hash, mut alpha, mut steps) = (None, None, None, None, None);
        for pair in body.trim().split(',') {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed provenance entry {pair:?}")))?;
            let number_err = |_| bad(format!("bad value for {key}: {value:?}"));
            match key {
                "agent" => agent = Some(value.to_owned()),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| number_err(e.to_string()))?),
                "config_hash" => hash = Some(value.to_owned()),
                "alpha" => alpha = Some(value.parse::<f64>().map_err(|e| number_err(e.to_string()))?),
                "episode_steps" => {
                    steps = Some(value.parse::<usize>().map_err(|e| number_err(e.to_string()))?)
                }
                _ => return Err(bad(format!("unknown provenance key {key:?}"))),
            }
        }
        let missing = |k: &str| bad(format!("provenance line lacks {k}"));
        Ok(RunMeta {
            agent: agent.ok_or_else(|| missing("agent"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            config_hash: hash.ok_or_else(|| missing("config_hash"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            episode_steps: steps.ok_or_else(|| missing("episode_steps"))?,
        })
    }

    fn stem(&self) -> String {
        format!("{}_seed{}", self.agent, self.seed)
    }

    pub fn runlog_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.runlog.csv", self.stem()))
    }

    pub fn scheduler_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.scheduler.csv", self.stem()))
    }

    pub fn policy_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.policy", self.stem()))
    }

    pub fn trace_path(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.trace.csv", self.stem()))
    }
}

/// Renders the run log CSV, provenance line included.
pub fn format_runlog(meta: &RunMeta, rows: &[RunLogRow]) -> String {
    let mut out = format!("{}\n{RUNLOG_HEADER}\n", meta.comment());
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.raw_return,
            r.adjusted_return,
            r.shaking_mean,
            r.spin_total,
            r.weight,
            r.lambda,
            r.v_avg,
            r.v_th
        )
        .unwrap();
    }
    out
}

pub fn format_scheduler_log(meta: &RunMeta, snapshots: &[SchedulerSnapshot]) -> String {
    let mut out = format!("{}\n{SCHEDULER_HEADER}\n", meta.comment());
    for (i, s) in snapshots.iter().enumerate() {
        writeln!(out, "{},{},{},{},{},{}", i + 1, s.v_avg, s.v_max, s.v_th, s.lambda, s.weight).unwrap();
    }
    out
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    file.write_all(contents)
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

/// Writes the run log and scheduler log for one run into `dir`.
pub fn write_run_logs(dir: &Path, meta: &RunMeta, log: &RunLog) -> Result<[PathBuf; 2]> {
    let runlog = meta.runlog_path(dir);
    write_file(&runlog, format_runlog(meta, &log.rows).as_bytes())?;
    let scheduler = meta.scheduler_path(dir);
    write_file(&scheduler, format_scheduler_log(meta, &log.scheduler).as_bytes())?;
    Ok([runlog, scheduler])
}

/// A run log read back from disk. `policy_loss` is not persisted and reads
/// as `None`.
#[derive(Debug, Clone)]
pub struct LoadedRunLog {
    pub path: PathBuf,
    pub meta: RunMeta,
    pub rows: Vec<RunLogRow>,
}

#[derive(Deserialize)]
struct CsvRow {
    episode: usize,
    raw_return: f64,
    adjusted_return: f64,
    shaking_mean: f64,
    spin_total: u64,
    weight: f64,
    lambda: f64,
    v_avg: f64,
    v_th: f64,
}

pub fn read_runlog(path: &Path) -> Result<LoadedRunLog> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
    let meta = RunMeta::parse_comment(first.trim_end(), path)?;

    let mut csv = csv::Reader::from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::Inconsistent(format!("{}: {e}", path.display())))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != RUNLOG_HEADER {
        return Err(Error::Inconsistent(format!(
            "{}: header {header:?} is not the run log schema {RUNLOG_HEADER:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in csv.deserialize::<CsvRow>().enumerate() {
        // +3: provenance line, header, 1-based
        let r = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 3,
            reason: e.to_string(),
        })?;
        rows.push(RunLogRow {
            episode: r.episode,
            raw_return: r.raw_return,
            adjusted_return: r.adjusted_return,
            shaking_mean: r.shaking_mean,
            spin_total: r.spin_total,
            weight: r.weight,
            lambda: r.lambda,
            v_avg: r.v_avg,
            v_th: r.v_th,
            policy_loss: None,
        });
    }
    Ok(LoadedRunLog {
        path: path.to_path_buf(),
        meta,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyHeader {
    pub feature_dim: usize,
    pub action_count: usize,
    pub config_hash: String,
}

/// Serializes a policy as a JSON header line followed by a JSON array of
/// its weights, one row of per-action weights per feature.
pub fn format_policy(policy: &SoftmaxPolicy, config_hash: &str) -> String {
    let header = PolicyHeader {
        feature_dim: policy.feature_dim(),
        action_count: policy.action_count(),
        config_hash: config_hash.to_owned(),
    };
    format!(
        "{}\n{}\n",
        serde_json::to_string(&header).expect("header serializes"),
        serde_json::to_string(policy.weights()).expect("finite weights serialize")
    )
}

pub fn read_policy(path: &Path) -> Result<(PolicyHeader, SoftmaxPolicy)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines();
    let header: PolicyHeader = serde_json::from_str(lines.next().unwrap_or_default())
        .map_err(|e| bad(1, e.to_string()))?;
    let weights: Vec<f64> =
        serde_json::from_str(lines.next().unwrap_or_default()).map_err(|e| bad(2, e.to_string()))?;
    let policy = SoftmaxPolicy::from_weights(header.feature_dim, weights)?;
    if policy.action_count() != header.action_count {
        return Err(bad(1, format!("action_count {} is not {}", header.action_count, policy.action_count())));
    }
    Ok((header, policy))
}

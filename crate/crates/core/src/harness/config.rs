use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costs::CostConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::schedule::{SchedulerConfig, SchedulerKind, ThresholdMode};

/// The config schema version this build reads.
pub const CONFIG_VERSION: u32 = 1;

/// Environment variable holding a comma-separated seed list that replaces
/// the config's `seeds`.
pub const SEED_OVERRIDE_VAR: &str = "ABCRL_SEED_OVERRIDE";

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_episodes() -> usize {
    2000
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One trained agent: a file-safe name and its weight scheduler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// Defaults to the scheduler kind's name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
}

impl AgentSpec {
    pub fn new(name: impl Into<String>, scheduler: SchedulerConfig) -> Self {
        AgentSpec {
            name: Some(name.into()),
            scheduler,
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.scheduler.kind.name())
    }
}

/// A complete experiment description, read from TOML.
///
/// ```toml
/// config_version = 1
/// episodes = 2000
/// seeds = [1, 2, 3]
///
/// [cost]
/// w = 8
/// alpha = 1.0
///
/// [[agent]]
/// scheduler = { kind = "baseline" }
///
/// [[agent]]
/// name = "abc"
/// scheduler = { kind = "abc-sigmoid", v_th = { fraction_of_baseline_max = 0.8 } }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub config_version: u32,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(rename = "agent")]
    pub agents: Vec<AgentSpec>,
}

impl RunConfig {
    /// A config with default sections and the given agents.
    pub fn with_agents(agents: Vec<AgentSpec>) -> Self {
        RunConfig {
            config_version: CONFIG_VERSION,
            episodes: default_episodes(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            env: EnvConfig::default(),
            learner: LearnerConfig::default(),
            cost: CostConfig::default(),
            agents,
        }
    }

    /// Parses and validates a config. `origin` only labels diagnostics.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: origin.to_path_buf(),
                line,
                reason: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(Error::config(
                "config_version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.config_version),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must list at least one seed"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("agent", "at least one [[agent]] is required"));
        }
        self.env.validate()?;
        self.learner.validate()?;
        self.cost.validate()?;
        if self.cost.step_angle != self.env.step_angle() {
            return Err(Error::config(
                "cost.step_angle",
                format!(
                    "{} does not match env.heading_steps = {} ({} degrees per turn)",
                    self.cost.step_angle,
                    self.env.heading_steps,
                    self.env.step_angle()
                ),
            ));
        }

        let mut names = HashSet::new();
        let has_baseline = self
            .agents
            .iter()
            .any(|a| a.scheduler.kind == SchedulerKind::Baseline);
        for (i, agent) in self.agents.iter().enumerate() {
            let field = |f: &str| format!("agent[{i}].{f}");
            let name = agent.label();
            let file_safe = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !file_safe {
                return Err(Error::config(
                    field("name"),
                    format!("{name:?} must be non-empty ASCII letters, digits, '-' or '_'"),
                ));
            }
            if !names.insert(name) {
                return Err(Error::config(field("name"), format!("duplicate agent {name:?}")));
            }
            agent
                .scheduler
                .validate()
                .map_err(|e| prefix_field(e, &field("")))?;
            if matches!(agent.scheduler.v_th, ThresholdMode::FractionOfBaselineMax(_))
                && agent.scheduler.kind != SchedulerKind::Baseline
                && !has_baseline
            {
                return Err(Error::config(
                    field("scheduler.v_th"),
                    "fraction_of_baseline_max needs an agent with kind = \"baseline\"",
                ));
            }
        }
        Ok(())
    }

    /// Applies [`SEED_OVERRIDE_VAR`] if it is set to a non-empty value.
    pub fn apply_seed_override(&mut self) -> Result<()> {
        match std::env::var(SEED_OVERRIDE_VAR) {
            Ok(value) if !value.trim().is_empty() => {
                self.seeds = parse_seed_list(&value)?;
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Hex SHA-256 of the fully resolved config, ignoring `seeds` and
    /// `output_dir` so that runs of one experiment under different seeds or
    /// directories can be compared.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            seeds: Vec::new(),
            output_dir: PathBuf::new(),
            ..self.clone()
        };
        let text = toml::to_string(&canonical).expect("run configs always serialize");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

/// Parses `"1, 2,3"` into seeds.
pub fn parse_seed_list(value: &str) -> Result<Vec<u64>> {
    let seeds = value
        .split(',')
        .map(|s| {
            s.trim().parse::<u64>().map_err(|_| {
                Error::config(SEED_OVERRIDE_VAR, format!("{s:?} is not a non-negative integer"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::config(SEED_OVERRIDE_VAR, "no seeds given"));
    }
    Ok(seeds)
}

fn prefix_field(err: Error, prefix: &str) -> Error {
    match err {
        Error::Config { field, reason } => Error::Config {
            field: format!("{prefix}{}", field.trim_start_matches("scheduler.").to_owned())
                .replace("].", "].scheduler."),
            reason,
        },
        other => other,
    }
}

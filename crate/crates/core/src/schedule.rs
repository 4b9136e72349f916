//! Episode-level schedulers for the behavioral weight `Lambda`.
//!
//! Each training episode starts by asking the scheduler for the weight that
//! scales costs into the reward (`r' = r - Lambda * C`) and ends by reporting
//! the episode's raw return. Four variants are supported:
//!
//! * `Baseline`: `Lambda = 0`, costs are ignored.
//! * `Const`: `Lambda = 1`.
//! * `AbcSigmoid`: `Lambda = W * sigmoid((V_avg - V_th) / h)`.
//! * `AbCpo`: `Lambda = 1 / max(delta, lambda + mu * (V_th - V_avg))`, with
//!   the multiplier `lambda` updated after each episode while the policy is
//!   stable.
//!
//! `V_avg` is the mean raw return of the last `k` episodes and stands in for
//! the value of the current policy.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lagrangian::{lambda_update, penalty_weight, sigmoid_weight, LagrangianParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    Baseline,
    Const,
    #[serde(alias = "abc-rl")]
    AbcSigmoid,
    AbCpo,
}

impl SchedulerKind {
    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::Baseline => "baseline",
            SchedulerKind::Const => "const",
            SchedulerKind::AbcSigmoid => "abc-sigmoid",
            SchedulerKind::AbCpo => "ab-cpo",
        }
    }
}

/// How the return threshold `V_th` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed(f64),
    /// A fraction of the running maximum of `V_avg` during this run.
    FractionOfMax(f64),
    /// A fraction of the maximum `V_avg` reached by an unconstrained run.
    /// Must be resolved to `Fixed` by whoever has that run.
    FractionOfBaselineMax(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerConfig {
    pub kind: SchedulerKind,
    /// Maximum sigmoid weight `W`.
    pub max_weight: f64,
    /// Sigmoid slope `h`; `None` derives `0.1 * |V_th|`.
    pub slope: Option<f64>,
    pub mu: f64,
    pub lambda0: f64,
    pub delta: f64,
    pub v_th: ThresholdMode,
    /// AB-CPO updates `lambda` only when the update's mean policy loss is
    /// below this.
    pub stability_loss_threshold: f64,
    /// Number of recent episodes averaged into `V_avg`.
    pub history: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            kind: SchedulerKind::AbcSigmoid,
            max_weight: 1.0,
            slope: None,
            mu: 0.03,
            lambda0: 1.0,
            delta: crate::lagrangian::DEFAULT_DELTA,
            v_th: ThresholdMode::FractionOfMax(0.8),
            stability_loss_threshold: 0.05,
            history: 10,
        }
    }
}

impl SchedulerConfig {
    pub fn of_kind(kind: SchedulerKind) -> Self {
        SchedulerConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be > 0, got {v}")))
            }
        };
        if !(self.max_weight >= 0.0 && self.max_weight.is_finite()) {
            return Err(Error::config(
                "scheduler.max_weight",
                format!("must be finite and >= 0, got {}", self.max_weight),
            ));
        }
        if let Some(h) = self.slope {
            positive(h, "scheduler.slope")?;
        }
        positive(self.mu, "scheduler.mu")?;
        positive(self.delta, "scheduler.delta")?;
        if !(self.lambda0 >= 0.0 && self.lambda0.is_finite()) {
            return Err(Error::config(
                "scheduler.lambda0",
                format!("must be finite and >= 0, got {}", self.lambda0),
            ));
        }
        if self.history == 0 {
            return Err(Error::config("scheduler.history", "must be >= 1"));
        }
        match self.v_th {
            ThresholdMode::Fixed(v) if v.is_nan() => {
                return Err(Error::config("scheduler.v_th.fixed", "must not be NaN"))
            }
            ThresholdMode::FractionOfMax(f) | ThresholdMode::FractionOfBaselineMax(f)
                if !(f > 0.0 && f <= 1.0) =>
            {
                return Err(Error::config(
                    "scheduler.v_th",
                    format!("fraction must be in (0, 1], got {f}"),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Rolling mean of the most recent episode returns, plus its running maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTracker {
    capacity: usize,
    recent: VecDeque<f64>,
    v_max: f64,
    episodes_seen: u64,
}

impl ValueTracker {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "value tracker needs capacity >= 1");
        ValueTracker {
            capacity,
            recent: VecDeque::with_capacity(capacity),
            v_max: f64::NEG_INFINITY,
            episodes_seen: 0,
        }
    }

    pub fn push(&mut self, episode_return: f64) {
        if self.recent.len() == self.capacity {
            self.recent.pop_front();
        }
        self.recent.push_back(episode_return);
        self.episodes_seen += 1;
        if let Some(avg) = self.v_avg() {
            self.v_max = self.v_max.max(avg);
        }
    }

    /// Mean over the last `min(k, episodes_seen)` returns.
    pub fn v_avg(&self) -> Option<f64> {
        if self.recent.is_empty() {
            None
        } else {
            Some(self.recent.iter().sum::<f64>() / self.recent.len() as f64)
        }
    }

    /// Largest `V_avg` observed so far; `-inf` before the first episode.
    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn episodes_seen(&self) -> u64 {
        self.episodes_seen
    }
}

/// Per-episode view of the scheduler, as logged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerSnapshot {
    pub v_avg: f64,
    pub v_max: f64,
    pub v_th: f64,
    pub lambda: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    config: SchedulerConfig,
    tracker: ValueTracker,
    v_th: f64,
    lambda: f64,
    last_weight: f64,
}

impl SchedulerState {
    pub fn new(config: SchedulerConfig) -> Result<Self> {
        config.validate()?;
        let v_th = match (config.kind, config.v_th) {
            (SchedulerKind::Baseline, _) => f64::INFINITY,
            (_, ThresholdMode::Fixed(v)) => v,
            (_, ThresholdMode::FractionOfMax(_)) => f64::INFINITY,
            (_, ThresholdMode::FractionOfBaselineMax(_)) => {
                return Err(Error::config(
                    "scheduler.v_th",
                    "fraction_of_baseline_max needs a baseline run to resolve against",
                ))
            }
        };
        let lambda = match config.kind {
            SchedulerKind::AbCpo => config.lambda0,
            _ => 0.0,
        };
        let last_weight = match config.kind {
            SchedulerKind::Const => 1.0,
            _ => 0.0,
        };
        Ok(SchedulerState {
            tracker: ValueTracker::new(config.history),
            config,
            v_th,
            lambda,
            last_weight,
        })
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.config
    }

    pub fn tracker(&self) -> &ValueTracker {
        &self.tracker
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }

    pub fn last_weight(&self) -> f64 {
        self.last_weight
    }

    /// The sigmoid slope in effect for the current threshold.
    pub fn slope(&self) -> f64 {
        self.config.slope.unwrap_or_else(|| {
            let h = 0.1 * self.v_th.abs();
            if h > 0.0 && h.is_finite() {
                h
            } else {
                1.0
            }
        })
    }

    /// Weight `Lambda` to apply to costs throughout the coming episode.
    pub fn begin_episode(&mut self) -> f64 {
        let v_avg = self.tracker.v_avg();
        let weight = match self.config.kind {
            SchedulerKind::Baseline => 0.0,
            SchedulerKind::Const => 1.0,
            SchedulerKind::AbcSigmoid => match v_avg {
                None => 0.0,
                Some(v) => sigmoid_weight(self.config.max_weight, self.slope(), v, self.v_th),
            },
            SchedulerKind::AbCpo => match v_avg {
                // With no history the estimate equals the threshold.
                None => 1.0 / self.lambda.max(self.config.delta),
                Some(v) => {
                    let params = LagrangianParams {
                        lambda: self.lambda,
                        mu: self.config.mu,
                        v_th: self.v_th,
                        delta: self.config.delta,
                    };
                    penalty_weight(&params, v)
                }
            },
        };
        self.last_weight = weight;
        weight
    }

    /// Records a finished episode's raw (unadjusted) discounted return.
    ///
    /// `mean_policy_loss` gates the multiplier update; pass NaN or infinity
    /// when no policy update happened.
    pub fn end_episode(&mut self, episode_return: f64, mean_policy_loss: f64) {
        self.tracker.push(episode_return);
        if self.config.kind == SchedulerKind::Baseline {
            return;
        }
        if let ThresholdMode::FractionOfMax(fraction) = self.config.v_th {
            self.v_th = fraction * self.tracker.v_max();
        }
        if self.config.kind == SchedulerKind::AbCpo
            && mean_policy_loss < self.config.stability_loss_threshold
        {
            if let Some(v_avg) = self.tracker.v_avg() {
                self.lambda = lambda_update(self.lambda, self.config.mu, self.v_th, v_avg);
            }
        }
    }

    pub fn snapshot(&self) -> SchedulerSnapshot {
        SchedulerSnapshot {
            v_avg: self.tracker.v_avg().unwrap_or(f64::NAN),
            v_max: self.tracker.v_max(),
            v_th: self.v_th,
            lambda: self.lambda,
            weight: self.last_weight,
        }
    }
}

//! Policy-gradient learner with a clipped likelihood-ratio update.
//!
//! Rewards are adjusted by the episode's behavioral weight before any
//! learning happens (`r' = r - Lambda * C`), so the update itself is an
//! ordinary clipped policy-gradient step on adjusted returns-to-go. The
//! clip keeps consecutive policies close, which is what lets the weight be
//! computed from the previous policy's value.

mod policy;
mod train;

use serde::{Deserialize, Serialize};

pub use policy::SoftmaxPolicy;
pub use train::{run_training, RunLog, RunLogRow, TrainingRun};

use crate::action::JointAction;
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::costs::ActionTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub gamma: f64,
    /// Episodes collected per update.
    pub batch_episodes: usize,
    /// Gradient steps per batch.
    pub epochs: usize,
    /// Divide advantages by their batch standard deviation.
    pub normalize_advantages: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            learning_rate: 2.0,
            clip_epsilon: 0.2,
            gamma: 0.99,
            batch_episodes: 4,
            epochs: 4,
            normalize_advantages: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learner.learning_rate", "must be finite and > 0"));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(Error::config("learner.clip_epsilon", "must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("learner.gamma", "must be in (0, 1]"));
        }
        if self.batch_episodes == 0 {
            return Err(Error::config("learner.batch_episodes", "must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("learner.epochs", "must be >= 1"));
        }
        Ok(())
    }
}

/// `raw - weight * cost`.
pub fn adjust_reward(raw: f64, weight: f64, cost: f64) -> f64 {
    raw - weight * cost
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub features: Observation,
    pub action: JointAction,
    pub raw_reward: f64,
    pub cost: f64,
    pub adjusted_reward: f64,
    /// Log-probability of `action` under the policy that collected it.
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// The behavioral weight used throughout the episode.
    pub weight: f64,
    /// Discounted sum of raw rewards.
    pub raw_return: f64,
    pub adjusted_return: f64,
    /// Mean per-step shaking cost.
    pub shaking_mean: f64,
    pub spin_total: u64,
}

impl Trajectory {
    /// Builds a trajectory, computing the discounted returns.
    pub fn new(transitions: Vec<Transition>, weight: f64, gamma: f64, shaking_mean: f64, spin_total: u64) -> Self {
        let raw_return = discounted(transitions.iter().map(|t| t.raw_reward), gamma);
        let adjusted_return = discounted(transitions.iter().map(|t| t.adjusted_reward), gamma);
        Trajectory {
            transitions,
            weight,
            raw_return,
            adjusted_return,
            shaking_mean,
            spin_total,
        }
    }

    /// The episode's actions in trace form.
    pub fn to_trace(&self) -> ActionTrace {
        ActionTrace::from_actions(self.transitions.iter().map(|t| (t.action.mv, t.action.rotate)))
    }
}

fn discounted(rewards: impl DoubleEndedIterator<Item = f64>, gamma: f64) -> f64 {
    rewards.rev().fold(0.0, |acc, r| r + gamma * acc)
}

/// One (state, action) pair with its advantage, ready for the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
}

/// Flattens a batch into samples: adjusted discounted returns-to-go minus
/// their batch mean, optionally scaled to unit variance.
pub fn batch_samples(batch: &[Trajectory], config: &LearnerConfig) -> Vec<Sample> {
    let mut samples = Vec::with_capacity(batch.iter().map(|t| t.transitions.len()).sum());
    for trajectory in batch {
        let mut to_go = vec![0.0; trajectory.transitions.len()];
        let mut acc = 0.0;
        for (g, t) in to_go.iter_mut().zip(&trajectory.transitions).rev() {
            acc = t.adjusted_reward + config.gamma * acc;
            *g = acc;
        }
        samples.extend(trajectory.transitions.iter().zip(to_go).map(|(t, g)| Sample {
            features: t.features.0.clone(),
            action: t.action.index(),
            old_log_prob: t.log_prob,
            advantage: g,
        }));
    }
    if samples.is_empty() {
        return samples;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
    let scale = if config.normalize_advantages {
        let var = samples.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 1e-8 {
            1.0 / std
        } else {
            1.0
        }
    } else {
        1.0
    };
    for s in &mut samples {
        s.advantage = (s.advantage - mean) * scale;
    }
    samples
}

/// Mean surrogate `min(r A, clip(r, 1 - eps, 1 + eps) A)` over the samples,
/// where `r` is the probability ratio against the collecting policy.
/// With `clip = None` the plain `r A` is averaged.
pub fn surrogate(policy: &SoftmaxPolicy, samples: &[Sample], clip: Option<f64>) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let ratio = (policy.log_prob(&s.features, s.action)? - s.old_log_prob).exp();
        total += clipped_term(ratio, s.advantage, clip).0;
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Returns the surrogate term and whether its gradient flows through `r`.
fn clipped_term(ratio: f64, advantage: f64, clip: Option<f64>) -> (f64, bool) {
    let plain = ratio * advantage;
    match clip {
        None => (plain, true),
        Some(eps) => {
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
            // NaN stays on the gradient path so it is reported, not dropped.
            if plain > clipped {
                (clipped, false)
            } else {
                (plain, true)
            }
        }
    }
}

/// Analytic gradient of [`surrogate`] with respect to the policy weights.
///
/// For a linear softmax, `d log pi(a|x) / dW[f, b] = x_f (1[b = a] - pi(b|x))`
/// and `dr = r d log pi`.
pub fn surrogate_gradient(
    policy: &SoftmaxPolicy,
    samples: &[Sample],
    clip: Option<f64>,
) -> Result<Vec<f64>> {
    let actions = policy.action_count();
    let mut grad = vec![0.0; policy.weights().len()];
    for s in samples {
        let probs = policy.probabilities(&s.features)?;
        let ratio = (probs[s.action].ln() - s.old_log_prob).exp();
        let (_, active) = clipped_term(ratio, s.advantage, clip);
        if !active {
            continue;
        }
        let coef = s.advantage * ratio;
        for (x, row) in s.features.iter().zip(grad.chunks_exact_mut(actions)) {
            if *x == 0.0 {
                continue;
            }
            for (b, g) in row.iter_mut().enumerate() {
                let indicator = if b == s.action { 1.0 } else { 0.0 };
                *g += coef * x * (indicator - probs[b]);
            }
        }
    }
    let n = samples.len().max(1) as f64;
    for g in &mut grad {
        *g /= n;
    }
    Ok(grad)
}

/// One clipped policy-gradient update on a batch of trajectories.
///
/// Returns the magnitude of the clipped surrogate at the updated weights,
/// which is near zero once updates stop finding improvement.
pub fn update(
    policy: &mut SoftmaxPolicy,
    batch: &[Trajectory],
    config: &LearnerConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Precondition("update needs a non-empty batch".into()));
    }
    let samples = batch_samples(batch, config);
    if samples.is_empty() {
        return Ok(0.0);
    }
    for _ in 0..config.epochs {
        let grad = surrogate_gradient(policy, &samples, Some(config.clip_epsilon))?;
        if let Some(bad) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite policy gradient at weight {bad}"
            )));
        }
        for (w, g) in policy.weights_mut().iter_mut().zip(&grad) {
            *w += config.learning_rate * g;
        }
    }
    Ok(surrogate(policy, &samples, Some(config.clip_epsilon))?.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{HorizontalAction, Move};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn transition(features: Vec<f64>, action: usize, reward: f64, log_prob: f64) -> Transition {
        Transition {
            features: Observation(features),
            action: JointAction::from_index(action),
            raw_reward: reward,
            cost: 0.0,
            adjusted_reward: reward,
            log_prob,
        }
    }

    #[test]
    fn adjust_reward_examples() {
        assert_eq!(adjust_reward(1.0, 0.0, 123.0), 1.0);
        assert!((adjust_reward(1.0, 1.0, 3.0 / 7.0) - 4.0 / 7.0).abs() < 1e-15);
        assert!((adjust_reward(0.0, 0.5, 11.0 / 7.0) + 11.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn discounted_returns() {
        let ts = vec![
            transition(vec![1.0], 0, 1.0, 0.0),
            transition(vec![1.0], 0, 0.0, 0.0),
            transition(vec![1.0], 0, 2.0, 0.0),
        ];
        let t = Trajectory::new(ts, 0.0, 0.5, 0.0, 0);
        assert_eq!(t.raw_return, 1.0 + 0.25 * 2.0);
    }

    #[test]
    fn zero_advantages_leave_params_unchanged() {
        let lp = (1.0f64 / 9.0).ln();
        let batch: Vec<Trajectory> = (0..3)
            .map(|i| {
                Trajectory::new(
                    vec![transition(vec![1.0, 0.5], i, 0.0, lp), transition(vec![1.0, 0.2], i + 3, 0.0, lp)],
                    0.0,
                    0.9,
                    0.0,
                    0,
                )
            })
            .collect();
        let mut policy = SoftmaxPolicy::zeros(2);
        let before = policy.clone();
        let loss = update(&mut policy, &batch, &LearnerConfig::default()).unwrap();
        assert_eq!(policy, before);
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn bandit_update_favors_rewarding_action() {
        // one state, nine arms; arm 5 pays 1
        let mut policy = SoftmaxPolicy::zeros(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let config = LearnerConfig { gamma: 1.0, ..LearnerConfig::default() };
        let before = policy.probabilities(&[1.0]).unwrap()[5];
        let batch: Vec<Trajectory> = (0..4)
            .map(|_| {
                let ts = (0..50)
                    .map(|_| {
                        let (a, lp) = policy.select_action(&[1.0], &mut rng).unwrap();
                        let r = if a.index() == 5 { 1.0 } else { 0.0 };
                        transition(vec![1.0], a.index(), r, lp)
                    })
                    .collect();
                Trajectory::new(ts, 0.0, 1.0, 0.0, 0)
            })
            .collect();
        update(&mut policy, &batch, &config).unwrap();
        let after = policy.probabilities(&[1.0]).unwrap()[5];
        assert!(after > before, "{before} -> {after}");
    }

    #[test]
    fn clipped_ratio_blocks_gradient() {
        let policy = SoftmaxPolicy::zeros(1);
        let eps: f64 = 0.2;
        let current = policy.log_prob(&[1.0], 2).unwrap();
        // ratio = 1 + 2 eps relative to the collecting policy
        let sample = Sample {
            features: vec![1.0],
            action: 2,
            old_log_prob: current - (1.0 + 2.0 * eps).ln(),
            advantage: 1.0,
        };
        let g = surrogate_gradient(&policy, &[sample.clone()], Some(eps)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = surrogate_gradient(&policy, &[sample], None).unwrap();
        assert!(g.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn empty_batch_is_rejected() {
        let mut p = SoftmaxPolicy::zeros(1);
        assert!(update(&mut p, &[], &LearnerConfig::default()).is_err());
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut p = SoftmaxPolicy::zeros(1);
        let batch = vec![
            Trajectory::new(vec![transition(vec![1.0], 0, f64::NAN, 0.0)], 0.0, 1.0, 0.0, 0),
            Trajectory::new(vec![transition(vec![1.0], 1, 1.0, 0.0)], 0.0, 1.0, 0.0, 0),
        ];
        let config = LearnerConfig { normalize_advantages: false, ..LearnerConfig::default() };
        assert!(matches!(update(&mut p, &batch, &config), Err(Error::Numerical(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..20 {
            let dim = rng.gen_range(1..5);
            let weights: Vec<f64> = (0..dim * 9).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let policy = SoftmaxPolicy::from_weights(dim, weights).unwrap();
            let samples: Vec<Sample> = (0..rng.gen_range(1..8))
                .map(|_| Sample {
                    features: (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect(),
                    action: rng.gen_range(0..9),
                    old_log_prob: rng.gen_range(-3.0..-1.0),
                    advantage: rng.gen_range(-2.0..2.0),
                })
                .collect();
            let analytic = surrogate_gradient(&policy, &samples, None).unwrap();
            let h = 1e-5;
            for i in 0..policy.weights().len() {
                let mut plus = policy.clone();
                plus.weights_mut()[i] += h;
                let mut minus = policy.clone();
                minus.weights_mut()[i] -= h;
                let fd = (surrogate(&plus, &samples, None).unwrap()
                    - surrogate(&minus, &samples, None).unwrap())
                    / (2.0 * h);
                let scale = analytic[i].abs().max(fd.abs()).max(1e-6);
                assert!((analytic[i] - fd).abs() / scale < 1e-4, "{} vs {fd}", analytic[i]);
            }
        }
    }

    #[test]
    fn trajectory_exports_trace() {
        let ts = vec![Transition {
            features: Observation(vec![1.0]),
            action: JointAction::new(Move::Backward, HorizontalAction::TurnLeft),
            raw_reward: 0.0,
            cost: 0.0,
            adjusted_reward: 0.0,
            log_prob: 0.0,
        }];
        let trace = Trajectory::new(ts, 0.0, 1.0, 0.0, 0).to_trace();
        assert_eq!(trace.steps[0].mv, Move::Backward);
        assert_eq!(trace.steps[0].rotate, HorizontalAction::TurnLeft);
    }
}

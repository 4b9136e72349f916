use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adjust_reward, update, LearnerConfig, SoftmaxPolicy, Trajectory, Transition};
use crate::costs::{CostConfig, CostDetector};
use crate::env::{CollectorEnv, EnvConfig};
use crate::error::{Error, Result};
use crate::schedule::{SchedulerConfig, SchedulerSnapshot, SchedulerState};

/// One row of the per-episode training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLogRow {
    pub episode: usize,
    pub raw_return: f64,
    pub adjusted_return: f64,
    pub shaking_mean: f64,
    pub spin_total: u64,
    pub weight: f64,
    pub lambda: f64,
    pub v_avg: f64,
    pub v_th: f64,
    /// Loss of the policy update made after this episode, if one was.
    pub policy_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<RunLogRow>,
    /// Scheduler state after each episode.
    pub scheduler: Vec<SchedulerSnapshot>,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub log: RunLog,
    pub policy: SoftmaxPolicy,
    /// The final episode, kept for trace export.
    pub last_episode: Option<Trajectory>,
}

/// SplitMix64 finalizer, used to derive independent per-episode seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains a fresh policy for `episodes` episodes.
///
/// Each episode: ask the scheduler for `Lambda`, roll out with streaming
/// cost detectors and adjusted rewards, update the policy once a batch is
/// full, then report the raw return (and that update's loss, if one
/// happened) back to the scheduler. Everything is determined by the configs and `seed`.
pub fn run_training(
    env_config: &EnvConfig,
    scheduler_config: &SchedulerConfig,
    learner_config: &LearnerConfig,
    cost_config: &CostConfig,
    episodes: usize,
    seed: u64,
) -> Result<TrainingRun> {
    env_config.validate()?;
    learner_config.validate()?;
    cost_config.validate()?;
    if cost_config.step_angle != env_config.step_angle() {
        return Err(Error::config(
            "cost.step_angle",
            format!(
                "{} degrees does not match the environment's {} headings ({} degrees)",
                cost_config.step_angle,
                env_config.heading_steps,
                env_config.step_angle()
            ),
        ));
    }
    let mut scheduler = SchedulerState::new(scheduler_config.clone())?;
    let mut policy = SoftmaxPolicy::zeros(env_config.feature_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ 0x5EED_0F_AC710A));
    let mut detector = CostDetector::new(cost_config)?;

    let mut log = RunLog::default();
    let mut batch: Vec<Trajectory> = Vec::with_capacity(learner_config.batch_episodes);
    let mut last_episode = None;

    for episode in 0..episodes {
        let weight = scheduler.begin_episode();
        let episode_env = EnvConfig {
            seed: mix(env_config.seed ^ mix(seed).wrapping_add(episode as u64)),
            ..env_config.clone()
        };
        let (mut env, mut obs) = CollectorEnv::reset(episode_env)?;
        detector.reset();

        let mut transitions = Vec::with_capacity(env_config.episode_steps);
        let mut shaking_total = 0.0;
        let mut spin_total = 0u64;
        loop {
            let (action, log_prob) = policy.select_action(obs.features(), &mut rng)?;
            let outcome = env.step(action)?;
            let cost = detector.step(action.mv, outcome.rotation);
            shaking_total += cost.shaking.value();
            spin_total += u64::from(cost.spinning);
            transitions.push(Transition {
                features: obs,
                action,
                raw_reward: outcome.reward,
                cost: cost.combined,
                adjusted_reward: adjust_reward(outcome.reward, weight, cost.combined),
                log_prob,
            });
            obs = outcome.observation;
            if outcome.done {
                break;
            }
        }
        let steps = transitions.len();
        let trajectory = Trajectory::new(
            transitions,
            weight,
            learner_config.gamma,
            shaking_total / steps as f64,
            spin_total,
        );
        let row_stats = (
            trajectory.raw_return,
            trajectory.adjusted_return,
            trajectory.shaking_mean,
        );
        let finishing = episode + 1 == episodes;
        batch.push(trajectory);
        // Episodes that close no batch carry no loss, so the stability gate
        // stays shut for them.
        let mut policy_loss = None;
        if batch.len() == learner_config.batch_episodes || finishing {
            policy_loss = Some(update(&mut policy, &batch, learner_config)?);
            let done = std::mem::take(&mut batch);
            if finishing {
                last_episode = done.into_iter().last();
            }
        }

        scheduler.end_episode(row_stats.0, policy_loss.unwrap_or(f64::INFINITY));
        let snap = scheduler.snapshot();
        log.rows.push(RunLogRow {
            episode: episode + 1,
            raw_return: row_stats.0,
            adjusted_return: row_stats.1,
            shaking_mean: row_stats.2,
            spin_total,
            weight,
            lambda: snap.lambda,
            v_avg: snap.v_avg,
            v_th: snap.v_th,
            policy_loss,
        });
        log.scheduler.push(snap);
    }

    Ok(TrainingRun {
        log,
        policy,
        last_episode,
    })
}

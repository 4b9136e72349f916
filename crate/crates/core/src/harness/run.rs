use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::RunConfig;
use super::runlog::{format_policy, write_file, write_run_logs, RunMeta};
use crate::error::{Error, Result};
use crate::learner::{run_training, TrainingRun};
use crate::schedule::{SchedulerConfig, SchedulerKind, ThresholdMode};

/// One trained (agent, seed) pair.
#[derive(Debug, Clone)]
pub struct AgentRun {
    pub meta: RunMeta,
    /// The scheduler actually used, with any baseline-relative threshold
    /// resolved to a fixed value.
    pub scheduler: SchedulerConfig,
    pub run: TrainingRun,
}

/// Trains every agent under every seed.
///
/// Seeds run in parallel. Within a seed, the first baseline agent runs
/// first whenever some agent sets `v_th` relative to it; the remaining
/// agents then run in parallel. Results come back seed-major in config
/// order and do not depend on thread scheduling.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<AgentRun>> {
    config.validate()?;
    let hash = config.hash();
    let per_seed: Vec<Vec<AgentRun>> = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, &hash, seed))
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

fn run_seed(config: &RunConfig, hash: &str, seed: u64) -> Result<Vec<AgentRun>> {
    let train_one = |index: usize, scheduler: SchedulerConfig| -> Result<AgentRun> {
        let run = run_training(
            &config.env,
            &scheduler,
            &config.learner,
            &config.cost,
            config.episodes,
            seed,
        )?;
        Ok(AgentRun {
            meta: RunMeta {
                agent: config.agents[index].label().to_owned(),
                seed,
                config_hash: hash.to_owned(),
                alpha: config.cost.alpha,
                episode_steps: config.env.episode_steps,
            },
            scheduler,
            run,
        })
    };

    let needs_reference = config.agents.iter().any(|a| {
        a.scheduler.kind != SchedulerKind::Baseline
            && matches!(a.scheduler.v_th, ThresholdMode::FractionOfBaselineMax(_))
    });
    let reference = if needs_reference {
        let index = config
            .agents
            .iter()
            .position(|a| a.scheduler.kind == SchedulerKind::Baseline)
            .ok_or_else(|| Error::config("agent", "no baseline agent to take V_max from"))?;
        Some((index, train_one(index, config.agents[index].scheduler.clone())?))
    } else {
        None
    };
    // Best smoothed return the unconstrained agent reached; with no
    // episodes there is none and the threshold is unreachable.
    let v_max = reference
        .as_ref()
        .and_then(|(_, r)| r.run.log.scheduler.last())
        .map_or(f64::INFINITY, |s| s.v_max);

    let mut runs: Vec<Option<AgentRun>> = (0..config.agents.len())
        .into_par_iter()
        .map(|i| {
            if reference.as_ref().is_some_and(|(index, _)| *index == i) {
                return Ok(None);
            }
            let mut scheduler = config.agents[i].scheduler.clone();
            if let ThresholdMode::FractionOfBaselineMax(f) = scheduler.v_th {
                if scheduler.kind != SchedulerKind::Baseline {
                    scheduler.v_th = ThresholdMode::Fixed(f * v_max);
                }
            }
            train_one(i, scheduler).map(Some)
        })
        .collect::<Result<_>>()?;
    if let Some((index, run)) = reference {
        runs[index] = Some(run);
    }
    Ok(runs.into_iter().map(|r| r.expect("every agent ran")).collect())
}

/// Writes the run log, scheduler log, final policy and final-episode trace
/// of each run into `dir`, creating it if needed. Returns the paths written.
pub fn write_outputs(dir: &Path, runs: &[AgentRun]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(runs.len() * 4);
    for r in runs {
        written.extend(write_run_logs(dir, &r.meta, &r.run.log)?);
        let policy = r.meta.policy_path(dir);
        write_file(&policy, format_policy(&r.run.policy, &r.meta.config_hash).as_bytes())?;
        written.push(policy);
        if let Some(last) = &r.run.last_episode {
            let path = r.meta.trace_path(dir);
            let mut bytes = Vec::new();
            last.to_trace().write(&mut bytes).map_err(|e| Error::io(&path, e))?;
            write_file(&path, &bytes)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Runs the experiment and writes its outputs under `config.output_dir`.
pub fn train(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let runs = run_experiment(config)?;
    write_outputs(&config.output_dir, &runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvConfig;
    use crate::harness::config::AgentSpec;

    fn tiny(agents: Vec<AgentSpec>) -> RunConfig {
        RunConfig {
            episodes: 6,
            seeds: vec![1, 2],
            env: EnvConfig {
                episode_steps: 40,
                ..EnvConfig::default()
            },
            ..RunConfig::with_agents(agents)
        }
    }

    fn four_agents() -> Vec<AgentSpec> {
        let relative = |kind| SchedulerConfig {
            kind,
            v_th: ThresholdMode::FractionOfBaselineMax(0.8),
            ..SchedulerConfig::default()
        };
        vec![
            AgentSpec::new("abc", relative(SchedulerKind::AbcSigmoid)),
            AgentSpec::new("baseline", SchedulerConfig::of_kind(SchedulerKind::Baseline)),
            AgentSpec::new("const", SchedulerConfig::of_kind(SchedulerKind::Const)),
            AgentSpec::new("cpo", relative(SchedulerKind::AbCpo)),
        ]
    }

    #[test]
    fn runs_are_seed_major_in_config_order() {
        let runs = run_experiment(&tiny(four_agents())).unwrap();
        let order: Vec<_> = runs.iter().map(|r| (r.meta.agent.as_str(), r.meta.seed)).collect();
        assert_eq!(
            order,
            [
                ("abc", 1),
                ("baseline", 1),
                ("const", 1),
                ("cpo", 1),
                ("abc", 2),
                ("baseline", 2),
                ("const", 2),
                ("cpo", 2)
            ]
        );
    }

    #[test]
    fn relative_threshold_uses_same_seed_baseline() {
        let runs = run_experiment(&tiny(four_agents())).unwrap();
        for seed in [1, 2] {
            let of = |name: &str| runs.iter().find(|r| r.meta.agent == name && r.meta.seed == seed).unwrap();
            let v_max = of("baseline").run.log.scheduler.last().unwrap().v_max;
            for name in ["abc", "cpo"] {
                let run = of(name);
                assert_eq!(run.scheduler.v_th, ThresholdMode::Fixed(0.8 * v_max));
                assert!(run.run.log.rows.iter().all(|r| r.v_th == 0.8 * v_max));
            }
        }
    }

    #[test]
    fn parallel_runs_match_direct_training() {
        let config = tiny(four_agents());
        let runs = run_experiment(&config).unwrap();
        let direct = run_training(
            &config.env,
            &SchedulerConfig::of_kind(SchedulerKind::Const),
            &config.learner,
            &config.cost,
            config.episodes,
            2,
        )
        .unwrap();
        assert_eq!(runs[6].run.log, direct.log);
    }

    #[test]
    fn outputs_are_written_per_run() {
        let dir = tempfile::tempdir().unwrap();
        let runs = run_experiment(&tiny(four_agents())).unwrap();
        let written = write_outputs(dir.path(), &runs).unwrap();
        assert_eq!(written.len(), 8 * 4);
        assert!(dir.path().join("cpo_seed2.runlog.csv").exists());
        assert!(dir.path().join("baseline_seed1.trace.csv").exists());
    }

    #[test]
    fn zero_episodes_write_empty_logs() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            episodes: 0,
            ..tiny(four_agents())
        };
        let runs = run_experiment(&config).unwrap();
        let written = write_outputs(dir.path(), &runs).unwrap();
        // no final episode, so no trace files
        assert_eq!(written.len(), 8 * 3);
        let log = std::fs::read_to_string(dir.path().join("abc_seed1.runlog.csv")).unwrap();
        assert_eq!(log.lines().count(), 2);
    }
}

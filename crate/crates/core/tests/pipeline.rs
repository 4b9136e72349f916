use std::path::Path;

use abcrl::costs::{summarize, trace_costs, ActionTrace, CostConfig};
use abcrl::env::{CollectorEnv, EnvConfig};
use abcrl::harness::{read_policy, read_runlog, run_experiment, write_outputs, RunConfig};
use abcrl::{HorizontalAction, JointAction, Move};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn five_right_turns_make_one_spin() {
    let trace = ActionTrace::from_rotations(&[HorizontalAction::TurnRight; 5]);
    let signals = trace_costs(&trace, &CostConfig::default()).unwrap();
    let spins: Vec<u32> = signals.iter().map(|s| s.spinning).collect();
    assert_eq!(spins, [0, 0, 0, 0, 1]);
    assert!(signals.iter().all(|s| s.shaking.value() == 0.0));
    assert_eq!(signals[4].combined, 1.0);
}

#[test]
fn alternating_turns_saturate_shaking() {
    let rotations: Vec<_> = (0..8)
        .map(|i| if i % 2 == 0 { HorizontalAction::TurnLeft } else { HorizontalAction::TurnRight })
        .collect();
    let trace = ActionTrace::from_rotations(&rotations);
    let signals = trace_costs(&trace, &CostConfig::default()).unwrap();
    assert_eq!(signals[7].shaking.value(), 1.0);
    assert_eq!(summarize(&signals).total_spins, 0);
}

#[test]
fn trace_text_round_trips() {
    let trace = ActionTrace::from_actions([
        (Move::Forward, HorizontalAction::TurnLeft),
        (Move::NoMove, HorizontalAction::NoOp),
        (Move::Backward, HorizontalAction::TurnRight),
    ]);
    let mut text = Vec::new();
    trace.write(&mut text).unwrap();
    let back = ActionTrace::parse(&text[..], Path::new("t.csv")).unwrap();
    assert_eq!(back, trace);
}

fn random_rollout(seed: u64) -> Vec<(f64, Vec<f64>)> {
    let config = EnvConfig { seed, episode_steps: 200, ..EnvConfig::default() };
    let (mut env, _) = CollectorEnv::reset(config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while !env.is_done() {
        let action = JointAction::from_index(rng.gen_range(0..JointAction::COUNT));
        let step = env.step(action).unwrap();
        out.push((step.reward, step.observation.0));
    }
    out
}

#[test]
fn env_rollouts_are_reproducible() {
    let a = random_rollout(11);
    assert_eq!(a.len(), 200);
    assert_eq!(a, random_rollout(11));
    assert!(a.iter().all(|(r, _)| [-1.0, 0.0, 1.0].contains(r)));
}

#[test]
fn run_outputs_round_trip() {
    let config = RunConfig::parse(
        r#"
episodes = 6
seeds = [3]
[env]
episode_steps = 60
[learner]
batch_episodes = 2
[[agent]]
scheduler = { kind = "abc-sigmoid", v_th = { fixed = 2.0 } }
"#,
        Path::new("tiny.toml"),
    )
    .unwrap();
    let runs = run_experiment(&config).unwrap();
    assert_eq!(runs.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    write_outputs(dir.path(), &runs).unwrap();

    let run = &runs[0];
    let loaded = read_runlog(&run.meta.runlog_path(dir.path())).unwrap();
    assert_eq!(loaded.meta, run.meta);
    assert_eq!(loaded.rows.len(), 6);
    for (got, want) in loaded.rows.iter().zip(&run.run.log.rows) {
        assert_eq!(got.raw_return, want.raw_return);
        assert_eq!(got.shaking_mean, want.shaking_mean);
        assert_eq!(got.spin_total, want.spin_total);
        assert_eq!(got.weight, want.weight);
        assert_eq!(got.lambda, want.lambda);
    }

    let (header, policy) = read_policy(&run.meta.policy_path(dir.path())).unwrap();
    assert_eq!(header.config_hash, config.hash());
    assert_eq!(policy, run.run.policy);

    // The saved trace of the last episode reproduces its logged costs.
    let trace = ActionTrace::load(&run.meta.trace_path(dir.path())).unwrap();
    let summary = summarize(&trace_costs(&trace, &config.cost).unwrap());
    let last = run.run.log.rows.last().unwrap();
    assert_eq!(summary.steps, 60);
    assert_eq!(summary.total_spins, last.spin_total);
    assert!((summary.mean_shaking - last.shaking_mean).abs() < 1e-12);
}

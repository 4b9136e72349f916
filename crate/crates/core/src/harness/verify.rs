use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::lagrangian::{
    inner_min_closed_form, lambda_update, sigmoid_approx_error, verify_closed_form_with,
    LagrangianParams, ObjectiveSample, SlackGrid,
};

pub const PROP1_INSTANCES: usize = 1000;
pub const PROP1_TOLERANCE: f64 = 1e-6;
/// Allowed relative error of the sigmoid form of the penalty weight.
pub const SIGMOID_TOLERANCE: f64 = 0.01;
const SEED: u64 = 0xC0FFEE;

/// One line of the `verify` report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub samples: usize,
    /// Worst deviation from the expected value; NaN (null in JSON) when a
    /// sample could not be evaluated.
    pub max_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes one JSON object per check.
    pub fn write_json_lines(&self, mut out: impl Write) -> std::io::Result<()> {
        for check in &self.checks {
            serde_json::to_writer(&mut out, check)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check(name: &'static str, samples: usize, max_gap: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        check: name,
        samples,
        max_gap,
        pass: max_gap <= tolerance,
    }
}

/// Runs every check against the shipped formulas.
pub fn run_verify() -> VerifyReport {
    run_verify_with(inner_min_closed_form)
}

/// Runs every check, using `closed_form` as the candidate inner minimum of
/// the augmented Lagrangian. The instances are drawn from a fixed seed, so
/// the report is reproducible.
pub fn run_verify_with(closed_form: impl Fn(ObjectiveSample, &LagrangianParams) -> f64) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    VerifyReport {
        checks: vec![
            closed_form_check(&mut rng, &closed_form),
            sigmoid_at_zero(),
            sigmoid_sweep(),
            lambda_nonnegative(&mut rng),
            lambda_reaches_zero(&mut rng),
            lambda_worked_example(),
        ],
    }
}

fn closed_form_check(rng: &mut ChaCha8Rng, closed_form: &impl Fn(ObjectiveSample, &LagrangianParams) -> f64) -> CheckResult {
    let mut worst = 0.0f64;
    for _ in 0..PROP1_INSTANCES {
        let s = ObjectiveSample {
            j_c: rng.gen_range(0.0..10.0),
            j_v: rng.gen_range(-10.0..10.0),
        };
        let p = LagrangianParams {
            lambda: rng.gen_range(0.0..5.0),
            mu: rng.gen_range(0.05..5.0),
            v_th: rng.gen_range(-10.0..10.0),
            delta: crate::lagrangian::DEFAULT_DELTA,
        };
        let gap = verify_closed_form_with(s, &p, SlackGrid::covering(s, &p, 1e-3), closed_form)
            .map_or(f64::NAN, |r| r.gap);
        worst = if gap.is_nan() { f64::NAN } else { worst.max(gap) };
    }
    check("closed_form_minimum", PROP1_INSTANCES, worst, PROP1_TOLERANCE)
}

const SWEEP_LAMBDAS: [f64; 3] = [0.5, 1.0, 2.0];
const SWEEP_MUS: [f64; 2] = [0.1, 1.0];
const SWEEP_POINTS: usize = 201;

fn sigmoid_at_zero() -> CheckResult {
    let mut worst = 0.0f64;
    for lambda in SWEEP_LAMBDAS {
        for mu in SWEEP_MUS {
            worst = worst.max(sigmoid_approx_error(lambda, mu, 0.0));
        }
    }
    check("sigmoid_error_at_zero", SWEEP_LAMBDAS.len() * SWEEP_MUS.len(), worst, 0.0)
}

/// Worst relative error over `|d| <= 0.05 lambda / mu` on the sweep grid.
pub fn sigmoid_sweep_max() -> f64 {
    let mut worst = 0.0f64;
    for lambda in SWEEP_LAMBDAS {
        for mu in SWEEP_MUS {
            let reach = 0.05 * lambda / mu;
            for i in 0..SWEEP_POINTS {
                let d = -reach + 2.0 * reach * i as f64 / (SWEEP_POINTS - 1) as f64;
                worst = worst.max(sigmoid_approx_error(lambda, mu, d));
            }
        }
    }
    worst
}

fn sigmoid_sweep() -> CheckResult {
    let samples = SWEEP_LAMBDAS.len() * SWEEP_MUS.len() * SWEEP_POINTS;
    check("sigmoid_error_sweep", samples, sigmoid_sweep_max(), SIGMOID_TOLERANCE)
}

/// Random walks of the multiplier never go negative; the gap is the most
/// negative value seen.
fn lambda_nonnegative(rng: &mut ChaCha8Rng) -> CheckResult {
    const WALKS: usize = 200;
    const STEPS: usize = 500;
    let mut worst = 0.0f64;
    for _ in 0..WALKS {
        let mu = rng.gen_range(1e-3..10.0);
        let v_th = rng.gen_range(-100.0..100.0);
        let mut lambda = rng.gen_range(0.0..10.0);
        for _ in 0..STEPS {
            lambda = lambda_update(lambda, mu, v_th, rng.gen_range(-100.0..100.0));
            worst = worst.max(-lambda);
        }
    }
    check("lambda_nonnegative", WALKS * STEPS, worst, 0.0)
}

/// With returns held above the threshold, the multiplier hits zero within
/// `ceil(lambda0 / (mu * surplus))` steps; the gap counts steps beyond that.
fn lambda_reaches_zero(rng: &mut ChaCha8Rng) -> CheckResult {
    const CASES: usize = 200;
    let mut worst = 0.0f64;
    for _ in 0..CASES {
        let lambda0: f64 = rng.gen_range(0.0..50.0);
        let mu: f64 = rng.gen_range(0.01..5.0);
        let v_th: f64 = rng.gen_range(-10.0..10.0);
        let surplus: f64 = rng.gen_range(0.01..5.0);
        let bound = (lambda0 / (mu * surplus)).ceil() as usize;
        let mut lambda = lambda0;
        let mut steps = 0;
        while lambda > 0.0 && steps <= bound + 1000 {
            lambda = lambda_update(lambda, mu, v_th, v_th + surplus);
            steps += 1;
        }
        worst = worst.max(steps.saturating_sub(bound) as f64);
    }
    check("lambda_reaches_zero", CASES, worst, 0.0)
}

fn lambda_worked_example() -> CheckResult {
    let gap = (lambda_update(0.5, 0.1, 10.0, 12.0) - 0.3).abs();
    check("lambda_worked_example", 1, gap, 1e-15)
}

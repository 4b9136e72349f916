//! Augmented-Lagrangian machinery behind the adaptive behavioral weight.
//!
//! The constrained problem is: minimize the expected discounted cost `J_c`
//! subject to the expected return `J_v` reaching a threshold `V_th`. With a
//! slack `z` the constraint becomes `V_th - J_v + z^2 = 0`, and its augmented
//! Lagrangian is
//!
//! ```text
//! L(z; lambda, mu) = J_c + lambda * g + (mu / 2) * g^2,   g = V_th - J_v + z^2
//! ```
//!
//! Minimizing over `z` in closed form leaves
//! `J_c + (max(0, lambda + mu * (V_th - J_v))^2 - lambda^2) / (2 mu)`.
//! Linearizing that penalty and dividing through gives a reward-scale
//! weight on the cost, `1 / (lambda + mu * (V_th - J_v))`, which
//! [`penalty_weight`] computes and [`sigmoid_weight`] approximates.
//!
//! Everything here is a pure function of `f64`s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor on the penalty-weight denominator.
pub const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianParams {
    /// Lagrange multiplier, `>= 0`.
    pub lambda: f64,
    /// Penalty parameter, `> 0`.
    pub mu: f64,
    /// Return threshold.
    pub v_th: f64,
    /// Denominator floor for [`penalty_weight`], `> 0`.
    pub delta: f64,
}

impl LagrangianParams {
    pub fn new(lambda: f64, mu: f64, v_th: f64) -> Result<Self> {
        let p = LagrangianParams {
            lambda,
            mu,
            v_th,
            delta: DEFAULT_DELTA,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if !(self.mu > 0.0) {
            return Err(Error::config("mu", format!("must be > 0, got {}", self.mu)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::config("delta", format!("must be > 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Expected discounted cost and return of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSample {
    pub j_c: f64,
    pub j_v: f64,
}

pub fn augmented_lagrangian(s: ObjectiveSample, z: f64, p: &LagrangianParams) -> f64 {
    let g = p.v_th - s.j_v + z * z;
    s.j_c + p.lambda * g + 0.5 * p.mu * g * g
}

/// The minimum of [`augmented_lagrangian`] over the slack `z`.
pub fn inner_min_closed_form(s: ObjectiveSample, p: &LagrangianParams) -> f64 {
    let shifted = (p.lambda + p.mu * (p.v_th - s.j_v)).max(0.0);
    s.j_c + (shifted * shifted - p.lambda * p.lambda) / (2.0 * p.mu)
}

/// Multiplier update `max(0, lambda + mu * (V_th - J_v))`.
pub fn lambda_update(lambda: f64, mu: f64, v_th: f64, j_v: f64) -> f64 {
    (lambda + mu * (v_th - j_v)).max(0.0)
}

/// The constrained-policy-optimization cost weight
/// `1 / max(delta, lambda + mu * (V_th - J_v))`.
pub fn penalty_weight(p: &LagrangianParams, j_v_est: f64) -> f64 {
    1.0 / (p.lambda + p.mu * (p.v_th - j_v_est)).max(p.delta)
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `W * sigmoid((v_avg - v_th) / h)`: the smooth surrogate for
/// [`penalty_weight`], near zero while returns sit far below the threshold.
pub fn sigmoid_weight(max_weight: f64, slope: f64, v_avg: f64, v_th: f64) -> f64 {
    max_weight * sigmoid((v_avg - v_th) / slope)
}

/// Relative error of replacing `1 / (lambda + mu d)` with
/// `(2 / lambda) * sigmoid(-2 mu d / lambda)`, where `d = V_th - J_v`.
///
/// Requires `lambda > 0`, `mu > 0` and `lambda + mu d > 0`; returns NaN
/// otherwise.
pub fn sigmoid_approx_error(lambda: f64, mu: f64, d: f64) -> f64 {
    let denom = lambda + mu * d;
    if !(lambda > 0.0 && mu > 0.0 && denom > 0.0) {
        return f64::NAN;
    }
    let exact = 1.0 / denom;
    let approx = (2.0 / lambda) * sigmoid(-2.0 * mu * d / lambda);
    (exact - approx).abs() / exact
}

/// Symmetric grid `-half_width..=half_width` over the slack variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackGrid {
    pub half_width: f64,
    pub step: f64,
}

impl SlackGrid {
    /// The narrowest grid with the given step that satisfies the
    /// [`verify_closed_form`] coverage precondition for `(s, p)`.
    pub fn covering(s: ObjectiveSample, p: &LagrangianParams, step: f64) -> Self {
        let needed = p.lambda / p.mu + (p.v_th - s.j_v).abs();
        SlackGrid {
            half_width: needed.sqrt() + step,
            step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormReport {
    pub closed_form: f64,
    pub grid_min: f64,
    /// A slack value attaining `grid_min`.
    pub argmin_z: f64,
    pub gap: f64,
}

/// Checks the closed-form inner minimum against a direct numerical
/// minimization of the augmented Lagrangian over `z`.
///
/// The grid minimum is refined by golden-section search on the bracketing
/// cells. `closed_form` lets callers substitute a candidate formula.
pub fn verify_closed_form_with(
    s: ObjectiveSample,
    p: &LagrangianParams,
    grid: SlackGrid,
    closed_form: impl Fn(ObjectiveSample, &LagrangianParams) -> f64,
) -> Result<ClosedFormReport> {
    p.validate()?;
    if !(grid.step > 0.0 && grid.half_width > 0.0) {
        return Err(Error::Precondition(format!(
            "slack grid needs positive step and width, got {grid:?}"
        )));
    }
    let needed = p.lambda / p.mu + (p.v_th - s.j_v).abs();
    if grid.half_width * grid.half_width < needed {
        return Err(Error::Precondition(format!(
            "slack grid half-width {} too small: need half_width^2 >= {needed}",
            grid.half_width
        )));
    }

    // The objective is even in z, so scanning z >= 0 suffices. In y = z^2 it
    // is a convex quadratic, hence unimodal along z >= 0.
    let f = |z: f64| augmented_lagrangian(s, z, p);
    let cells = (grid.half_width / grid.step).ceil() as usize;
    let (mut best_i, mut best) = (0usize, f(0.0));
    for i in 1..=cells {
        let v = f(i as f64 * grid.step);
        if v < best {
            best = v;
            best_i = i;
        }
    }
    let lo = (best_i as f64 - 1.0).max(0.0) * grid.step;
    let hi = (best_i as f64 + 1.0) * grid.step;
    let (argmin_z, refined) = golden_section(f, lo, hi, 1e-12);
    let grid_min = refined.min(best);
    let closed_form = closed_form(s, p);
    Ok(ClosedFormReport {
        closed_form,
        grid_min,
        argmin_z,
        gap: (closed_form - grid_min).abs(),
    })
}

pub fn verify_closed_form(
    s: ObjectiveSample,
    p: &LagrangianParams,
    grid: SlackGrid,
) -> Result<ClosedFormReport> {
    verify_closed_form_with(s, p, grid, inner_min_closed_form)
}

/// Minimizes a unimodal `f` on `[lo, hi]`; returns `(argmin, min)`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    let candidates = [(lo, f(lo)), (mid, f(mid)), (hi, f(hi)), (a, fa), (b, fb)];
    candidates
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
}

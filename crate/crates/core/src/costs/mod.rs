//! Behavioral costs: shaking and spinning detectors.
//!
//! Shaking is the number of direction reversals inside a sliding window of
//! `w` horizontal actions, normalized by `w - 1`. Spinning counts full
//! same-direction revolutions. The per-step cost signal combines the two as
//! `C(t) = shaking(t) + alpha * spins(t)`.
//!
//! [`CostDetector`] is the streaming form used during training;
//! [`trace_costs`] runs the same detectors over a recorded [`ActionTrace`].

mod shake;
mod spin;
mod trace;

use serde::{Deserialize, Serialize};

pub use shake::{ShakeWindow, ShakingCost};
pub use spin::SpinTracker;
pub use trace::{
    summarize, trace_costs, write_cost_report, ActionTrace, CostSummary, TraceStep,
};

use crate::action::{HorizontalAction, Move};
use crate::error::{Error, Result};

/// Parameters of the combined cost signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    /// Shaking window size.
    pub w: usize,
    /// Weight of the spinning term.
    pub alpha: f64,
    /// Degrees turned by one rotation action.
    pub step_angle: u32,
    /// Also watch forward/backward movement as a second shaking channel.
    pub shake_moves: bool,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            w: 8,
            alpha: 1.0,
            step_angle: 72,
            shake_moves: false,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w < 2 {
            return Err(Error::config("cost.w", format!("must be >= 2, got {}", self.w)));
        }
        check_alpha(self.alpha)?;
        spin::validate_step_angle(self.step_angle)
            .map_err(|_| Error::config("cost.step_angle", "must divide 360"))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::config(
            "alpha",
            format!("must be a finite non-negative number, got {alpha}"),
        ));
    }
    Ok(())
}

/// `shaking + alpha * spin_count`.
pub fn combined_cost(shaking: f64, spin_count: u32, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(shaking + alpha * f64::from(spin_count))
}

/// Cost components for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostSignal {
    pub shaking: ShakingCost,
    pub spinning: u32,
    pub combined: f64,
}

/// Streaming cost computation for one episode.
#[derive(Debug, Clone)]
pub struct CostDetector {
    alpha: f64,
    rotations: ShakeWindow<HorizontalAction>,
    moves: Option<ShakeWindow<Move>>,
    spin: SpinTracker,
}

impl CostDetector {
    pub fn new(config: &CostConfig) -> Result<Self> {
        config.validate()?;
        Ok(CostDetector {
            alpha: config.alpha,
            rotations: ShakeWindow::new(config.w)?,
            moves: if config.shake_moves {
                Some(ShakeWindow::new(config.w)?)
            } else {
                None
            },
            spin: SpinTracker::new(config.step_angle)?,
        })
    }

    pub fn step(&mut self, mv: Move, rotate: HorizontalAction) -> CostSignal {
        self.rotations.push(rotate);
        let mut shaking = self.rotations.current_cost();
        if let Some(moves) = &mut self.moves {
            moves.push(mv);
            shaking = shaking.combine(moves.current_cost());
        }
        let spinning = self.spin.step(rotate);
        CostSignal {
            shaking,
            spinning,
            combined: shaking.value() + self.alpha * f64::from(spinning),
        }
    }

    pub fn spin_tracker(&self) -> &SpinTracker {
        &self.spin
    }

    pub fn reset(&mut self) {
        self.rotations.clear();
        if let Some(moves) = &mut self.moves {
            moves.clear();
        }
        self.spin.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combined_cost_examples() {
        assert_eq!(combined_cost(3.0 / 7.0, 0, 1.0).unwrap(), 3.0 / 7.0);
        assert_eq!(combined_cost(0.0, 1, 1.0).unwrap(), 1.0);
        let c = combined_cost(4.0 / 7.0, 2, 0.5).unwrap();
        assert!((c - 11.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn negative_alpha_is_a_config_error() {
        assert!(matches!(
            combined_cost(0.0, 0, -0.1),
            Err(Error::Config { .. })
        ));
        assert!(combined_cost(0.0, 0, f64::NAN).is_err());
    }

    #[test]
    fn move_channel_adds_to_shaking() {
        let config = CostConfig {
            w: 2,
            shake_moves: true,
            ..CostConfig::default()
        };
        let mut d = CostDetector::new(&config).unwrap();
        d.step(Move::Forward, HorizontalAction::TurnLeft);
        let s = d.step(Move::Backward, HorizontalAction::TurnRight);
        assert_eq!(s.shaking, ShakingCost { reversals: 2, max: 1 });
        assert_eq!(s.combined, 2.0);
    }

    #[test]
    fn move_channel_is_off_by_default() {
        let mut d = CostDetector::new(&CostConfig { w: 2, ..CostConfig::default() }).unwrap();
        d.step(Move::Forward, HorizontalAction::NoOp);
        let s = d.step(Move::Backward, HorizontalAction::NoOp);
        assert_eq!(s.shaking.reversals, 0);
    }
}

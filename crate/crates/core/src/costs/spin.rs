use crate::action::HorizontalAction;
use crate::error::{Error, Result};

const FULL_TURN: i64 = 360;

/// Counts full same-direction revolutions of the heading.
///
/// The accumulator holds the signed angle turned since the last change of
/// direction (left positive). A turn in the other direction resets it to
/// zero before the new step is added; no-ops leave it alone. A spin is
/// counted on the step whose rotation reaches or passes a multiple of 360°.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinTracker {
    step_angle: u32,
    accumulated: i64,
    direction: HorizontalAction,
}

impl SpinTracker {
    /// `step_angle` is in whole degrees and must divide 360.
    pub fn new(step_angle: u32) -> Result<Self> {
        validate_step_angle(step_angle)?;
        Ok(SpinTracker {
            step_angle,
            accumulated: 0,
            direction: HorizontalAction::NoOp,
        })
    }

    pub fn step_angle(&self) -> u32 {
        self.step_angle
    }

    /// Signed degrees turned since the last direction change.
    pub fn accumulated_angle(&self) -> i64 {
        self.accumulated
    }

    /// Current turning direction; `NoOp` before the first turn.
    pub fn direction(&self) -> HorizontalAction {
        self.direction
    }

    /// Feeds one action and returns the number of spins it completes (0 or 1).
    pub fn step(&mut self, action: HorizontalAction) -> u32 {
        let sign = match action {
            HorizontalAction::NoOp => return 0,
            HorizontalAction::TurnLeft => 1,
            HorizontalAction::TurnRight => -1,
        };
        if action != self.direction {
            self.accumulated = 0;
            self.direction = action;
        }
        let before = self.accumulated.abs() / FULL_TURN;
        self.accumulated += sign * i64::from(self.step_angle);
        let after = self.accumulated.abs() / FULL_TURN;
        (after - before) as u32
    }

    pub fn reset(&mut self) {
        self.accumulated = 0;
        self.direction = HorizontalAction::NoOp;
    }
}

pub(crate) fn validate_step_angle(step_angle: u32) -> Result<()> {
    if step_angle == 0 || step_angle > 360 || 360 % step_angle != 0 {
        return Err(Error::config(
            "step_angle",
            format!("must be a divisor of 360 degrees, got {step_angle}"),
        ));
    }
    Ok(())
}

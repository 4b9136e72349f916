//! Reinforcement learning with adaptive behavioral costs.
//!
//! Agents are trained to maximize return while a per-episode weight scales
//! a behavioral cost (shaking and spinning) into the reward. The weight is
//! small while the agent is still far from a return threshold and grows as
//! it approaches it, so the agent first learns the task and then learns to
//! do it without jittering or spinning on the spot.
//!
//! * [`costs`]: streaming shaking/spinning detectors and trace analysis.
//! * [`lagrangian`]: the augmented-Lagrangian formulas behind the weight.
//! * [`schedule`]: per-episode weight schedulers (constant, sigmoid, CPO).
//! * [`env`]: a seedable grid-world item collector.
//! * [`learner`]: a linear softmax policy trained by clipped policy gradient.
//! * [`harness`]: configuration, experiment runs, logs and reports.
//!
//! The guide in `book/` walks through each piece; its code samples are
//! compiled and run as doc-tests of this crate.

pub mod action;
pub mod costs;
pub mod env;
pub mod error;
pub mod harness;
pub mod lagrangian;
pub mod learner;
pub mod schedule;

pub use action::{HorizontalAction, JointAction, Move};
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/costs.md")]
    mod costs {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

use rand::Rng;

use crate::action::JointAction;
use crate::error::{Error, Result};

const ACTIONS: usize = JointAction::COUNT;

/// Linear softmax policy over the nine joint actions.
///
/// `weights` is row-major `feature_dim x 9`: the logit of action `a` is
/// `sum_f x[f] * weights[f * 9 + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    feature_dim: usize,
    weights: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn zeros(feature_dim: usize) -> Self {
        SoftmaxPolicy {
            feature_dim,
            weights: vec![0.0; feature_dim * ACTIONS],
        }
    }

    pub fn from_weights(feature_dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != feature_dim * ACTIONS {
            return Err(Error::Precondition(format!(
                "expected {} weights for feature_dim {feature_dim}, got {}",
                feature_dim * ACTIONS,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("policy weights must be finite".into()));
        }
        Ok(SoftmaxPolicy { feature_dim, weights })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn action_count(&self) -> usize {
        ACTIONS
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn logits(&self, features: &[f64]) -> [f64; ACTIONS] {
        debug_assert_eq!(features.len(), self.feature_dim);
        let mut out = [0.0; ACTIONS];
        for (x, row) in features.iter().zip(self.weights.chunks_exact(ACTIONS)) {
            if *x == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += x * w;
            }
        }
        out
    }

    /// Action probabilities; fails if any logit is not finite.
    pub fn probabilities(&self, features: &[f64]) -> Result<[f64; ACTIONS]> {
        softmax(self.logits(features))
    }

    pub fn log_prob(&self, features: &[f64], action: usize) -> Result<f64> {
        let logits = self.logits(features);
        check_finite(&logits)?;
        Ok(logits[action] - log_sum_exp(&logits))
    }

    /// Samples an action and returns it with its log-probability.
    pub fn select_action(
        &self,
        features: &[f64],
        rng: &mut impl Rng,
    ) -> Result<(JointAction, f64)> {
        let logits = self.logits(features);
        let probs = softmax(logits)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = ACTIONS - 1;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let log_prob = logits[chosen] - log_sum_exp(&logits);
        Ok((JointAction::from_index(chosen), log_prob))
    }
}

fn check_finite(logits: &[f64; ACTIONS]) -> Result<()> {
    if logits.iter().all(|l| l.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("non-finite policy logits {logits:?}")))
    }
}

fn log_sum_exp(logits: &[f64; ACTIONS]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(logits: [f64; ACTIONS]) -> Result<[f64; ACTIONS]> {
    check_finite(&logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.map(|l| (l - max).exp());
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

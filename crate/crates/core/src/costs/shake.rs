use std::collections::VecDeque;
use std::fmt;

use crate::action::Opposable;
use crate::error::{Error, Result};

/// Exact shaking cost: `reversals / max`, where `max = w - 1`.
///
/// Kept as a ratio so streaming and brute-force counts compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShakingCost {
    pub reversals: u32,
    pub max: u32,
}

impl ShakingCost {
    pub fn zero(window: usize) -> Self {
        ShakingCost {
            reversals: 0,
            max: (window - 1) as u32,
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.reversals) / f64::from(self.max)
    }

    /// Sum of two channel costs over equal-sized windows.
    pub fn combine(self, other: ShakingCost) -> ShakingCost {
        debug_assert_eq!(self.max, other.max);
        ShakingCost {
            reversals: self.reversals + other.reversals,
            max: self.max,
        }
    }
}

impl fmt::Display for ShakingCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.reversals, self.max)
    }
}

/// Sliding window of the last `w` horizontal actions.
///
/// A reversal is a run `a_i, NoOp, ..., NoOp, a_j` with `a_i` and `a_j`
/// opposite; it is counted while both ends lie inside the window. Every
/// reversal is identified by its left end, so the window keeps a queue of
/// left-end indices and evicts them as they slide out. Each push is
/// amortized O(1).
#[derive(Debug, Clone)]
pub struct ShakeWindow<A> {
    capacity: usize,
    buffer: VecDeque<A>,
    /// Absolute index of the next action to be pushed.
    next_index: u64,
    /// Last non-noop action and its absolute index.
    last_active: Option<(u64, A)>,
    /// Left-end indices of reversals whose right end has been seen.
    reversal_starts: VecDeque<u64>,
}

impl<A: Opposable> ShakeWindow<A> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::config("w", format!("window must be >= 2, got {capacity}")));
        }
        Ok(ShakeWindow {
            capacity,
            buffer: VecDeque::with_capacity(capacity),
            next_index: 0,
            last_active: None,
            reversal_starts: VecDeque::new(),
        })
    }

    /// A window pre-filled with `actions` (only the last `capacity` remain).
    pub fn from_actions(capacity: usize, actions: &[A]) -> Result<Self> {
        let mut window = Self::new(capacity)?;
        for &a in actions {
            window.push(a);
        }
        Ok(window)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.capacity
    }

    pub fn actions(&self) -> impl Iterator<Item = A> + '_ {
        self.buffer.iter().copied()
    }

    pub fn push(&mut self, action: A) {
        let index = self.next_index;
        self.next_index += 1;
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(action);

        if !action.is_noop() {
            if let Some((start, prev)) = self.last_active {
                if prev.is_opposite(action) {
                    self.reversal_starts.push_back(start);
                }
            }
            self.last_active = Some((index, action));
        }

        let window_start = self.next_index - self.buffer.len() as u64;
        while self
            .reversal_starts
            .front()
            .is_some_and(|&start| start < window_start)
        {
            self.reversal_starts.pop_front();
        }
    }

    /// Reversals currently inside the window, full or not.
    pub fn reversals(&self) -> u32 {
        self.reversal_starts.len() as u32
    }

    /// Normalized shaking cost of a full window.
    pub fn shaking_cost(&self) -> Result<ShakingCost> {
        if !self.is_full() {
            return Err(Error::Precondition(format!(
                "shaking cost needs a full window ({} of {} actions)",
                self.buffer.len(),
                self.capacity
            )));
        }
        Ok(ShakingCost {
            reversals: self.reversals(),
            max: (self.capacity - 1) as u32,
        })
    }

    /// The cost for the current step, zero while the window is warming up.
    pub fn current_cost(&self) -> ShakingCost {
        self.shaking_cost()
            .unwrap_or_else(|_| ShakingCost::zero(self.capacity))
    }

    pub fn clear(&mut self) {
        self.buffer.clear();
        self.next_index = 0;
        self.last_active = None;
        self.reversal_starts.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::HorizontalAction::{self, NoOp as N, TurnLeft as L, TurnRight as R};

    fn cost(actions: &[HorizontalAction]) -> ShakingCost {
        ShakeWindow::from_actions(actions.len(), actions)
            .unwrap()
            .shaking_cost()
            .unwrap()
    }

    #[test]
    fn full_alternation_is_maximal() {
        let c = cost(&[L, R, L, R, L, R, L, R]);
        assert_eq!(c, ShakingCost { reversals: 7, max: 7 });
        assert_eq!(c.value(), 1.0);
    }

    #[test]
    fn noops_between_opposites_still_count() {
        // L-R, R-(N)-L, L-R, R-L, L-(N)-R
        let c = cost(&[L, R, N, L, R, L, N, R]);
        assert_eq!(c, ShakingCost { reversals: 5, max: 7 });
    }

    #[test]
    fn three_reversals_in_eight() {
        let c = cost(&[L, N, R, R, N, N, L, R]);
        assert_eq!(c.reversals, 3);
        assert_eq!(c.value(), 3.0 / 7.0);
    }

    #[test]
    fn same_direction_is_not_shaking() {
        assert_eq!(cost(&[L, L, N, L, L, N, N, L]).reversals, 0);
    }

    #[test]
    fn partial_window_is_a_precondition_error() {
        let w = ShakeWindow::from_actions(8, &[L, R]).unwrap();
        assert!(matches!(w.shaking_cost(), Err(Error::Precondition(_))));
        assert_eq!(w.current_cost(), ShakingCost::zero(8));
    }

    #[test]
    fn reversal_leaves_with_its_left_end() {
        let mut w = ShakeWindow::from_actions(3, &[L, R, N]).unwrap();
        assert_eq!(w.reversals(), 1);
        w.push(N);
        assert_eq!(w.reversals(), 0);
    }

    #[test]
    fn window_below_two_is_rejected() {
        assert!(ShakeWindow::<HorizontalAction>::new(1).is_err());
    }
}

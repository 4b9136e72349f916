//! The discrete action alphabet shared by the environment, the cost
//! detectors and the policy.
//!
//! An agent chooses a movement and a rotation every step, giving nine joint
//! actions. Rotation is the horizontal channel watched for shaking and
//! spinning; movement can optionally be watched for shaking as well.

use std::fmt;

/// A rotation step, or no rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HorizontalAction {
    TurnLeft,
    TurnRight,
    NoOp,
}

/// A translation step along the current heading, or none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Forward,
    Backward,
    NoMove,
}

/// Actions that come in opposite pairs separated by a neutral no-op.
///
/// Shaking is measured over any such alphabet.
pub trait Opposable: Copy {
    fn is_noop(self) -> bool;
    fn is_opposite(self, other: Self) -> bool;
}

impl Opposable for HorizontalAction {
    fn is_noop(self) -> bool {
        self == HorizontalAction::NoOp
    }

    fn is_opposite(self, other: Self) -> bool {
        matches!(
            (self, other),
            (HorizontalAction::TurnLeft, HorizontalAction::TurnRight)
                | (HorizontalAction::TurnRight, HorizontalAction::TurnLeft)
        )
    }
}

impl Opposable for Move {
    fn is_noop(self) -> bool {
        self == Move::NoMove
    }

    fn is_opposite(self, other: Self) -> bool {
        matches!(
            (self, other),
            (Move::Forward, Move::Backward) | (Move::Backward, Move::Forward)
        )
    }
}

impl HorizontalAction {
    pub const ALL: [HorizontalAction; 3] = [
        HorizontalAction::TurnLeft,
        HorizontalAction::TurnRight,
        HorizontalAction::NoOp,
    ];

    /// Trace-file symbol: `L`, `R` or `N`.
    pub fn symbol(self) -> char {
        match self {
            HorizontalAction::TurnLeft => 'L',
            HorizontalAction::TurnRight => 'R',
            HorizontalAction::NoOp => 'N',
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "L" => Some(HorizontalAction::TurnLeft),
            "R" => Some(HorizontalAction::TurnRight),
            "N" => Some(HorizontalAction::NoOp),
            _ => None,
        }
    }
}

impl Move {
    pub const ALL: [Move; 3] = [Move::Forward, Move::Backward, Move::NoMove];

    /// Trace-file symbol: `F`, `B` or `N`.
    pub fn symbol(self) -> char {
        match self {
            Move::Forward => 'F',
            Move::Backward => 'B',
            Move::NoMove => 'N',
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "F" => Some(Move::Forward),
            "B" => Some(Move::Backward),
            "N" => Some(Move::NoMove),
            _ => None,
        }
    }
}

/// One of the nine (move, rotate) combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JointAction {
    pub mv: Move,
    pub rotate: HorizontalAction,
}

impl JointAction {
    pub const COUNT: usize = 9;

    pub const NOOP: JointAction = JointAction {
        mv: Move::NoMove,
        rotate: HorizontalAction::NoOp,
    };

    pub fn new(mv: Move, rotate: HorizontalAction) -> Self {
        JointAction { mv, rotate }
    }

    /// Dense index in `0..9`, movement-major.
    pub fn index(self) -> usize {
        let m = Move::ALL.iter().position(|&m| m == self.mv).unwrap();
        let r = HorizontalAction::ALL
            .iter()
            .position(|&r| r == self.rotate)
            .unwrap();
        m * 3 + r
    }

    /// Inverse of [`JointAction::index`].
    ///
    /// Panics if `index >= 9`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < Self::COUNT, "joint action index {index} out of range");
        JointAction {
            mv: Move::ALL[index / 3],
            rotate: HorizontalAction::ALL[index % 3],
        }
    }
}

impl fmt::Display for JointAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.mv.symbol(), self.rotate.symbol())
    }
}

//! A small, seedable banana-collector grid world.
//!
//! The agent lives on a square grid with a discrete heading (`heading_steps`
//! headings per revolution, `360 / heading_steps` degrees apart). Each step it
//! may rotate one heading left or right and move one cell forward or back
//! along the grid axis nearest its heading. Stepping on a yellow item gives
//! +1, a blue item -1. Consumed items respawn on random free cells every
//! `refill_interval` steps.
//!
//! Observations are egocentric: for each heading sector (the cone of
//! directions within half a heading step of that heading, counted from the
//! agent's current heading) the nearness of the closest yellow and blue item
//! within `observation_radius`. They also carry the absolute heading, the
//! distance to the wall ahead and a short memory of the agent's own recent
//! rotations.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{HorizontalAction, JointAction, Move};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub grid_size: usize,
    pub episode_steps: usize,
    pub yellow_count: usize,
    pub blue_count: usize,
    pub refill_interval: usize,
    pub heading_steps: usize,
    pub seed: u64,
    /// Euclidean radius, in cells, within which items are visible.
    pub observation_radius: f64,
    /// Steps over which the rotation-memory features decay to zero.
    pub rotation_memory: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            grid_size: 12,
            episode_steps: 500,
            yellow_count: 10,
            blue_count: 10,
            refill_interval: 100,
            heading_steps: 5,
            seed: 0,
            observation_radius: 6.0,
            rotation_memory: 8,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 4 {
            return Err(Error::config("env.grid_size", "must be >= 4"));
        }
        if self.episode_steps == 0 {
            return Err(Error::config("env.episode_steps", "must be >= 1"));
        }
        if self.refill_interval == 0 {
            return Err(Error::config("env.refill_interval", "must be >= 1"));
        }
        if self.heading_steps < 2 || 360 % self.heading_steps != 0 {
            return Err(Error::config(
                "env.heading_steps",
                format!("must be >= 2 and divide 360, got {}", self.heading_steps),
            ));
        }
        if !(self.observation_radius >= 1.0) {
            return Err(Error::config("env.observation_radius", "must be >= 1"));
        }
        if self.rotation_memory == 0 {
            return Err(Error::config("env.rotation_memory", "must be >= 1"));
        }
        let free = self.grid_size * self.grid_size - 1;
        if self.yellow_count + self.blue_count > free {
            return Err(Error::config(
                "env.yellow_count",
                format!(
                    "{} items do not fit in {free} free cells",
                    self.yellow_count + self.blue_count
                ),
            ));
        }
        Ok(())
    }

    /// Degrees turned by one rotation action.
    pub fn step_angle(&self) -> u32 {
        (360 / self.heading_steps) as u32
    }

    /// Length of the observation vector.
    pub fn feature_dim(&self) -> usize {
        // bias, heading one-hot, yellow/blue per sector, wall ahead,
        // left/right rotation recency, spin progress
        1 + self.heading_steps + 2 * self.heading_steps + 1 + 2 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemColor {
    Yellow,
    Blue,
}

impl ItemColor {
    pub fn reward(self) -> f64 {
        match self {
            ItemColor::Yellow => 1.0,
            ItemColor::Blue => -1.0,
        }
    }
}

pub type Cell = (usize, usize);

/// Unit grid offsets for east, north, west, south.
const AXES: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub agent: Cell,
    pub heading: usize,
    /// Row-major occupancy, `grid_size * grid_size` cells.
    items: Vec<Option<ItemColor>>,
    /// Consumed items waiting for the next refill.
    pending: Vec<ItemColor>,
    pub step_count: usize,
    rng: ChaCha8Rng,
    /// Last non-noop rotation and the step it happened on.
    last_turn: Option<(HorizontalAction, usize)>,
    /// Same-direction rotation steps since the last direction change.
    turn_run: usize,
}

impl EnvState {
    pub fn item_at(&self, cell: Cell, grid_size: usize) -> Option<ItemColor> {
        self.items[cell.1 * grid_size + cell.0]
    }

    pub fn items(&self, grid_size: usize) -> impl Iterator<Item = (Cell, ItemColor)> + '_ {
        self.items
            .iter()
            .enumerate()
            .filter_map(move |(i, c)| c.map(|c| ((i % grid_size, i / grid_size), c)))
    }

    pub fn live_count(&self, color: ItemColor) -> usize {
        self.items.iter().filter(|&&c| c == Some(color)).count()
    }

    pub fn pending_count(&self, color: ItemColor) -> usize {
        self.pending.iter().filter(|&&c| c == color).count()
    }
}

/// Egocentric feature vector, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn features(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// The rotation component of the action, for the cost detectors.
    pub rotation: HorizontalAction,
}

/// The environment: a validated configuration plus the current state.
#[derive(Debug, Clone)]
pub struct CollectorEnv {
    config: EnvConfig,
    state: EnvState,
    /// Precomputed `(dx, dy, distance, absolute sector)` for visible offsets,
    /// sorted by distance.
    visible: Vec<(i64, i64, f64, usize)>,
}

impl CollectorEnv {
    /// Builds the environment and places items according to `config.seed`.
    pub fn reset(config: EnvConfig) -> Result<(Self, Observation)> {
        config.validate()?;
        let n = config.grid_size;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let agent = (n / 2, n / 2);
        let mut cells: Vec<usize> = (0..n * n).filter(|&i| i != agent.1 * n + agent.0).collect();
        cells.shuffle(&mut rng);
        let mut items = vec![None; n * n];
        let colors = std::iter::repeat(ItemColor::Yellow)
            .take(config.yellow_count)
            .chain(std::iter::repeat(ItemColor::Blue).take(config.blue_count));
        for (cell, color) in cells.into_iter().zip(colors) {
            items[cell] = Some(color);
        }
        let visible = visible_offsets(&config);
        let env = CollectorEnv {
            state: EnvState {
                agent,
                heading: 0,
                items,
                pending: Vec::new(),
                step_count: 0,
                rng,
                last_turn: None,
                turn_run: 0,
            },
            config,
            visible,
        };
        let obs = env.observe();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.step_count >= self.config.episode_steps
    }

    /// Grid axis (index into east/north/west/south) nearest to `heading`.
    pub fn move_axis(&self, heading: usize) -> usize {
        let degrees = heading as f64 * 360.0 / self.config.heading_steps as f64;
        ((degrees / 90.0).round() as usize) % 4
    }

    pub fn step(&mut self, action: JointAction) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::Precondition(
                "step called on a finished episode".into(),
            ));
        }
        let h = self.config.heading_steps;
        let s = &mut self.state;
        s.heading = match action.rotate {
            HorizontalAction::TurnLeft => (s.heading + 1) % h,
            HorizontalAction::TurnRight => (s.heading + h - 1) % h,
            HorizontalAction::NoOp => s.heading,
        };
        if action.rotate != HorizontalAction::NoOp {
            match s.last_turn {
                Some((dir, _)) if dir == action.rotate => s.turn_run += 1,
                _ => s.turn_run = 1,
            }
            s.last_turn = Some((action.rotate, s.step_count));
        }

        let sign = match action.mv {
            Move::Forward => 1,
            Move::Backward => -1,
            Move::NoMove => 0,
        };
        let mut reward = 0.0;
        if sign != 0 {
            let (ax, ay) = AXES[self.move_axis(self.state.heading)];
            let n = self.config.grid_size as i64;
            let s = &mut self.state;
            let nx = s.agent.0 as i64 + sign * ax;
            let ny = s.agent.1 as i64 + sign * ay;
            if (0..n).contains(&nx) && (0..n).contains(&ny) {
                s.agent = (nx as usize, ny as usize);
                let idx = s.agent.1 * self.config.grid_size + s.agent.0;
                if let Some(color) = s.items[idx].take() {
                    reward = color.reward();
                    s.pending.push(color);
                }
            }
        }

        self.state.step_count += 1;
        if self.state.step_count % self.config.refill_interval == 0 {
            self.refill();
        }
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            done: self.is_done(),
            rotation: action.rotate,
        })
    }

    fn refill(&mut self) {
        let n = self.config.grid_size;
        let s = &mut self.state;
        if s.pending.is_empty() {
            return;
        }
        let agent = s.agent.1 * n + s.agent.0;
        let mut free: Vec<usize> = (0..n * n)
            .filter(|&i| i != agent && s.items[i].is_none())
            .collect();
        free.shuffle(&mut s.rng);
        // Items never outnumber free cells, so every pending item gets one.
        for (cell, color) in free.into_iter().zip(s.pending.drain(..)) {
            s.items[cell] = Some(color);
        }
    }

    pub fn observe(&self) -> Observation {
        let c = &self.config;
        let s = &self.state;
        let h = c.heading_steps;
        let mut f = Vec::with_capacity(c.feature_dim());
        f.push(1.0);
        f.extend((0..h).map(|i| if i == s.heading { 1.0 } else { 0.0 }));

        let mut yellow = vec![0.0; h];
        let mut blue = vec![0.0; h];
        let n = c.grid_size as i64;
        for &(dx, dy, dist, sector) in &self.visible {
            let x = s.agent.0 as i64 + dx;
            let y = s.agent.1 as i64 + dy;
            if !(0..n).contains(&x) || !(0..n).contains(&y) {
                continue;
            }
            if let Some(color) = s.items[(y * n + x) as usize] {
                let rel = (sector + h - s.heading) % h;
                let slot = match color {
                    ItemColor::Yellow => &mut yellow[rel],
                    ItemColor::Blue => &mut blue[rel],
                };
                if *slot == 0.0 {
                    *slot = (c.observation_radius + 1.0 - dist) / c.observation_radius;
                }
            }
        }
        f.extend(yellow);
        f.extend(blue);

        let (ax, ay) = AXES[self.move_axis(s.heading)];
        let mut free_ahead = 0;
        let (mut x, mut y) = (s.agent.0 as i64 + ax, s.agent.1 as i64 + ay);
        while (0..n).contains(&x) && (0..n).contains(&y) {
            free_ahead += 1;
            x += ax;
            y += ay;
        }
        f.push(free_ahead as f64 / (c.grid_size - 1) as f64);

        let memory = c.rotation_memory as f64;
        let recency = |dir| match s.last_turn {
            Some((d, at)) if d == dir => {
                (1.0 - (s.step_count - 1 - at) as f64 / memory).max(0.0)
            }
            _ => 0.0,
        };
        f.push(recency(HorizontalAction::TurnLeft));
        f.push(recency(HorizontalAction::TurnRight));
        f.push((s.turn_run % h) as f64 / h as f64);
        debug_assert_eq!(f.len(), c.feature_dim());
        Observation(f)
    }
}

fn visible_offsets(config: &EnvConfig) -> Vec<(i64, i64, f64, usize)> {
    let r = config.observation_radius;
    let reach = r.floor() as i64;
    let h = config.heading_steps as f64;
    let sector_width = 360.0 / h;
    let mut out = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if dx == 0 && dy == 0 {
                continue;
            }
            let dist = ((dx * dx + dy * dy) as f64).sqrt();
            if dist > r {
                continue;
            }
            let angle = (dy as f64).atan2(dx as f64).to_degrees().rem_euclid(360.0);
            let sector = ((angle + sector_width / 2.0) / sector_width).floor() as usize
                % config.heading_steps;
            out.push((dx, dy, dist, sector));
        }
    }
    out.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.1, a.0).cmp(&(b.1, b.0))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{HorizontalAction as H, JointAction, Move};
    use proptest::prelude::*;

    fn empty(config: EnvConfig) -> EnvConfig {
        EnvConfig {
            yellow_count: 0,
            blue_count: 0,
            ..config
        }
    }

    #[test]
    fn same_seed_same_start() {
        let (a, oa) = CollectorEnv::reset(EnvConfig::default()).unwrap();
        let (b, ob) = CollectorEnv::reset(EnvConfig::default()).unwrap();
        assert_eq!(a.state(), b.state());
        assert_eq!(oa, ob);
        let (c, _) = CollectorEnv::reset(EnvConfig { seed: 1, ..EnvConfig::default() }).unwrap();
        assert_ne!(a.state().items, c.state().items);
    }

    #[test]
    fn items_occupy_distinct_cells() {
        let config = EnvConfig::default();
        let (env, _) = CollectorEnv::reset(config.clone()).unwrap();
        let cells: Vec<_> = env.state().items(config.grid_size).map(|(c, _)| c).collect();
        assert_eq!(cells.len(), 20);
        assert!(!cells.contains(&env.state().agent));
        assert_eq!(env.state().agent, (6, 6));
        assert_eq!(env.state().heading, 0);
    }

    #[test]
    fn too_many_items_is_a_config_error() {
        let config = EnvConfig {
            grid_size: 4,
            yellow_count: 10,
            blue_count: 6,
            ..EnvConfig::default()
        };
        assert!(matches!(CollectorEnv::reset(config), Err(Error::Config { .. })));
    }

    #[test]
    fn empty_world_never_rewards() {
        let config = empty(EnvConfig { episode_steps: 50, ..EnvConfig::default() });
        let (mut env, _) = CollectorEnv::reset(config).unwrap();
        for i in 0..50 {
            let out = env.step(JointAction::from_index(i % 9)).unwrap();
            assert_eq!(out.reward, 0.0);
        }
    }

    #[test]
    fn collecting_a_yellow_item() {
        let config = empty(EnvConfig::default());
        let (mut env, _) = CollectorEnv::reset(config).unwrap();
        // heading 0 faces east
        env.state.items[6 * 12 + 7] = Some(ItemColor::Yellow);
        let obs = env.observe();
        assert_eq!(obs.0[1 + 5], 1.0, "adjacent yellow straight ahead");
        let out = env.step(JointAction::new(Move::Forward, H::NoOp)).unwrap();
        assert_eq!(out.reward, 1.0);
        assert_eq!(env.state().agent, (7, 6));
        assert_eq!(env.state().live_count(ItemColor::Yellow), 0);
        assert_eq!(env.state().pending_count(ItemColor::Yellow), 1);
    }

    #[test]
    fn blue_item_costs_one() {
        let (mut env, _) = CollectorEnv::reset(empty(EnvConfig::default())).unwrap();
        env.state.items[6 * 12 + 5] = Some(ItemColor::Blue);
        let out = env.step(JointAction::new(Move::Backward, H::NoOp)).unwrap();
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn noop_only_advances_the_clock() {
        let (mut env, _) = CollectorEnv::reset(EnvConfig::default()).unwrap();
        let before = env.state().clone();
        let out = env.step(JointAction::NOOP).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.state().agent, before.agent);
        assert_eq!(env.state().heading, before.heading);
        assert_eq!(env.state().items, before.items);
        assert_eq!(env.state().step_count, 1);
    }

    #[test]
    fn five_left_turns_come_full_circle() {
        let (mut env, _) = CollectorEnv::reset(EnvConfig::default()).unwrap();
        let mut headings = Vec::new();
        for _ in 0..5 {
            let out = env.step(JointAction::new(Move::NoMove, H::TurnLeft)).unwrap();
            assert_eq!(out.rotation, H::TurnLeft);
            headings.push(env.state().heading);
        }
        assert_eq!(headings, vec![1, 2, 3, 4, 0]);
    }

    #[test]
    fn walls_block_movement() {
        let (mut env, _) = CollectorEnv::reset(empty(EnvConfig::default())).unwrap();
        for _ in 0..20 {
            env.step(JointAction::new(Move::Forward, H::NoOp)).unwrap();
        }
        assert_eq!(env.state().agent, (11, 6));
        assert_eq!(env.observe().0[1 + 5 + 10], 0.0);
    }

    #[test]
    fn heading_axes_for_five_headings() {
        let (env, _) = CollectorEnv::reset(EnvConfig::default()).unwrap();
        let axes: Vec<usize> = (0..5).map(|h| env.move_axis(h)).collect();
        assert_eq!(axes, vec![0, 1, 2, 2, 3]);
    }

    #[test]
    fn stepping_after_done_is_an_error() {
        let (mut env, _) =
            CollectorEnv::reset(EnvConfig { episode_steps: 2, ..EnvConfig::default() }).unwrap();
        env.step(JointAction::NOOP).unwrap();
        assert!(env.step(JointAction::NOOP).unwrap().done);
        assert!(matches!(env.step(JointAction::NOOP), Err(Error::Precondition(_))));
    }

    #[test]
    fn rotation_memory_features() {
        let (mut env, _) = CollectorEnv::reset(empty(EnvConfig::default())).unwrap();
        let base = 1 + 5 + 10 + 1;
        let obs = env.step(JointAction::new(Move::NoMove, H::TurnLeft)).unwrap().observation;
        assert_eq!(obs.0[base], 1.0);
        assert_eq!(obs.0[base + 1], 0.0);
        assert_eq!(obs.0[base + 2], 1.0 / 5.0);
        let obs = env.step(JointAction::NOOP).unwrap().observation;
        assert_eq!(obs.0[base], 1.0 - 1.0 / 8.0);
        let obs = env.step(JointAction::new(Move::NoMove, H::TurnRight)).unwrap().observation;
        assert_eq!(obs.0[base], 0.0);
        assert_eq!(obs.0[base + 1], 1.0);
        assert_eq!(obs.0[base + 2], 1.0 / 5.0);
    }

    fn action_strategy() -> impl Strategy<Value = JointAction> {
        (0..9usize).prop_map(JointAction::from_index)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn invariants_hold_along_any_trajectory(
            seed in 0..1000u64,
            actions in prop::collection::vec(action_strategy(), 1..300),
        ) {
            let config = EnvConfig { seed, episode_steps: 300, refill_interval: 37, ..EnvConfig::default() };
            let (mut env, obs) = CollectorEnv::reset(config.clone()).unwrap();
            prop_assert_eq!(obs.0.len(), config.feature_dim());
            let mut total = 0.0;
            for a in actions {
                let out = env.step(a).unwrap();
                prop_assert!([-1.0, 0.0, 1.0].contains(&out.reward));
                prop_assert_eq!(out.observation.0.len(), config.feature_dim());
                prop_assert!(out.observation.0.iter().all(|v| (0.0..=1.0).contains(v)));
                let s = env.state();
                prop_assert!(s.agent.0 < config.grid_size && s.agent.1 < config.grid_size);
                for color in [ItemColor::Yellow, ItemColor::Blue] {
                    let expected = match color {
                        ItemColor::Yellow => config.yellow_count,
                        ItemColor::Blue => config.blue_count,
                    };
                    prop_assert_eq!(s.live_count(color) + s.pending_count(color), expected);
                }
                total += out.reward;
                if out.done { break; }
            }
            let bound = config.yellow_count as f64
                * (1.0 + config.episode_steps as f64 / config.refill_interval as f64);
            prop_assert!(total <= bound);
        }

        #[test]
        fn same_seed_and_actions_same_trajectory(
            seed in 0..1000u64,
            actions in prop::collection::vec(action_strategy(), 1..200),
        ) {
            let config = EnvConfig { seed, refill_interval: 20, ..EnvConfig::default() };
            let (mut a, _) = CollectorEnv::reset(config.clone()).unwrap();
            let (mut b, _) = CollectorEnv::reset(config).unwrap();
            for act in actions {
                prop_assert_eq!(a.step(act).unwrap(), b.step(act).unwrap());
            }
            prop_assert_eq!(a.state(), b.state());
        }

        #[test]
        fn rotations_compose_mod_heading_steps(
            rotations in prop::collection::vec(prop_oneof![Just(H::TurnLeft), Just(H::TurnRight), Just(H::NoOp)], 0..100),
        ) {
            let (mut env, _) = CollectorEnv::reset(empty(EnvConfig::default())).unwrap();
            let mut net: i64 = 0;
            for r in &rotations {
                env.step(JointAction::new(Move::NoMove, *r)).unwrap();
                net += match r { H::TurnLeft => 1, H::TurnRight => -1, H::NoOp => 0 };
            }
            prop_assert_eq!(env.state().heading as i64, net.rem_euclid(5));
        }
    }
}

//! Movable-obstacle grid benchmark.
//!
//! Robots shuttle between a start cell and a goal cell on a small grid.
//! Corridors may be blocked by movable obstacles, which a robot has to push
//! aside before it can pass. Obstacles are shared, so a cleared corridor
//! stays clear for every robot. A robot only senses obstacles through a
//! noisy "blocked ahead" reading, which is accurate after a dedicated
//! observe action and unreliable otherwise.
//!
//! Macro-actions, all relative to the robot's own goal:
//! - `0` move-horizontal: travel along the row toward the goal column until
//!   it is reached or an obstacle is ahead. One step per cell, at least one.
//! - `1` move-vertical: the same along the column.
//! - `2` push: shove the obstacle directly ahead into a free side cell.
//!   Takes `push_duration` steps whether or not the obstacle can move;
//!   a single wasted step when nothing is ahead.
//! - `3` observe: one step with an accurate reading.
//!
//! Reaching the goal pays the team and sends the robot back to its start.
//! Every macro-action fails with probability `failure_prob`, spending one
//! step without effect.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sim::{Bounds, CompletionEvent, Domain, InProgress, SimRng};

pub const MOVE_HORIZONTAL: usize = 0;
pub const MOVE_VERTICAL: usize = 1;
pub const PUSH: usize = 2;
pub const OBSERVE: usize = 3;
pub const N_MAS: usize = 4;

/// Horizon the benchmark is designed for.
pub const HORIZON: u64 = 25;

pub type Cell = [usize; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotRoute {
    pub start: Cell,
    pub goal: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBenchmarkConfig {
    pub width: usize,
    pub height: usize,
    /// One route per robot.
    pub robots: Vec<RobotRoute>,
    /// Cells that may hold an obstacle at the start of an episode.
    pub obstacle_cells: Vec<Cell>,
    /// Probability that each obstacle cell starts occupied.
    pub obstacle_prob: f64,
    pub failure_prob: f64,
    pub push_duration: u64,
    /// Sensor accuracy after the observe action.
    pub observe_accuracy: f64,
    /// Sensor accuracy after any other action.
    pub passive_accuracy: f64,
    pub delivery_reward: f64,
    pub gamma: f64,
}

impl Default for GridBenchmarkConfig {
    fn default() -> Self {
        GridBenchmarkConfig {
            width: 6,
            height: 6,
            robots: vec![
                RobotRoute {
                    start: [0, 0],
                    goal: [5, 5],
                },
                RobotRoute {
                    start: [0, 5],
                    goal: [5, 0],
                },
            ],
            obstacle_cells: vec![[2, 0], [4, 0], [2, 5], [4, 5], [5, 2], [5, 3], [0, 2], [0, 3]],
            obstacle_prob: 0.5,
            failure_prob: 0.1,
            push_duration: 2,
            observe_accuracy: 0.95,
            passive_accuracy: 0.7,
            delivery_reward: 1.0,
            gamma: 0.95,
        }
    }
}

impl GridBenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(invalid("grid", "need at least 2 x 2 cells"));
        }
        let inside = |c: &Cell| c[0] < self.width && c[1] < self.height;
        if self.robots.is_empty() {
            return Err(invalid("robots", "need at least one robot"));
        }
        for r in &self.robots {
            if !inside(&r.start) || !inside(&r.goal) || r.start == r.goal {
                return Err(invalid(
                    "robots",
                    "start and goal must be distinct cells inside the grid",
                ));
            }
        }
        for c in &self.obstacle_cells {
            if !inside(c) {
                return Err(invalid("obstacle_cells", format!("{c:?} lies outside the grid")));
            }
            if self.robots.iter().any(|r| r.start == *c || r.goal == *c) {
                return Err(invalid("obstacle_cells", format!("{c:?} is a start or goal cell")));
            }
        }
        for (name, p) in [
            ("obstacle_prob", self.obstacle_prob),
            ("failure_prob", self.failure_prob),
            ("observe_accuracy", self.observe_accuracy),
            ("passive_accuracy", self.passive_accuracy),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        if self.push_duration == 0 {
            return Err(invalid("push_duration", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridTask {
    pub ma: usize,
    pub remaining: u64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRobot {
    pub cell: Cell,
    /// Axis of the most recent move; "ahead" is toward the goal along it.
    pub heading: Axis,
    pub task: Option<GridTask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub robots: Vec<GridRobot>,
    /// Row-major occupancy of obstacles.
    pub obstacles: Vec<bool>,
    pub time: u64,
}

impl GridState {
    fn blocked(&self, width: usize, c: Cell) -> bool {
        self.obstacles[c[1] * width + c[0]]
    }
}

#[derive(Debug, Clone)]
pub struct GridBenchmark {
    config: GridBenchmarkConfig,
}

const OBS_BOUNDS: [Bounds; 1] = [(0.0, 1.0)];

fn step_toward(from: usize, to: usize) -> Option<usize> {
    match from.cmp(&to) {
        std::cmp::Ordering::Less => Some(from + 1),
        std::cmp::Ordering::Greater => Some(from - 1),
        std::cmp::Ordering::Equal => None,
    }
}

impl GridBenchmark {
    pub fn new(config: GridBenchmarkConfig) -> Result<Self> {
        config.validate()?;
        Ok(GridBenchmark { config })
    }

    pub fn config(&self) -> &GridBenchmarkConfig {
        &self.config
    }

    /// Neighbouring cell toward robot `i`'s goal along `axis`.
    fn ahead(&self, i: usize, cell: Cell, axis: Axis) -> Option<Cell> {
        let goal = self.config.robots[i].goal;
        match axis {
            Axis::Horizontal => step_toward(cell[0], goal[0]).map(|x| [x, cell[1]]),
            Axis::Vertical => step_toward(cell[1], goal[1]).map(|y| [cell[0], y]),
        }
    }

    /// Cells a move along `axis` would traverse from the current position.
    fn path(&self, state: &GridState, i: usize, axis: Axis) -> Vec<Cell> {
        let mut cells = Vec::new();
        let mut c = state.robots[i].cell;
        while let Some(next) = self.ahead(i, c, axis) {
            if state.blocked(self.config.width, next) {
                break;
            }
            cells.push(next);
            c = next;
        }
        cells
    }

    fn obstacle_ahead(&self, state: &GridState, i: usize) -> Option<Cell> {
        let r = &state.robots[i];
        self.ahead(i, r.cell, r.heading)
            .filter(|c| state.blocked(self.config.width, *c))
    }

    /// Free side cell the obstacle at `ob` can be pushed into.
    fn push_target(&self, state: &GridState, ob: Cell, axis: Axis) -> Option<Cell> {
        let (w, h) = (self.config.width, self.config.height);
        let sides: [Option<Cell>; 2] = match axis {
            Axis::Horizontal => [
                (ob[1] + 1 < h).then(|| [ob[0], ob[1] + 1]),
                ob[1].checked_sub(1).map(|y| [ob[0], y]),
            ],
            Axis::Vertical => [
                (ob[0] + 1 < w).then(|| [ob[0] + 1, ob[1]]),
                ob[0].checked_sub(1).map(|x| [x, ob[1]]),
            ],
        };
        sides
            .into_iter()
            .flatten()
            .find(|c| !state.blocked(w, *c) && !self.config.robots.iter().any(|r| r.goal == *c || r.start == *c))
    }
}

impl Default for GridBenchmark {
    fn default() -> Self {
        GridBenchmark::new(GridBenchmarkConfig::default()).expect("default config is valid")
    }
}

impl Domain for GridBenchmark {
    type State = GridState;

    fn num_robots(&self) -> usize {
        self.config.robots.len()
    }

    fn num_macro_actions(&self, _robot: usize) -> usize {
        N_MAS
    }

    fn obs_bounds(&self) -> &[Bounds] {
        &OBS_BOUNDS
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn initial_state(&self, rng: &mut SimRng) -> GridState {
        let mut obstacles = vec![false; self.config.width * self.config.height];
        for c in &self.config.obstacle_cells {
            if rng.random::<f64>() < self.config.obstacle_prob {
                obstacles[c[1] * self.config.width + c[0]] = true;
            }
        }
        GridState {
            robots: self
                .config
                .robots
                .iter()
                .map(|r| GridRobot {
                    cell: r.start,
                    heading: Axis::Horizontal,
                    task: None,
                })
                .collect(),
            obstacles,
            time: 0,
        }
    }

    fn time(&self, state: &GridState) -> u64 {
        state.time
    }

    fn begin_ma(&self, state: &mut GridState, robot: usize, ma: usize, rng: &mut SimRng) -> Result<InProgress> {
        if ma >= N_MAS {
            return Err(Error::UnknownMacroAction { ma, n_mas: N_MAS });
        }
        let r = state
            .robots
            .get(robot)
            .ok_or_else(|| Error::ContractViolation(format!("unknown robot {robot}")))?;
        if r.task.is_some() {
            return Err(Error::ContractViolation(format!("robot {robot} is busy")));
        }
        let success = rng.random::<f64>() >= self.config.failure_prob;
        let duration = if !success {
            1
        } else {
            match ma {
                MOVE_HORIZONTAL => self.path(state, robot, Axis::Horizontal).len().max(1) as u64,
                MOVE_VERTICAL => self.path(state, robot, Axis::Vertical).len().max(1) as u64,
                PUSH if self.obstacle_ahead(state, robot).is_some() => self.config.push_duration,
                _ => 1,
            }
        };
        state.robots[robot].task = Some(GridTask {
            ma,
            remaining: duration,
            success,
        });
        Ok(InProgress {
            robot,
            ma,
            started: state.time,
            duration,
        })
    }

    fn advance_one_timestep(&self, state: &mut GridState, rng: &mut SimRng) -> Vec<CompletionEvent> {
        state.time += 1;
        let width = self.config.width;
        let mut events = Vec::new();
        for i in 0..state.robots.len() {
            let Some(mut task) = state.robots[i].task else {
                continue;
            };
            task.remaining -= 1;
            if task.remaining > 0 {
                state.robots[i].task = Some(task);
                continue;
            }
            state.robots[i].task = None;
            let mut reward = 0.0;
            if task.success {
                match task.ma {
                    MOVE_HORIZONTAL | MOVE_VERTICAL => {
                        let axis = if task.ma == MOVE_HORIZONTAL {
                            Axis::Horizontal
                        } else {
                            Axis::Vertical
                        };
                        // obstacles may have moved since the move began
                        if let Some(end) = self.path(state, i, axis).last() {
                            state.robots[i].cell = *end;
                        }
                        state.robots[i].heading = axis;
                        let route = self.config.robots[i];
                        if state.robots[i].cell == route.goal {
                            reward = self.config.delivery_reward;
                            state.robots[i].cell = route.start;
                            state.robots[i].heading = Axis::Horizontal;
                        }
                    }
                    PUSH => {
                        let heading = state.robots[i].heading;
                        if let Some(ob) = self.obstacle_ahead(state, i) {
                            if let Some(to) = self.push_target(state, ob, heading) {
                                state.obstacles[ob[1] * width + ob[0]] = false;
                                state.obstacles[to[1] * width + to[0]] = true;
                            }
                        }
                    }
                    _ => {}
                }
            }
            let accuracy = if task.ma == OBSERVE && task.success {
                self.config.observe_accuracy
            } else {
                self.config.passive_accuracy
            };
            let truth = self.obstacle_ahead(state, i).is_some();
            let reading = if rng.random::<f64>() < accuracy { truth } else { !truth };
            events.push(CompletionEvent {
                robot: i,
                observation: vec![if reading { 1.0 } else { 0.0 }],
                reward,
                time: state.time,
            });
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::trajectory_rng;

    fn clear_world(obstacles: Vec<Cell>) -> (GridBenchmark, GridState, SimRng) {
        let d = GridBenchmark::new(GridBenchmarkConfig {
            failure_prob: 0.0,
            obstacle_prob: 1.0,
            obstacle_cells: obstacles,
            ..Default::default()
        })
        .unwrap();
        let mut rng = trajectory_rng(1, 0);
        let s = d.initial_state(&mut rng);
        (d, s, rng)
    }

    fn finish(d: &GridBenchmark, s: &mut GridState, rng: &mut SimRng, steps: u64) -> Vec<CompletionEvent> {
        let mut all = Vec::new();
        for _ in 0..steps {
            all.extend(d.advance_one_timestep(s, rng));
        }
        all
    }

    #[test]
    fn rejects_bad_config() {
        let bad = GridBenchmarkConfig {
            obstacle_cells: vec![[9, 0]],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GridBenchmarkConfig {
            obstacle_cells: vec![[5, 5]],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GridBenchmarkConfig {
            robots: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn clear_route_delivers_in_two_moves() {
        let (d, mut s, mut rng) = clear_world(vec![]);
        let h = d.begin_ma(&mut s, 0, MOVE_HORIZONTAL, &mut rng).unwrap();
        assert_eq!(h.duration, 5);
        finish(&d, &mut s, &mut rng, 5);
        assert_eq!(s.robots[0].cell, [5, 0]);
        let h = d.begin_ma(&mut s, 0, MOVE_VERTICAL, &mut rng).unwrap();
        assert_eq!(h.duration, 5);
        let ev = finish(&d, &mut s, &mut rng, 5);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].reward, 1.0);
        assert_eq!(s.robots[0].cell, [0, 0]);
    }

    #[test]
    fn blocked_move_stops_and_push_clears() {
        let (d, mut s, mut rng) = clear_world(vec![[2, 0]]);
        let h = d.begin_ma(&mut s, 0, MOVE_HORIZONTAL, &mut rng).unwrap();
        assert_eq!(h.duration, 1);
        finish(&d, &mut s, &mut rng, 1);
        assert_eq!(s.robots[0].cell, [1, 0]);
        // moving again goes nowhere and costs a step
        assert_eq!(d.begin_ma(&mut s, 0, MOVE_HORIZONTAL, &mut rng).unwrap().duration, 1);
        finish(&d, &mut s, &mut rng, 1);
        assert_eq!(d.begin_ma(&mut s, 0, PUSH, &mut rng).unwrap().duration, 2);
        finish(&d, &mut s, &mut rng, 2);
        assert!(!s.blocked(6, [2, 0]));
        assert!(s.blocked(6, [2, 1]));
        assert_eq!(d.begin_ma(&mut s, 0, MOVE_HORIZONTAL, &mut rng).unwrap().duration, 4);
    }

    #[test]
    fn push_with_nothing_ahead_is_one_step() {
        let (d, mut s, mut rng) = clear_world(vec![]);
        assert_eq!(d.begin_ma(&mut s, 1, PUSH, &mut rng).unwrap().duration, 1);
        assert!(d.begin_ma(&mut s, 1, 7, &mut rng).is_err());
    }

    #[test]
    fn accurate_sensor_reports_obstacle() {
        let d = GridBenchmark::new(GridBenchmarkConfig {
            failure_prob: 0.0,
            obstacle_prob: 1.0,
            obstacle_cells: vec![[1, 0]],
            observe_accuracy: 1.0,
            ..Default::default()
        })
        .unwrap();
        let mut rng = trajectory_rng(2, 0);
        let mut s = d.initial_state(&mut rng);
        d.begin_ma(&mut s, 0, OBSERVE, &mut rng).unwrap();
        let ev = d.advance_one_timestep(&mut s, &mut rng);
        assert_eq!(ev[0].observation, vec![1.0]);
    }
}

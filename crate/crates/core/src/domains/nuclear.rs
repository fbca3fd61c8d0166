//! Multi-robot nuclear contamination clean-up with continuous observations.
//!
//! Robots shuttle between a base region and a contaminated zone. Each
//! macro-action has a random duration and a fixed failure probability; on
//! completion the robot observes its own planar position through Gaussian
//! noise. Collecting inside one of the small contamination sites pays the
//! team +1; a robot must deposit at the base before collecting again.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sim::{Bounds, CompletionEvent, Domain, InProgress, SimRng};

/// Macro-actions available to every robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuclearMa {
    NavigateToBase = 0,
    NavigateToWaste = 1,
    CorrectPosition = 2,
    Collect = 3,
}

impl NuclearMa {
    pub const ALL: [NuclearMa; 4] = [
        NuclearMa::NavigateToBase,
        NuclearMa::NavigateToWaste,
        NuclearMa::CorrectPosition,
        NuclearMa::Collect,
    ];

    pub fn from_index(ma: usize) -> Result<Self> {
        NuclearMa::ALL
            .get(ma)
            .copied()
            .ok_or(Error::UnknownMacroAction { ma, n_mas: 4 })
    }

    pub fn name(self) -> &'static str {
        match self {
            NuclearMa::NavigateToBase => "navigate-to-base",
            NuclearMa::NavigateToWaste => "navigate-to-waste",
            NuclearMa::CorrectPosition => "correct-position",
            NuclearMa::Collect => "collect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    fn sample(&self, rng: &mut SimRng) -> [f64; 2] {
        [
            self.x0 + rng.random::<f64>() * (self.x1 - self.x0),
            self.y0 + rng.random::<f64>() * (self.y1 - self.y0),
        ]
    }

    fn distance_to(&self, p: [f64; 2]) -> f64 {
        let dx = (self.x0 - p[0]).max(p[0] - self.x1).max(0.0);
        let dy = (self.y0 - p[1]).max(p[1] - self.y1).max(0.0);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disc {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Disc {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.cx).hypot(p[1] - self.cy) <= self.r
    }

    fn sample(&self, rng: &mut SimRng) -> [f64; 2] {
        let rad = self.r * rng.random::<f64>().sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        [self.cx + rad * theta.cos(), self.cy + rad * theta.sin()]
    }

    fn centre_distance(&self, p: [f64; 2]) -> f64 {
        (p[0] - self.cx).hypot(p[1] - self.cy)
    }
}

/// Which event pays the +1 team reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardTrigger {
    Collection,
    Deposit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuclearConfig {
    pub workspace: Rect,
    pub base: Disc,
    pub large_zones: Vec<Rect>,
    pub small_zones: Vec<Disc>,
    pub ma_failure_prob: f64,
    pub duration_min: u64,
    pub duration_max: u64,
    pub obs_noise_sigma: f64,
    pub gamma: f64,
    pub num_robots: usize,
    pub reward_on: RewardTrigger,
    /// Position correction only works from inside the large zones.
    pub correct_requires_zone: bool,
}

impl Default for NuclearConfig {
    fn default() -> Self {
        NuclearConfig {
            workspace: Rect {
                x0: 0.0,
                x1: 5.0,
                y0: 0.0,
                y1: 5.0,
            },
            base: Disc {
                cx: 0.75,
                cy: 2.5,
                r: 0.5,
            },
            large_zones: vec![
                Rect {
                    x0: 2.2,
                    x1: 4.2,
                    y0: 0.5,
                    y1: 2.5,
                },
                Rect {
                    x0: 2.2,
                    x1: 4.2,
                    y0: 2.5,
                    y1: 4.5,
                },
            ],
            small_zones: vec![
                Disc {
                    cx: 3.2,
                    cy: 1.5,
                    r: 0.4,
                },
                Disc {
                    cx: 3.2,
                    cy: 3.5,
                    r: 0.4,
                },
            ],
            ma_failure_prob: 0.3,
            duration_min: 1,
            duration_max: 4,
            obs_noise_sigma: 0.25,
            gamma: 0.9,
            num_robots: 3,
            reward_on: RewardTrigger::Collection,
            correct_requires_zone: true,
        }
    }
}

impl NuclearConfig {
    pub fn validate(&self) -> Result<()> {
        let ws = &self.workspace;
        if !(ws.x1 > ws.x0 && ws.y1 > ws.y0) {
            return Err(invalid("workspace", "must have positive extent"));
        }
        if self.large_zones.is_empty() || self.small_zones.is_empty() {
            return Err(invalid("zones", "need at least one large and one small zone"));
        }
        for s in &self.small_zones {
            let inside = self
                .large_zones
                .iter()
                .any(|l| s.cx - s.r >= l.x0 && s.cx + s.r <= l.x1 && s.cy - s.r >= l.y0 && s.cy + s.r <= l.y1);
            if !inside || s.r <= 0.0 {
                return Err(invalid("small_zones", "each small zone must lie inside a large zone"));
            }
        }
        for l in &self.large_zones {
            if l.area() <= 0.0 || !rect_within(l, ws) {
                return Err(invalid("large_zones", "must have positive area inside the workspace"));
            }
            if l.distance_to([self.base.cx, self.base.cy]) <= self.base.r {
                return Err(invalid("base", "must not intersect the large zones"));
            }
        }
        let b = &self.base;
        if b.r <= 0.0
            || !rect_within(
                &Rect {
                    x0: b.cx - b.r,
                    x1: b.cx + b.r,
                    y0: b.cy - b.r,
                    y1: b.cy + b.r,
                },
                ws,
            )
        {
            return Err(invalid("base", "must lie inside the workspace"));
        }
        if !(0.0..=1.0).contains(&self.ma_failure_prob) {
            return Err(invalid("ma_failure_prob", "must lie in [0, 1]"));
        }
        if self.duration_min == 0 || self.duration_max < self.duration_min {
            return Err(invalid("duration", "need 1 <= duration_min <= duration_max"));
        }
        if !(self.obs_noise_sigma >= 0.0) {
            return Err(invalid("obs_noise_sigma", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1)"));
        }
        if self.num_robots == 0 {
            return Err(invalid("num_robots", "must be at least 1"));
        }
        Ok(())
    }
}

fn rect_within(inner: &Rect, outer: &Rect) -> bool {
    inner.x0 >= outer.x0 && inner.x1 <= outer.x1 && inner.y0 >= outer.y0 && inner.y1 <= outer.y1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub ma: NuclearMa,
    pub started: u64,
    pub remaining: u64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub pos: [f64; 2],
    pub carrying: bool,
    pub task: Option<Task>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuclearState {
    pub robots: Vec<RobotState>,
    pub time: u64,
}

#[derive(Debug, Clone)]
pub struct NuclearDomain {
    config: NuclearConfig,
    bounds: Vec<Bounds>,
    noise: Option<Normal<f64>>,
}

impl NuclearDomain {
    pub fn new(config: NuclearConfig) -> Result<Self> {
        config.validate()?;
        let ws = config.workspace;
        let noise =
            (config.obs_noise_sigma > 0.0).then(|| Normal::new(0.0, config.obs_noise_sigma).expect("validated sigma"));
        Ok(NuclearDomain {
            bounds: vec![(ws.x0, ws.x1), (ws.y0, ws.y1)],
            noise,
            config,
        })
    }

    pub fn config(&self) -> &NuclearConfig {
        &self.config
    }

    pub fn in_large_zone(&self, p: [f64; 2]) -> bool {
        self.config.large_zones.iter().any(|l| l.contains(p))
    }

    pub fn in_small_zone(&self, p: [f64; 2]) -> bool {
        self.config.small_zones.iter().any(|s| s.contains(p))
    }

    pub fn in_base(&self, p: [f64; 2]) -> bool {
        self.config.base.contains(p)
    }

    fn sample_large_zone(&self, rng: &mut SimRng) -> [f64; 2] {
        let total: f64 = self.config.large_zones.iter().map(Rect::area).sum();
        let mut u = rng.random::<f64>() * total;
        for l in &self.config.large_zones {
            if u < l.area() {
                return l.sample(rng);
            }
            u -= l.area();
        }
        self.config.large_zones.last().expect("validated").sample(rng)
    }

    fn nearest_small_zone(&self, p: [f64; 2]) -> &Disc {
        self.config
            .small_zones
            .iter()
            .min_by(|a, b| a.centre_distance(p).total_cmp(&b.centre_distance(p)))
            .expect("validated")
    }

    /// Starts a macro-action with a prescribed duration and outcome.
    pub fn begin_ma_with(
        &self,
        state: &mut NuclearState,
        robot: usize,
        ma: usize,
        duration: u64,
        success: bool,
    ) -> Result<InProgress> {
        let ma_kind = NuclearMa::from_index(ma)?;
        let r = state
            .robots
            .get_mut(robot)
            .ok_or_else(|| Error::ContractViolation(format!("unknown robot {robot}")))?;
        if r.task.is_some() {
            return Err(Error::ContractViolation(format!("robot {robot} is busy")));
        }
        if duration == 0 {
            return Err(invalid("duration", "must be at least 1"));
        }
        r.task = Some(Task {
            ma: ma_kind,
            started: state.time,
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

    /// Noisy position reading, clamped to the workspace.
    pub fn observe(&self, state: &NuclearState, robot: usize, rng: &mut SimRng) -> Vec<f64> {
        let p = state.robots[robot].pos;
        let ws = &self.config.workspace;
        let (nx, ny) = match &self.noise {
            Some(n) => (n.sample(rng), n.sample(rng)),
            None => (0.0, 0.0),
        };
        vec![(p[0] + nx).clamp(ws.x0, ws.x1), (p[1] + ny).clamp(ws.y0, ws.y1)]
    }

    /// Applies a completed task's effects; returns the reward earned.
    fn complete(&self, robot: &mut RobotState, task: Task, rng: &mut SimRng) -> f64 {
        if !task.success {
            return 0.0;
        }
        match task.ma {
            NuclearMa::NavigateToBase => {
                robot.pos = self.config.base.sample(rng);
                if robot.carrying {
                    robot.carrying = false;
                    if self.config.reward_on == RewardTrigger::Deposit {
                        return 1.0;
                    }
                }
                0.0
            }
            NuclearMa::NavigateToWaste => {
                robot.pos = self.sample_large_zone(rng);
                0.0
            }
            NuclearMa::CorrectPosition => {
                if !self.config.correct_requires_zone || self.in_large_zone(robot.pos) {
                    robot.pos = self.nearest_small_zone(robot.pos).sample(rng);
                }
                0.0
            }
            NuclearMa::Collect => {
                if !robot.carrying && self.in_small_zone(robot.pos) {
                    robot.carrying = true;
                    if self.config.reward_on == RewardTrigger::Collection {
                        return 1.0;
                    }
                }
                0.0
            }
        }
    }
}

impl Default for NuclearDomain {
    fn default() -> Self {
        NuclearDomain::new(NuclearConfig::default()).expect("default config is valid")
    }
}

impl Domain for NuclearDomain {
    type State = NuclearState;

    fn num_robots(&self) -> usize {
        self.config.num_robots
    }

    fn num_macro_actions(&self, _robot: usize) -> usize {
        NuclearMa::ALL.len()
    }

    fn obs_bounds(&self) -> &[Bounds] {
        &self.bounds
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn initial_state(&self, rng: &mut SimRng) -> NuclearState {
        NuclearState {
            robots: (0..self.config.num_robots)
                .map(|_| RobotState {
                    pos: self.config.base.sample(rng),
                    carrying: false,
                    task: None,
                })
                .collect(),
            time: 0,
        }
    }

    fn time(&self, state: &NuclearState) -> u64 {
        state.time
    }

    fn begin_ma(&self, state: &mut NuclearState, robot: usize, ma: usize, rng: &mut SimRng) -> Result<InProgress> {
        NuclearMa::from_index(ma)?;
        let duration = rng.random_range(self.config.duration_min..=self.config.duration_max);
        let success = rng.random::<f64>() >= self.config.ma_failure_prob;
        self.begin_ma_with(state, robot, ma, duration, success)
    }

    fn advance_one_timestep(&self, state: &mut NuclearState, rng: &mut SimRng) -> Vec<CompletionEvent> {
        state.time += 1;
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
            let reward = self.complete(&mut state.robots[i], task, rng);
            let observation = self.observe(state, i, rng);
            events.push(CompletionEvent {
                robot: i,
                observation,
                reward,
                time: state.time,
            });
        }
        events
    }
}

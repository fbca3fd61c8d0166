//! A three-state, two-action, single-robot domain small enough that every
//! two-node deterministic controller can be enumerated and valued exactly.
//!
//! States: 0 = ready, 1 = jammed, 2 = degraded. Action 0 services the
//! machine, action 1 produces. After each action the robot receives a binary
//! reading (`0.0` or `1.0`, optionally blurred by Gaussian noise) that is
//! more likely to be `1.0` when the machine is jammed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fsa::FsaPolicy;
use crate::sim::{Bounds, CompletionEvent, Domain, InProgress, SimRng};

pub const N_STATES: usize = 3;
pub const N_ACTIONS: usize = 2;

/// Horizon the domain is designed for.
pub const HORIZON: u64 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TinyConfig {
    pub gamma: f64,
    /// Standard deviation of Gaussian noise added to the binary reading.
    pub obs_noise: f64,
    /// Durations are drawn uniformly from `1..=max_duration`.
    pub max_duration: u64,
    /// Reward table indexed `[state][action]`.
    pub rewards: [[f64; N_ACTIONS]; N_STATES],
}

impl Default for TinyConfig {
    fn default() -> Self {
        TinyConfig {
            gamma: 0.95,
            obs_noise: 0.0,
            max_duration: 1,
            rewards: [[0.0, 1.0], [0.0, 0.0], [0.0, 0.3]],
        }
    }
}

/// Initial state distribution.
const INITIAL: [f64; N_STATES] = [0.5, 0.5, 0.0];

/// Transition table `[state][action][next_state]`.
const TRANSITIONS: [[[f64; N_STATES]; N_ACTIONS]; N_STATES] = [
    [[1.0, 0.0, 0.0], [0.6, 0.4, 0.0]],
    [[0.9, 0.0, 0.1], [0.0, 1.0, 0.0]],
    [[0.5, 0.0, 0.5], [0.0, 0.3, 0.7]],
];

/// Probability of reading `1.0` in each post-action state.
const READ_ONE: [f64; N_STATES] = [0.15, 0.85, 0.5];

const OBS_BOUNDS: [Bounds; 1] = [(-0.5, 1.5)];

#[derive(Debug, Clone, Default)]
pub struct TinyOracleDomain {
    config: TinyConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyState {
    pub machine: usize,
    pub time: u64,
    pub action: Option<usize>,
    pub remaining: u64,
}

fn draw(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

impl TinyOracleDomain {
    pub fn new(config: TinyConfig) -> Result<Self> {
        if !(0.0..1.0).contains(&config.gamma) {
            return Err(invalid("gamma", "must lie in [0, 1)"));
        }
        if !(config.obs_noise >= 0.0) {
            return Err(invalid("obs_noise", "must be nonnegative"));
        }
        if config.max_duration == 0 {
            return Err(invalid("max_duration", "must be at least 1"));
        }
        Ok(TinyOracleDomain { config })
    }

    pub fn config(&self) -> &TinyConfig {
        &self.config
    }

    /// Same dynamics with readings blurred by Gaussian noise.
    pub fn continuous(obs_noise: f64) -> Result<Self> {
        TinyOracleDomain::new(TinyConfig {
            obs_noise,
            ..TinyConfig::default()
        })
    }

    /// Exact expected discounted return of a (possibly stochastic) FSA
    /// controller, by forward propagation of the joint distribution over
    /// machine state and controller node.
    ///
    /// Only defined for unit durations and noiseless readings.
    pub fn exact_value(&self, policy: &FsaPolicy, horizon: u64) -> Result<f64> {
        if self.config.max_duration != 1 || self.config.obs_noise != 0.0 {
            return Err(invalid(
                "domain",
                "exact evaluation needs unit durations and noiseless readings",
            ));
        }
        if policy.n_mas() != N_ACTIONS {
            return Err(Error::IncompatiblePolicy(format!(
                "policy has {} macro-actions, domain has {N_ACTIONS}",
                policy.n_mas()
            )));
        }
        let n_nodes = policy.n_nodes();
        // transition distributions for the two possible readings
        let mut after_read = Vec::with_capacity(n_nodes);
        for q in 0..n_nodes {
            after_read.push([
                policy.transition_dist(q, &[0.0])?.probs().to_vec(),
                policy.transition_dist(q, &[1.0])?.probs().to_vec(),
            ]);
        }

        let mut mass = vec![0.0; N_STATES * n_nodes];
        for (s, p) in INITIAL.iter().enumerate() {
            mass[s * n_nodes] = *p;
        }
        let gamma = self.config.gamma;
        let mut value = 0.0;
        for t in 0..horizon {
            let mut next = vec![0.0; N_STATES * n_nodes];
            for s in 0..N_STATES {
                for q in 0..n_nodes {
                    let m = mass[s * n_nodes + q];
                    if m == 0.0 {
                        continue;
                    }
                    let actions = policy.action_dist(q)?.probs();
                    for (a, pa) in actions.iter().enumerate() {
                        if *pa == 0.0 {
                            continue;
                        }
                        let w = m * pa;
                        value += gamma.powi(t as i32) * w * self.config.rewards[s][a];
                        for (s2, ps) in TRANSITIONS[s][a].iter().enumerate() {
                            if *ps == 0.0 {
                                continue;
                            }
                            for (o, po) in [1.0 - READ_ONE[s2], READ_ONE[s2]].iter().enumerate() {
                                for (q2, pq) in after_read[q][o].iter().enumerate() {
                                    next[s2 * n_nodes + q2] += w * ps * po * pq;
                                }
                            }
                        }
                    }
                }
            }
            mass = next;
        }
        Ok(value)
    }
}

impl Domain for TinyOracleDomain {
    type State = TinyState;

    fn num_robots(&self) -> usize {
        1
    }

    fn num_macro_actions(&self, _robot: usize) -> usize {
        N_ACTIONS
    }

    fn obs_bounds(&self) -> &[Bounds] {
        &OBS_BOUNDS
    }

    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn initial_state(&self, rng: &mut SimRng) -> TinyState {
        TinyState {
            machine: draw(&INITIAL, rng),
            time: 0,
            action: None,
            remaining: 0,
        }
    }

    fn time(&self, state: &TinyState) -> u64 {
        state.time
    }

    fn begin_ma(&self, state: &mut TinyState, robot: usize, ma: usize, rng: &mut SimRng) -> Result<InProgress> {
        if ma >= N_ACTIONS {
            return Err(Error::UnknownMacroAction { ma, n_mas: N_ACTIONS });
        }
        if state.action.is_some() {
            return Err(Error::ContractViolation("robot is busy".into()));
        }
        let duration = rng.random_range(1..=self.config.max_duration);
        state.action = Some(ma);
        state.remaining = duration;
        Ok(InProgress {
            robot,
            ma,
            started: state.time,
            duration,
        })
    }

    fn advance_one_timestep(&self, state: &mut TinyState, rng: &mut SimRng) -> Vec<CompletionEvent> {
        let step = state.time;
        state.time += 1;
        let Some(a) = state.action else {
            return Vec::new();
        };
        state.remaining -= 1;
        if state.remaining > 0 {
            return Vec::new();
        }
        state.action = None;
        let s = state.machine;
        let reward = self.config.rewards[s][a];
        let s2 = draw(&TRANSITIONS[s][a], rng);
        state.machine = s2;
        let mut reading = if rng.random::<f64>() < READ_ONE[s2] { 1.0 } else { 0.0 };
        if self.config.obs_noise > 0.0 {
            let noise = Normal::new(0.0, self.config.obs_noise).expect("valid sigma");
            reading += noise.sample(rng);
        }
        let (lo, hi) = OBS_BOUNDS[0];
        vec![CompletionEvent {
            robot: 0,
            observation: vec![reading.clamp(lo, hi)],
            reward,
            // reward accrues while the action executes
            time: step,
        }]
    }
}

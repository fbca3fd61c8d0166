//! Generative execution of decentralized macro-action policies.
//!
//! A [`Domain`] simulates the environment one unit timestep at a time and
//! reports macro-action completions. [`rollout`] drives each robot's
//! controller asynchronously: a robot re-decides only when its own
//! macro-action completes. [`evaluate`] averages discounted returns over
//! independent, seeded trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Random number generator used by every simulation path.
pub type SimRng = ChaCha8Rng;

/// Per-dimension observation bounds `[lo, hi]`.
pub type Bounds = (f64, f64);

/// Mixes a list of integers into one 64-bit seed (splitmix64 folding).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = splitmix64(h);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for trajectory `index` of a run seeded by `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A macro-action in progress, as returned by [`Domain::begin_ma`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InProgress {
    pub robot: usize,
    pub ma: usize,
    pub started: u64,
    pub duration: u64,
}

/// Completion of one robot's macro-action.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionEvent {
    pub robot: usize,
    /// Macro-observation received on completion.
    pub observation: Vec<f64>,
    /// Joint reward attributed at `time`.
    pub reward: f64,
    /// Global timestep the reward is attributed to.
    pub time: u64,
}

/// Generative decentralized semi-Markov environment.
///
/// `advance_one_timestep` must move the state's clock forward by exactly one
/// step. Events it returns are stamped either with the step index `t`
/// (reward accrued while executing) or with the completion time `t + 1`.
pub trait Domain: Sync {
    type State: Clone + Send;

    fn num_robots(&self) -> usize;
    fn num_macro_actions(&self, robot: usize) -> usize;
    fn obs_bounds(&self) -> &[Bounds];
    fn gamma(&self) -> f64;

    fn obs_dim(&self) -> usize {
        self.obs_bounds().len()
    }

    fn initial_state(&self, rng: &mut SimRng) -> Self::State;
    fn time(&self, state: &Self::State) -> u64;
    fn begin_ma(&self, state: &mut Self::State, robot: usize, ma: usize, rng: &mut SimRng) -> Result<InProgress>;
    fn advance_one_timestep(&self, state: &mut Self::State, rng: &mut SimRng) -> Vec<CompletionEvent>;
}

/// A single robot's controller.
pub trait Controller {
    fn num_nodes(&self) -> usize;
    fn select_ma(&self, node: usize, rng: &mut SimRng) -> Result<usize>;
    fn transition(&self, node: usize, observation: &[f64], rng: &mut SimRng) -> Result<usize>;
}

/// One decision epoch of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub node: usize,
    pub ma: usize,
    pub observation: Vec<f64>,
    pub next_node: usize,
    pub time: u64,
}

/// A complete joint rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    /// Decision epochs indexed by robot.
    pub epochs: Vec<Vec<Epoch>>,
    /// Nonzero reward events as `(time, reward)`.
    pub rewards: Vec<(u64, f64)>,
    pub discounted_return: f64,
}

/// Mean and standard error of a Monte Carlo value estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Evaluation {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Evaluation { mean, stderr, n }
    }
}

fn check_event<D: Domain + ?Sized>(
    domain: &D,
    event: &CompletionEvent,
    step: u64,
    last_time: &[Option<u64>],
) -> Result<()> {
    if event.robot >= domain.num_robots() {
        return Err(Error::ContractViolation(format!(
            "event for unknown robot {}",
            event.robot
        )));
    }
    if event.observation.len() != domain.obs_dim() {
        return Err(Error::ContractViolation(format!(
            "observation has dimension {}, expected {}",
            event.observation.len(),
            domain.obs_dim()
        )));
    }
    for (x, (lo, hi)) in event.observation.iter().zip(domain.obs_bounds()) {
        if !(*x >= *lo && *x <= *hi) {
            return Err(Error::ContractViolation(format!(
                "observation {x} outside [{lo}, {hi}]"
            )));
        }
    }
    if event.time != step && event.time != step + 1 {
        return Err(Error::ContractViolation(format!(
            "event time {} not within step {step}",
            event.time
        )));
    }
    if let Some(prev) = last_time[event.robot] {
        if event.time <= prev {
            return Err(Error::ContractViolation(format!(
                "robot {} event times not increasing ({prev} then {})",
                event.robot, event.time
            )));
        }
    }
    Ok(())
}

/// Simulates one joint trajectory from an explicit generator.
///
/// Every robot starts in node 0. When `record` is false the epoch lists are
/// left empty and only the return is computed.
pub fn rollout_with_rng<D, C>(
    domain: &D,
    policy: &[C],
    horizon: u64,
    rng: &mut SimRng,
    record: bool,
) -> Result<TrajectoryRecord>
where
    D: Domain + ?Sized,
    C: Controller,
{
    let n = domain.num_robots();
    if policy.len() != n {
        return Err(Error::IncompatiblePolicy(format!(
            "policy has {} controllers, domain has {n} robots",
            policy.len()
        )));
    }
    let gamma = domain.gamma();
    let mut state = domain.initial_state(rng);
    let mut nodes = vec![0usize; n];
    let mut active = vec![0usize; n];
    let mut last_time = vec![None; n];
    let mut epochs = vec![Vec::new(); n];
    let mut rewards = Vec::new();
    let mut ret = 0.0;

    let start = domain.time(&state);
    for robot in 0..n {
        let ma = policy[robot].select_ma(0, rng)?;
        domain.begin_ma(&mut state, robot, ma, rng)?;
        active[robot] = ma;
    }

    for step in start..start + horizon {
        let events = domain.advance_one_timestep(&mut state, rng);
        if domain.time(&state) != step + 1 {
            return Err(Error::ContractViolation(
                "advance_one_timestep must advance the clock by one".into(),
            ));
        }
        for ev in events {
            check_event(domain, &ev, step, &last_time)?;
            last_time[ev.robot] = Some(ev.time);
            if ev.reward != 0.0 {
                ret += gamma.powi((ev.time - start) as i32) * ev.reward;
                rewards.push((ev.time, ev.reward));
            }
            let r = ev.robot;
            let node = nodes[r];
            let next = policy[r].transition(node, &ev.observation, rng)?;
            if record {
                epochs[r].push(Epoch {
                    node,
                    ma: active[r],
                    observation: ev.observation,
                    next_node: next,
                    time: ev.time,
                });
            }
            nodes[r] = next;
            // the last completion at the horizon needs no follow-up action
            if step + 1 < start + horizon {
                let ma = policy[r].select_ma(next, rng)?;
                domain.begin_ma(&mut state, r, ma, rng)?;
                active[r] = ma;
            }
        }
    }

    Ok(TrajectoryRecord {
        epochs,
        rewards,
        discounted_return: ret,
    })
}

/// Simulates one joint trajectory seeded by `seed`.
pub fn rollout<D, C>(domain: &D, policy: &[C], horizon: u64, seed: u64) -> Result<TrajectoryRecord>
where
    D: Domain + ?Sized,
    C: Controller,
{
    if horizon == 0 {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: "must be at least 1".into(),
        });
    }
    let mut rng = trajectory_rng(seed, 0);
    rollout_with_rng(domain, policy, horizon, &mut rng, true)
}

/// Discounted returns of `n_traj` independent rollouts, in index order.
pub fn sample_returns<D, C>(domain: &D, policy: &[C], n_traj: usize, horizon: u64, seed: u64) -> Result<Vec<f64>>
where
    D: Domain + ?Sized,
    C: Controller + Sync,
{
    (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(seed, i as u64);
            rollout_with_rng(domain, policy, horizon, &mut rng, false).map(|t| t.discounted_return)
        })
        .collect()
}

/// Monte Carlo estimate of the joint policy value.
pub fn evaluate<D, C>(domain: &D, policy: &[C], n_traj: usize, horizon: u64, seed: u64) -> Result<Evaluation>
where
    D: Domain + ?Sized,
    C: Controller + Sync,
{
    if n_traj == 0 {
        return Err(Error::InvalidParameter {
            name: "n_traj",
            reason: "must be at least 1".into(),
        });
    }
    let values = sample_returns(domain, policy, n_traj, horizon, seed)?;
    Ok(Evaluation::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// One robot, one macro-action of fixed duration; the completion pays
    /// `reward` with probability `p`, stamped at the step index or the
    /// completion time.
    struct Pulse {
        duration: u64,
        reward: f64,
        p: f64,
        stamp_at_completion: bool,
        bounds: Vec<Bounds>,
        bad_obs: bool,
    }

    impl Pulse {
        fn new(duration: u64, reward: f64) -> Self {
            Pulse {
                duration,
                reward,
                p: 1.0,
                stamp_at_completion: false,
                bounds: vec![(0.0, 1.0)],
                bad_obs: false,
            }
        }
    }

    #[derive(Clone)]
    struct PulseState {
        t: u64,
        remaining: u64,
    }

    impl Domain for Pulse {
        type State = PulseState;
        fn num_robots(&self) -> usize {
            1
        }
        fn num_macro_actions(&self, _: usize) -> usize {
            1
        }
        fn obs_bounds(&self) -> &[Bounds] {
            &self.bounds
        }
        fn gamma(&self) -> f64 {
            0.9
        }
        fn initial_state(&self, _: &mut SimRng) -> PulseState {
            PulseState { t: 0, remaining: 0 }
        }
        fn time(&self, s: &PulseState) -> u64 {
            s.t
        }
        fn begin_ma(&self, s: &mut PulseState, robot: usize, ma: usize, _: &mut SimRng) -> Result<InProgress> {
            s.remaining = self.duration;
            Ok(InProgress {
                robot,
                ma,
                started: s.t,
                duration: self.duration,
            })
        }
        fn advance_one_timestep(&self, s: &mut PulseState, rng: &mut SimRng) -> Vec<CompletionEvent> {
            let step = s.t;
            s.t += 1;
            s.remaining -= 1;
            if s.remaining > 0 {
                return vec![];
            }
            let paid = rng.random::<f64>() < self.p;
            vec![CompletionEvent {
                robot: 0,
                observation: vec![if self.bad_obs { 2.0 } else { 0.5 }],
                reward: if paid { self.reward } else { 0.0 },
                time: if self.stamp_at_completion { s.t } else { step },
            }]
        }
    }

    struct Fixed;
    impl Controller for Fixed {
        fn num_nodes(&self) -> usize {
            1
        }
        fn select_ma(&self, _: usize, _: &mut SimRng) -> Result<usize> {
            Ok(0)
        }
        fn transition(&self, _: usize, _: &[f64], _: &mut SimRng) -> Result<usize> {
            Ok(0)
        }
    }

    #[test]
    fn reward_at_time_zero_is_undiscounted() {
        let rec = rollout(&Pulse::new(1, 1.0), &[Fixed], 1, 0).unwrap();
        assert_eq!(rec.discounted_return, 1.0);
        assert_eq!(rec.rewards, vec![(0, 1.0)]);
    }

    #[test]
    fn reward_at_time_three_is_discounted() {
        let mut d = Pulse::new(3, 1.0);
        d.stamp_at_completion = true;
        let rec = rollout(&d, &[Fixed], 3, 0).unwrap();
        assert_eq!(rec.rewards, vec![(3, 1.0)]);
        assert!((rec.discounted_return - 0.729).abs() < 1e-12);
    }

    #[test]
    fn discounted_return_matches_reward_events() {
        let mut d = Pulse::new(2, 1.5);
        d.stamp_at_completion = true;
        let rec = rollout(&d, &[Fixed], 11, 5).unwrap();
        let expect: f64 = rec.rewards.iter().map(|(t, r)| 0.9f64.powi(*t as i32) * r).sum();
        assert!((rec.discounted_return - expect).abs() < 1e-12);
        assert_eq!(rec.epochs[0].len(), 5);
        let total: f64 = rec.rewards.iter().map(|(_, r)| r).sum();
        assert!(rec.discounted_return <= total);
    }

    #[test]
    fn out_of_bounds_observation_is_a_contract_violation() {
        let mut d = Pulse::new(1, 1.0);
        d.bad_obs = true;
        assert!(matches!(rollout(&d, &[Fixed], 2, 0), Err(Error::ContractViolation(_))));
    }

    #[test]
    fn deterministic_domain_has_zero_stderr() {
        let ev = evaluate(&Pulse::new(1, 1.0), &[Fixed], 25, 3, 11).unwrap();
        assert_eq!(ev.stderr, 0.0);
        assert!((ev.mean - (1.0 + 0.9 + 0.81)).abs() < 1e-12);
        let single = evaluate(&Pulse::new(1, 1.0), &[Fixed], 1, 3, 11).unwrap();
        assert_eq!(single.stderr, 0.0);
    }

    #[test]
    fn bernoulli_reward_mean() {
        let mut d = Pulse::new(1, 1.0);
        d.p = 0.5;
        let ev = evaluate(&d, &[Fixed], 10_000, 1, 99).unwrap();
        // 3-sigma binomial bound is 0.015
        assert!((ev.mean - 0.5).abs() < 0.02, "{}", ev.mean);
        let again = evaluate(&d, &[Fixed], 10_000, 1, 99).unwrap();
        assert_eq!(ev.mean.to_bits(), again.mean.to_bits());
        assert_eq!(ev.stderr.to_bits(), again.stderr.to_bits());
    }

    #[test]
    fn seeds_are_well_mixed() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_ne!(derive_seed(&[0]), derive_seed(&[0, 0]));
    }
}

//! Entropy-based policy search over stochastic kernel FSAs.
//!
//! Each iteration rolls out the current stochastic controller, drawing one
//! macro-action per node for every rollout, and keeps the elite
//! trajectories. Their observed transitions go into a bounded queue of
//! bundles, every node's kernel transition function is refit, and the
//! macro-action distributions are updated. Once the best value stalls,
//! near-deterministic distributions are mixed with the uniform one.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{is_degenerate, mix_uniform, mle_categorical, smooth_update, DEFAULT_TAU_H};
use crate::error::{invalid, Error, Result};
use crate::sim::{derive_seed, rollout_with_rng, trajectory_rng, Controller, Domain, SimRng, TrajectoryRecord};
use crate::skfsa::{
    train_weighted_klr, FifoKernelQueue, KernelTransition, ObservationBundle, SkFsaPolicy, TransitionSample,
};

/// One iteration of a search.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: u64,
    /// Best value seen so far.
    pub best_value: f64,
    /// Elite admission threshold for the next iteration.
    pub worst_elite: f64,
    /// Normalized entropy of every sampling distribution after the update.
    pub entropies: Vec<f64>,
    /// Whether the best value had converged this iteration.
    pub converged: bool,
    pub injected: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub rows: Vec<TraceRow>,
}

impl SearchTrace {
    pub fn best_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.best_value).collect()
    }
}

/// True when the last `window` values vary by at most
/// `tol * max(1, |max|)`.
pub fn value_converged(history: &[f64], window: usize, tol: f64) -> bool {
    if window == 0 || history.len() < window {
        return false;
    }
    let tail = &history[history.len() - window..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min <= tol * max.abs().max(1.0)
}

/// Which controller the search returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReturnPolicy {
    /// The controller that produced the best single rollout.
    #[default]
    BestSnapshot,
    /// The controller after the last iteration.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsckoConfig {
    pub n_nodes: usize,
    pub iterations: usize,
    pub samples: usize,
    pub elites: usize,
    /// Bundles retained in the kernel queue.
    pub queue_capacity: usize,
    pub alpha: f64,
    /// Entropy-injection rate; 0 disables injection.
    pub alpha_ei: f64,
    /// Kernel radius; defaults to a tenth of the observation box diagonal.
    pub sigma: Option<f64>,
    pub lambda: f64,
    pub horizon: u64,
    pub window: usize,
    pub tol: f64,
    pub tau_h: f64,
    pub return_policy: ReturnPolicy,
    pub ma_sampling: MaSampling,
    /// Rollouts averaged into each sample's value; all of them feed the
    /// updates when the sample is an elite.
    pub rollouts_per_sample: usize,
}

impl Default for EpsckoConfig {
    fn default() -> Self {
        EpsckoConfig {
            n_nodes: 6,
            iterations: 100,
            samples: 50,
            elites: 5,
            queue_capacity: 5,
            alpha: 0.1,
            alpha_ei: 0.03,
            sigma: None,
            lambda: 1e-3,
            horizon: 40,
            window: 10,
            tol: 1e-6,
            tau_h: DEFAULT_TAU_H,
            return_policy: ReturnPolicy::BestSnapshot,
            ma_sampling: MaSampling::PerRollout,
            rollouts_per_sample: 1,
        }
    }
}

impl EpsckoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(invalid("n_nodes", "must be at least 1"));
        }
        if self.samples == 0 || self.elites == 0 || self.elites > self.samples {
            return Err(invalid("elites", "need 1 <= elites <= samples"));
        }
        if self.rollouts_per_sample == 0 {
            return Err(invalid("rollouts_per_sample", "must be at least 1"));
        }
        if self.queue_capacity == 0 {
            return Err(invalid("queue_capacity", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.alpha_ei) {
            return Err(invalid("alpha_ei", "must lie in [0, 1)"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(invalid("sigma", "must be positive"));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", "must be nonnegative"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.window == 0 || !(self.tol >= 0.0) {
            return Err(invalid("window", "need window >= 1 and tol >= 0"));
        }
        if !(self.tau_h > 0.0 && self.tau_h < 1.0) {
            return Err(invalid("tau_h", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Kernel radius for an observation box.
    pub fn sigma_for(&self, bounds: &[(f64, f64)]) -> f64 {
        self.sigma
            .unwrap_or_else(|| 0.1 * bounds.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct EpsckoResult {
    /// Joint controller returned according to `return_policy`.
    pub policy: Vec<SkFsaPolicy>,
    /// Best single-rollout value seen.
    pub best_value: f64,
    pub trace: SearchTrace,
    /// Controllers after the last iteration.
    pub final_policy: Vec<SkFsaPolicy>,
    /// Queue length per robot after the last iteration.
    pub queue_lengths: Vec<usize>,
}

/// Mixes every degenerate distribution of `policy` with the uniform one.
/// Returns whether anything was injected.
pub fn try_inject(policy: &mut SkFsaPolicy, alpha_ei: f64, tau_h: f64) -> Result<bool> {
    if alpha_ei <= 0.0 {
        return Ok(false);
    }
    let mut fired = false;
    for d in policy.actions.iter_mut() {
        if is_degenerate(d, tau_h) {
            *d = mix_uniform(d, alpha_ei);
            fired = true;
        }
    }
    for f in policy.transitions.iter_mut() {
        let n = f.n_classes();
        if n > 1 && f.approx_entropy() / (n as f64).ln() < tau_h {
            *f = f.inject(alpha_ei)?;
            fired = true;
        }
    }
    Ok(fired)
}

fn normalized_entropies(policy: &SkFsaPolicy) -> impl Iterator<Item = f64> + '_ {
    let n = policy.n_nodes();
    policy
        .actions
        .iter()
        .map(|a| a.normalized_entropy())
        .chain(policy.transitions.iter().map(move |f| {
            if n > 1 {
                f.approx_entropy() / (n as f64).ln()
            } else {
                0.0
            }
        }))
}

/// How rollouts choose macro-actions during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaSampling {
    /// One macro-action per node is drawn at the start of each rollout and
    /// the update counts those draws, as in the discrete search.
    #[default]
    PerRollout,
    /// A macro-action is drawn at every visit and the update counts the
    /// choices made along elite trajectories.
    PerVisit,
}

/// A stochastic kernel FSA whose macro-actions were fixed for one rollout.
struct DrawnController<'a> {
    policy: &'a SkFsaPolicy,
    actions: Vec<usize>,
}

impl Controller for DrawnController<'_> {
    fn num_nodes(&self) -> usize {
        self.actions.len()
    }

    fn select_ma(&self, node: usize, _rng: &mut SimRng) -> Result<usize> {
        self.actions.get(node).copied().ok_or(Error::NodeOutOfRange {
            node,
            n_nodes: self.actions.len(),
        })
    }

    fn transition(&self, node: usize, observation: &[f64], rng: &mut SimRng) -> Result<usize> {
        self.policy.transition(node, observation, rng)
    }
}

/// Smoothed MLE of each node's macro-action distribution from per-node
/// counts; nodes without counts keep their distribution.
fn update_actions(policy: &mut SkFsaPolicy, counts: &[Vec<u64>], alpha: f64) -> Result<()> {
    for (q, c) in counts.iter().enumerate() {
        if c.iter().any(|&x| x > 0) {
            policy.actions[q] = smooth_update(&mle_categorical(c)?, &policy.actions[q], alpha)?;
        }
    }
    Ok(())
}

/// Runs the search for `config.iterations` iterations.
pub fn epscko_search<D>(domain: &D, config: &EpsckoConfig, seed: u64) -> Result<EpsckoResult>
where
    D: Domain + ?Sized,
{
    config.validate()?;
    let n_robots = domain.num_robots();
    let sigma = config.sigma_for(domain.obs_bounds());
    let mut policy = (0..n_robots)
        .map(|r| SkFsaPolicy::uniform(config.n_nodes, domain.num_macro_actions(r), sigma))
        .collect::<Result<Vec<_>>>()?;
    let mut queues = (0..n_robots)
        .map(|_| FifoKernelQueue::new(config.queue_capacity))
        .collect::<Result<Vec<_>>>()?;

    let mut worst_elite = f64::NEG_INFINITY;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_policy = policy.clone();
    let mut history = Vec::with_capacity(config.iterations);
    let mut trace = SearchTrace::default();

    for k in 0..config.iterations {
        let started = Instant::now();
        let stream = derive_seed(&[seed, 0xC0, k as u64]);
        let draw_stream = derive_seed(&[seed, 0xC1, k as u64]);
        let drawn: Vec<Vec<Vec<usize>>> = (0..config.samples)
            .map(|s| match config.ma_sampling {
                MaSampling::PerRollout => {
                    let mut rng = trajectory_rng(draw_stream, s as u64);
                    policy
                        .iter()
                        .map(|p| p.actions.iter().map(|a| a.sample(&mut rng)).collect())
                        .collect()
                }
                MaSampling::PerVisit => Vec::new(),
            })
            .collect();
        let m = config.rollouts_per_sample;
        let rollouts = (0..config.samples * m)
            .into_par_iter()
            .map(|i| {
                let s = i / m;
                let mut rng = trajectory_rng(stream, i as u64);
                match config.ma_sampling {
                    MaSampling::PerRollout => {
                        let joint: Vec<DrawnController> = policy
                            .iter()
                            .zip(&drawn[s])
                            .map(|(p, a)| DrawnController {
                                policy: p,
                                actions: a.clone(),
                            })
                            .collect();
                        rollout_with_rng(domain, &joint, config.horizon, &mut rng, true)
                    }
                    MaSampling::PerVisit => rollout_with_rng(domain, &policy, config.horizon, &mut rng, true),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = rollouts
            .chunks(m)
            .map(|c| c.iter().map(|t| t.discounted_return).sum::<f64>() / m as f64)
            .collect();

        let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if top > best_value {
            best_value = top;
            best_policy = policy.clone();
        }

        let mut admitted: Vec<usize> = (0..values.len()).filter(|&s| values[s] >= worst_elite).collect();
        admitted.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        admitted.truncate(config.elites);

        history.push(best_value);
        let converged = value_converged(&history, config.window, config.tol);

        // an empty elite set reopens the threshold so the search cannot stall
        let mut next_worst = f64::NEG_INFINITY;
        if !admitted.is_empty() {
            next_worst = admitted.iter().map(|&s| values[s]).fold(f64::INFINITY, f64::min);
            let elites: Vec<&TrajectoryRecord> = admitted.iter().flat_map(|&s| &rollouts[s * m..(s + 1) * m]).collect();
            for (r, queue) in queues.iter_mut().enumerate() {
                let samples = elites
                    .iter()
                    .flat_map(|t| &t.epochs[r])
                    .map(|e| TransitionSample {
                        node: e.node,
                        observation: e.observation.clone(),
                        next_node: e.next_node,
                    })
                    .collect();
                queue.push(ObservationBundle {
                    iteration: k as u64,
                    samples,
                });
            }
            for (r, p) in policy.iter_mut().enumerate() {
                let mut counts = vec![vec![0u64; p.n_mas()]; p.n_nodes()];
                match config.ma_sampling {
                    MaSampling::PerRollout => {
                        for &s in &admitted {
                            for (q, &a) in drawn[s][r].iter().enumerate() {
                                counts[q][a] += 1;
                            }
                        }
                    }
                    MaSampling::PerVisit => {
                        for t in &elites {
                            for e in &t.epochs[r] {
                                counts[e.node][e.ma] += 1;
                            }
                        }
                    }
                }
                update_actions(p, &counts, config.alpha)?;
            }
            let jobs: Vec<(usize, usize)> = (0..n_robots)
                .flat_map(|r| (0..config.n_nodes).map(move |q| (r, q)))
                .collect();
            let trained = jobs
                .par_iter()
                .map(|&(r, q)| {
                    train_weighted_klr(
                        &queues[r],
                        q,
                        config.n_nodes,
                        config.alpha,
                        sigma,
                        config.lambda,
                        Some(&policy[r].transitions[q]),
                    )
                })
                .collect::<Result<Vec<KernelTransition>>>()?;
            for (&(r, q), f) in jobs.iter().zip(trained) {
                policy[r].transitions[q] = f;
            }
        }

        let mut injected = false;
        if converged {
            for p in policy.iter_mut() {
                injected |= try_inject(p, config.alpha_ei, config.tau_h)?;
            }
        }
        if injected {
            next_worst = f64::NEG_INFINITY;
        }
        worst_elite = next_worst;

        trace.rows.push(TraceRow {
            iteration: k as u64,
            best_value,
            worst_elite,
            entropies: policy.iter().flat_map(normalized_entropies).collect(),
            converged,
            injected,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }

    let returned = match config.return_policy {
        ReturnPolicy::BestSnapshot => best_policy,
        ReturnPolicy::Final => policy.clone(),
    };
    Ok(EpsckoResult {
        policy: returned,
        best_value,
        trace,
        final_policy: policy,
        queue_lengths: queues.iter().map(FifoKernelQueue::len).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Categorical;
    use crate::domains::TinyOracleDomain;

    #[test]
    fn convergence_examples() {
        assert!(value_converged(&[1.0, 1.0, 1.0], 3, 1e-3));
        assert!(!value_converged(&[1.0, 2.0, 3.0], 3, 1e-3));
        assert!(!value_converged(&[1.0, 1.0], 3, 1e-3));
        assert!(value_converged(&[0.0, 5.0, 5.0, 5.0], 3, 1e-6));
        assert!(!value_converged(&[f64::NEG_INFINITY, 1.0], 2, 1e-6));
    }

    #[test]
    fn uniform_policy_is_not_injected() {
        let mut p = SkFsaPolicy::uniform(3, 4, 1.0).unwrap();
        let before = p.clone();
        assert!(!try_inject(&mut p, 0.03, 0.1).unwrap());
        assert_eq!(p, before);
    }

    #[test]
    fn degenerate_action_is_injected_alone() {
        let mut p = SkFsaPolicy::uniform(3, 4, 1.0).unwrap();
        p.actions[1] = Categorical::point_mass(4, 2);
        let before = p.clone();
        assert!(try_inject(&mut p, 0.03, 0.1).unwrap());
        assert!(p.actions[1].entropy() > before.actions[1].entropy());
        assert_eq!(p.actions[0], before.actions[0]);
        assert_eq!(p.transitions, before.transitions);
    }

    #[test]
    fn repeated_injection_approaches_uniform() {
        let mut p = SkFsaPolicy::uniform(2, 2, 1.0).unwrap();
        p.actions[0] = Categorical::point_mass(2, 0);
        let mut gap = 0.5;
        for _ in 0..5 {
            // each injection scales the distance to uniform by 1 - alpha_ei
            p.actions[0] = mix_uniform(&p.actions[0], 0.03);
            let g = p.actions[0].probs()[0] - 0.5;
            assert!((g - 0.97 * gap).abs() < 1e-12);
            gap = g;
        }
    }

    #[test]
    fn minimal_configuration() {
        let d = TinyOracleDomain::continuous(0.1).unwrap();
        let cfg = EpsckoConfig {
            n_nodes: 2,
            iterations: 1,
            samples: 1,
            elites: 1,
            horizon: 6,
            ..Default::default()
        };
        let res = epscko_search(&d, &cfg, 3).unwrap();
        assert_eq!(res.queue_lengths, vec![1]);
        assert_eq!(res.trace.rows.len(), 1);
    }

    #[test]
    fn search_is_deterministic() {
        let d = TinyOracleDomain::continuous(0.2).unwrap();
        let cfg = EpsckoConfig {
            n_nodes: 2,
            iterations: 6,
            samples: 10,
            elites: 3,
            horizon: 6,
            ..Default::default()
        };
        let a = epscko_search(&d, &cfg, 11).unwrap();
        let b = epscko_search(&d, &cfg, 11).unwrap();
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.trace.best_values(), b.trace.best_values());
    }

    #[test]
    fn sampling_modes_and_repeats() {
        let d = TinyOracleDomain::continuous(0.2).unwrap();
        let base = EpsckoConfig {
            n_nodes: 2,
            iterations: 4,
            samples: 8,
            elites: 2,
            horizon: 6,
            ..Default::default()
        };
        assert!(EpsckoConfig {
            rollouts_per_sample: 0,
            ..base.clone()
        }
        .validate()
        .is_err());
        for cfg in [
            EpsckoConfig {
                ma_sampling: MaSampling::PerVisit,
                ..base.clone()
            },
            EpsckoConfig {
                rollouts_per_sample: 3,
                ..base.clone()
            },
        ] {
            let a = epscko_search(&d, &cfg, 5).unwrap();
            let b = epscko_search(&d, &cfg, 5).unwrap();
            assert_eq!(a.policy, b.policy);
            assert_eq!(a.trace.rows.len(), 4);
            a.policy.iter().try_for_each(SkFsaPolicy::validate).unwrap();
        }
    }

    #[test]
    fn sampling_mode_parses() {
        let cfg: EpsckoConfig = toml::from_str("ma_sampling = \"per-visit\"\nrollouts_per_sample = 2").unwrap();
        assert_eq!(cfg.ma_sampling, MaSampling::PerVisit);
        assert_eq!(cfg.rollouts_per_sample, 2);
    }
}

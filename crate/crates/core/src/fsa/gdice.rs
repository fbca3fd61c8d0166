//! Cross-entropy search over deterministic FSA controllers, plus brute-force
//! enumeration for very small problems.

use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DeterministicFsa, FsaPolicy, ObservationGrid};
use crate::distributions::{
    add_noise, is_degenerate, mix_uniform, mle_categorical, smooth_update, AccelerationScheme, Categorical,
};
use crate::epscko::{value_converged, SearchTrace, TraceRow};
use crate::error::{invalid, Error, Result};
use crate::sim::{derive_seed, sample_returns, Domain, SimRng};

/// Largest joint policy space `exhaustive_policy_search` will enumerate.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdiceConfig {
    pub n_nodes: usize,
    pub iterations: usize,
    pub samples: usize,
    pub elites: usize,
    pub alpha: f64,
    pub horizon: u64,
    /// Rollouts per candidate evaluation.
    pub n_eval_traj: usize,
    /// Observation bins per dimension.
    pub factor: usize,
    pub acceleration: AccelerationScheme,
    pub window: usize,
    pub tol: f64,
    /// One parameter set shared by all robots.
    pub shared_weights: bool,
    /// Evaluate every candidate of a run on the same rollout streams.
    pub common_random_numbers: bool,
}

impl Default for GdiceConfig {
    fn default() -> Self {
        GdiceConfig {
            n_nodes: 2,
            iterations: 50,
            samples: 50,
            elites: 5,
            alpha: 0.1,
            horizon: 10,
            n_eval_traj: 100,
            factor: 2,
            acceleration: AccelerationScheme::None,
            window: 10,
            tol: 1e-6,
            shared_weights: false,
            common_random_numbers: true,
        }
    }
}

impl GdiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes == 0 {
            return Err(invalid("n_nodes", "must be at least 1"));
        }
        if self.samples == 0 || self.elites == 0 || self.elites > self.samples {
            return Err(invalid("elites", "need 1 <= elites <= samples"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1]"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        if self.n_eval_traj == 0 {
            return Err(invalid("n_eval_traj", "must be at least 1"));
        }
        if self.factor == 0 {
            return Err(invalid("factor", "must be at least 1"));
        }
        if self.window == 0 || !(self.tol >= 0.0) {
            return Err(invalid("window", "need window >= 1 and tol >= 0"));
        }
        self.acceleration.validate()
    }
}

#[derive(Debug, Clone)]
pub struct GdiceResult {
    /// Best deterministic joint controller sampled during the run.
    pub best_policy: Vec<DeterministicFsa>,
    /// Its value estimate at the time it was sampled.
    pub best_value: f64,
    pub trace: SearchTrace,
    /// Final sampling distributions, one per robot.
    pub distributions: Vec<FsaPolicy>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Smoothed maximum-likelihood update of `params` towards the elite set.
fn update_params(params: &mut FsaPolicy, elites: &[&DeterministicFsa], alpha: f64, omega: f64) -> Result<()> {
    let n_mas = params.n_mas();
    let n_nodes = params.n_nodes();
    let update = |old: &Categorical, n: usize, pick: &dyn Fn(&DeterministicFsa) -> usize| -> Result<Categorical> {
        let mut counts = vec![0u64; n];
        for e in elites {
            counts[pick(e)] += 1;
        }
        let updated = smooth_update(&mle_categorical(&counts)?, old, alpha)?;
        Ok(if omega > 0.0 {
            add_noise(&updated, omega)
        } else {
            updated
        })
    };
    for q in 0..n_nodes {
        let new = update(&params.actions()[q], n_mas, &|e| e.actions()[q])?;
        params.actions_mut()[q] = new;
    }
    for row in 0..params.transitions().len() {
        let new = update(&params.transitions()[row], n_nodes, &|e| e.transitions()[row])?;
        params.transitions_mut()[row] = new;
    }
    Ok(())
}

/// Mixes every degenerate distribution with the uniform one.
fn inject(params: &mut FsaPolicy, alpha_ei: f64, tau_h: f64) -> bool {
    let mut fired = false;
    let n_nodes = params.n_nodes();
    for d in params.actions_mut().iter_mut() {
        if is_degenerate(d, tau_h) {
            *d = mix_uniform(d, alpha_ei);
            fired = true;
        }
    }
    for d in params.transitions_mut().iter_mut() {
        if n_nodes > 1 && is_degenerate(d, tau_h) {
            *d = mix_uniform(d, alpha_ei);
            fired = true;
        }
    }
    fired
}

/// Cross-entropy search over deterministic FSAs with smoothed updates and an
/// optional acceleration scheme.
pub fn gdice_search<D>(domain: &D, config: &GdiceConfig, seed: u64) -> Result<GdiceResult>
where
    D: Domain + ?Sized,
{
    config.validate()?;
    let n_robots = domain.num_robots();
    let grid = ObservationGrid::new(domain.obs_bounds().to_vec(), config.factor)?;
    let n_sets = if config.shared_weights { 1 } else { n_robots };
    if config.shared_weights && (1..n_robots).any(|r| domain.num_macro_actions(r) != domain.num_macro_actions(0)) {
        return Err(invalid("shared_weights", "robots have different macro-action sets"));
    }
    let mut params = (0..n_sets)
        .map(|r| FsaPolicy::uniform(config.n_nodes, domain.num_macro_actions(r), grid.clone()))
        .collect::<Result<Vec<_>>>()?;

    let mut worst_elite = f64::NEG_INFINITY;
    let mut best_value = f64::NEG_INFINITY;
    let mut best_policy: Option<Vec<DeterministicFsa>> = None;
    let mut history = Vec::with_capacity(config.iterations);
    let mut trace = SearchTrace::default();
    let eval_seed = derive_seed(&[seed, 0xE7]);

    for k in 0..config.iterations {
        let started = Instant::now();
        let alpha = config.acceleration.learning_rate(k as u64, config.alpha);
        let omega = config.acceleration.noise(k as u64);

        let mut rng = SimRng::seed_from_u64(derive_seed(&[seed, 0x5A, k as u64]));
        let candidates: Vec<Vec<DeterministicFsa>> = (0..config.samples)
            .map(|_| {
                let drawn: Vec<_> = params.iter().map(|p| p.sample_deterministic(&mut rng)).collect();
                if config.shared_weights {
                    vec![drawn[0].clone(); n_robots]
                } else {
                    drawn
                }
            })
            .collect();

        let values = candidates
            .par_iter()
            .enumerate()
            .map(|(s, joint)| {
                let stream = if config.common_random_numbers {
                    eval_seed
                } else {
                    derive_seed(&[seed, 0xE7, k as u64, s as u64])
                };
                sample_returns(domain, joint, config.n_eval_traj, config.horizon, stream).map(|v| mean(&v))
            })
            .collect::<Result<Vec<f64>>>()?;

        for (s, v) in values.iter().enumerate() {
            if *v > best_value {
                best_value = *v;
                best_policy = Some(candidates[s].clone());
            }
        }

        let mut admitted: Vec<usize> = (0..values.len()).filter(|&s| values[s] >= worst_elite).collect();
        admitted.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        admitted.truncate(config.elites);

        // an empty elite set reopens the threshold so the search cannot stall
        let mut next_worst = f64::NEG_INFINITY;
        if !admitted.is_empty() {
            next_worst = admitted.iter().map(|&s| values[s]).fold(f64::INFINITY, f64::min);
            for (r, p) in params.iter_mut().enumerate() {
                let elites: Vec<&DeterministicFsa> = admitted.iter().map(|&s| &candidates[s][r]).collect();
                update_params(p, &elites, alpha, omega)?;
            }
        }

        history.push(best_value);
        let converged = value_converged(&history, config.window, config.tol);
        let mut injected = false;
        if let AccelerationScheme::MaxEntropyInjection { alpha_ei, tau_h } = config.acceleration {
            if converged {
                for p in params.iter_mut() {
                    injected |= inject(p, alpha_ei, tau_h);
                }
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
            entropies: params
                .iter()
                .flat_map(|p| p.distributions().map(Categorical::normalized_entropy))
                .collect(),
            converged,
            injected,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }

    let best_policy = match best_policy {
        Some(p) => p,
        // no iterations: fall back to the argmax controller
        None => params
            .iter()
            .map(argmax_policy)
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .cycle()
            .take(n_robots)
            .collect(),
    };
    Ok(GdiceResult {
        best_policy,
        best_value,
        trace,
        distributions: params,
    })
}

/// Most probable deterministic controller under a sampling distribution.
pub fn argmax_policy(p: &FsaPolicy) -> Result<DeterministicFsa> {
    DeterministicFsa::new(
        p.n_mas(),
        p.grid().clone(),
        p.actions().iter().map(Categorical::argmax).collect(),
        p.transitions().iter().map(Categorical::argmax).collect(),
    )
}

/// Best deterministic joint FSA by enumeration.
///
/// `value` scores a joint controller; any evaluator works, e.g. an exact
/// one for small domains or a Monte Carlo estimate on fixed streams.
pub fn exhaustive_policy_search<D, F>(
    domain: &D,
    n_nodes: usize,
    factor: usize,
    value: F,
) -> Result<(Vec<DeterministicFsa>, f64)>
where
    D: Domain + ?Sized,
    F: Fn(&[DeterministicFsa]) -> Result<f64>,
{
    if n_nodes == 0 {
        return Err(invalid("n_nodes", "must be at least 1"));
    }
    let grid = ObservationGrid::new(domain.obs_bounds().to_vec(), factor)?;
    let rows = n_nodes * grid.n_bins();
    let n_robots = domain.num_robots();
    // mixed-radix digits: per robot, node actions then transition rows
    let mut radices = Vec::new();
    for r in 0..n_robots {
        radices.extend(std::iter::repeat_n(domain.num_macro_actions(r), n_nodes));
        radices.extend(std::iter::repeat_n(n_nodes, rows));
    }
    let size: f64 = radices.iter().map(|&r| r as f64).product();
    if size > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    let mut digits = vec![0usize; radices.len()];
    let mut best: Option<(Vec<DeterministicFsa>, f64)> = None;
    loop {
        let mut joint = Vec::with_capacity(n_robots);
        let mut at = 0;
        for r in 0..n_robots {
            let actions = digits[at..at + n_nodes].to_vec();
            at += n_nodes;
            let transitions = digits[at..at + rows].to_vec();
            at += rows;
            joint.push(DeterministicFsa::new(
                domain.num_macro_actions(r),
                grid.clone(),
                actions,
                transitions,
            )?);
        }
        let v = value(&joint)?;
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((joint, v));
        }
        // increment the counter
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(best.expect("at least one policy enumerated"));
            }
            digits[i] += 1;
            if digits[i] < radices[i] {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

//! Finite state automaton controllers over a discretized observation space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::Categorical;
use crate::error::{invalid, Error, Result};
use crate::sim::{Bounds, Controller, SimRng};

pub mod gdice;

pub use gdice::{exhaustive_policy_search, gdice_search, GdiceConfig, GdiceResult, EXHAUSTIVE_LIMIT};

/// Uniform grid over a box of observations, `factor` bins per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationGrid {
    pub bounds: Vec<Bounds>,
    pub factor: usize,
}

impl ObservationGrid {
    pub fn new(bounds: Vec<Bounds>, factor: usize) -> Result<Self> {
        let grid = ObservationGrid { bounds, factor };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.factor == 0 {
            return Err(invalid("factor", "must be at least 1"));
        }
        if self.bounds.is_empty() {
            return Err(invalid("bounds", "need at least one dimension"));
        }
        if self.bounds.iter().any(|(lo, hi)| !(hi > lo)) {
            return Err(invalid("bounds", "each dimension needs lo < hi"));
        }
        if (self.factor as f64).powi(self.bounds.len() as i32) > 1e7 {
            return Err(invalid("factor", "grid has too many bins"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn n_bins(&self) -> usize {
        self.factor.pow(self.bounds.len() as u32)
    }

    /// Row-major flat bin index of an observation.
    pub fn discretize(&self, obs: &[f64]) -> Result<usize> {
        if obs.len() != self.bounds.len() {
            return Err(Error::LengthMismatch {
                expected: self.bounds.len(),
                got: obs.len(),
            });
        }
        let d = self.factor;
        let mut flat = 0;
        for (x, (lo, hi)) in obs.iter().zip(&self.bounds) {
            if x.is_nan() {
                return Err(Error::NanObservation);
            }
            let b = (d as f64 * (x - lo) / (hi - lo)).floor();
            let b = if b < 0.0 { 0 } else { (b as usize).min(d - 1) };
            flat = flat * d + b;
        }
        Ok(flat)
    }
}

fn check_node(node: usize, n_nodes: usize) -> Result<()> {
    if node >= n_nodes {
        return Err(Error::NodeOutOfRange { node, n_nodes });
    }
    Ok(())
}

/// Stochastic FSA: per-node macro-action distributions and per-(node, bin)
/// next-node distributions. Also serves as the G-DICE sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FsaPolicy {
    n_nodes: usize,
    n_mas: usize,
    grid: ObservationGrid,
    actions: Vec<Categorical>,
    /// Row `node * n_bins + bin`.
    transitions: Vec<Categorical>,
}

impl FsaPolicy {
    pub fn new(grid: ObservationGrid, actions: Vec<Categorical>, transitions: Vec<Categorical>) -> Result<Self> {
        grid.validate()?;
        let n_nodes = actions.len();
        if n_nodes == 0 {
            return Err(invalid("n_nodes", "must be at least 1"));
        }
        let n_mas = actions[0].len();
        if actions.iter().any(|a| a.len() != n_mas) {
            return Err(invalid("actions", "every node needs the same macro-action set"));
        }
        let rows = n_nodes * grid.n_bins();
        if transitions.len() != rows {
            return Err(Error::LengthMismatch {
                expected: rows,
                got: transitions.len(),
            });
        }
        if transitions.iter().any(|t| t.len() != n_nodes) {
            return Err(invalid("transitions", "every row must range over all nodes"));
        }
        Ok(FsaPolicy {
            n_nodes,
            n_mas,
            grid,
            actions,
            transitions,
        })
    }

    /// Every distribution uniform.
    pub fn uniform(n_nodes: usize, n_mas: usize, grid: ObservationGrid) -> Result<Self> {
        if n_nodes == 0 || n_mas == 0 {
            return Err(invalid("n_nodes", "nodes and macro-actions must be nonempty"));
        }
        let rows = n_nodes * grid.n_bins();
        FsaPolicy::new(
            grid,
            vec![Categorical::uniform(n_mas); n_nodes],
            vec![Categorical::uniform(n_nodes); rows],
        )
    }

    /// Re-checks the invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = FsaPolicy::new(self.grid.clone(), self.actions.clone(), self.transitions.clone())?;
        if rebuilt.n_nodes != self.n_nodes || rebuilt.n_mas != self.n_mas {
            return Err(Error::IncompatiblePolicy(
                "declared sizes disagree with the tables".into(),
            ));
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_mas(&self) -> usize {
        self.n_mas
    }

    pub fn grid(&self) -> &ObservationGrid {
        &self.grid
    }

    pub fn actions(&self) -> &[Categorical] {
        &self.actions
    }

    pub fn transitions(&self) -> &[Categorical] {
        &self.transitions
    }

    pub(crate) fn actions_mut(&mut self) -> &mut [Categorical] {
        &mut self.actions
    }

    pub(crate) fn transitions_mut(&mut self) -> &mut [Categorical] {
        &mut self.transitions
    }

    pub fn action_dist(&self, node: usize) -> Result<&Categorical> {
        check_node(node, self.n_nodes)?;
        Ok(&self.actions[node])
    }

    pub fn transition_dist(&self, node: usize, obs: &[f64]) -> Result<&Categorical> {
        check_node(node, self.n_nodes)?;
        let bin = self.grid.discretize(obs)?;
        Ok(&self.transitions[node * self.grid.n_bins() + bin])
    }

    /// Every distribution in a fixed order: actions first, then transitions.
    pub fn distributions(&self) -> impl Iterator<Item = &Categorical> {
        self.actions.iter().chain(&self.transitions)
    }

    /// Draws one deterministic controller.
    pub fn sample_deterministic<R: Rng + ?Sized>(&self, rng: &mut R) -> DeterministicFsa {
        DeterministicFsa {
            n_nodes: self.n_nodes,
            n_mas: self.n_mas,
            grid: self.grid.clone(),
            actions: self.actions.iter().map(|c| c.sample(rng)).collect(),
            transitions: self.transitions.iter().map(|c| c.sample(rng)).collect(),
        }
    }
}

impl Controller for FsaPolicy {
    fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    fn select_ma(&self, node: usize, rng: &mut SimRng) -> Result<usize> {
        Ok(self.action_dist(node)?.sample(rng))
    }

    fn transition(&self, node: usize, observation: &[f64], rng: &mut SimRng) -> Result<usize> {
        Ok(self.transition_dist(node, observation)?.sample(rng))
    }
}

/// FSA with a single macro-action per node and a single successor per
/// (node, bin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterministicFsa {
    n_nodes: usize,
    n_mas: usize,
    grid: ObservationGrid,
    actions: Vec<usize>,
    transitions: Vec<usize>,
}

impl DeterministicFsa {
    pub fn new(n_mas: usize, grid: ObservationGrid, actions: Vec<usize>, transitions: Vec<usize>) -> Result<Self> {
        grid.validate()?;
        let n_nodes = actions.len();
        if n_nodes == 0 {
            return Err(invalid("n_nodes", "must be at least 1"));
        }
        if let Some(&ma) = actions.iter().find(|&&a| a >= n_mas) {
            return Err(Error::UnknownMacroAction { ma, n_mas });
        }
        let rows = n_nodes * grid.n_bins();
        if transitions.len() != rows {
            return Err(Error::LengthMismatch {
                expected: rows,
                got: transitions.len(),
            });
        }
        if let Some(&node) = transitions.iter().find(|&&q| q >= n_nodes) {
            return Err(Error::NodeOutOfRange { node, n_nodes });
        }
        Ok(DeterministicFsa {
            n_nodes,
            n_mas,
            grid,
            actions,
            transitions,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_mas(&self) -> usize {
        self.n_mas
    }

    pub fn grid(&self) -> &ObservationGrid {
        &self.grid
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn transitions(&self) -> &[usize] {
        &self.transitions
    }

    /// Point-mass stochastic equivalent.
    pub fn to_stochastic(&self) -> FsaPolicy {
        FsaPolicy {
            n_nodes: self.n_nodes,
            n_mas: self.n_mas,
            grid: self.grid.clone(),
            actions: self
                .actions
                .iter()
                .map(|&a| Categorical::point_mass(self.n_mas, a))
                .collect(),
            transitions: self
                .transitions
                .iter()
                .map(|&q| Categorical::point_mass(self.n_nodes, q))
                .collect(),
        }
    }
}

impl Controller for DeterministicFsa {
    fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    fn select_ma(&self, node: usize, _rng: &mut SimRng) -> Result<usize> {
        check_node(node, self.n_nodes)?;
        Ok(self.actions[node])
    }

    fn transition(&self, node: usize, observation: &[f64], _rng: &mut SimRng) -> Result<usize> {
        check_node(node, self.n_nodes)?;
        let bin = self.grid.discretize(observation)?;
        Ok(self.transitions[node * self.grid.n_bins() + bin])
    }
}

//! Stochastic kernel-based FSA controllers: node transitions are
//! multinomial kernel logistic regressions over continuous observations.

use serde::{Deserialize, Serialize};

use crate::distributions::{entropy, Categorical};
use crate::error::{invalid, Error, Result};
use crate::sim::{Controller, SimRng};

pub mod klr;
pub mod queue;

pub use klr::{bundle_weights, klr_objective_and_gradient, train_weighted_klr, KlrProblem};
pub use queue::{FifoKernelQueue, ObservationBundle, SampleKey, TransitionSample};

/// `exp(-|o - o'|^2 / (2 sigma^2))`.
pub fn rbf_kernel(o: &[f64], o_prime: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    if o.len() != o_prime.len() {
        return Err(Error::LengthMismatch {
            expected: o.len(),
            got: o_prime.len(),
        });
    }
    Ok(kernel(o, o_prime, sigma))
}

fn kernel(o: &[f64], o_prime: &[f64], sigma: f64) -> f64 {
    let d2: f64 = o.iter().zip(o_prime).map(|(a, b)| (a - b) * (a - b)).sum();
    (-0.5 * d2 / (sigma * sigma)).exp()
}

/// Kernel evaluations against every basis point, followed by a constant 1.
pub fn feature_vector(o: &[f64], basis: &[Vec<f64>], sigma: f64) -> Vec<f64> {
    let mut f = Vec::with_capacity(basis.len() + 1);
    f.extend(basis.iter().map(|b| kernel(o, b, sigma)));
    f.push(1.0);
    f
}

/// Softmax of `W f(o)`, mixed with the uniform distribution at rate `mix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelTransition {
    n_classes: usize,
    sigma: f64,
    basis: Vec<Vec<f64>>,
    /// Row-major `n_classes x (basis + 1)`, bias last.
    weights: Vec<f64>,
    mix: f64,
    #[serde(skip)]
    keys: Vec<SampleKey>,
}

impl KernelTransition {
    /// No basis and zero weights: uniform everywhere.
    pub fn untrained(n_classes: usize, sigma: f64) -> Result<Self> {
        KernelTransition::new(n_classes, sigma, Vec::new(), vec![0.0; n_classes], 0.0)
    }

    pub fn new(n_classes: usize, sigma: f64, basis: Vec<Vec<f64>>, weights: Vec<f64>, mix: f64) -> Result<Self> {
        let mut f = KernelTransition::trained(n_classes, sigma, basis, Vec::new(), weights)?;
        if !(0.0..=1.0).contains(&mix) {
            return Err(invalid("mix", "must lie in [0, 1]"));
        }
        f.mix = mix;
        Ok(f)
    }

    pub(crate) fn trained(
        n_classes: usize,
        sigma: f64,
        basis: Vec<Vec<f64>>,
        keys: Vec<SampleKey>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if n_classes == 0 {
            return Err(invalid("n_classes", "must be at least 1"));
        }
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        if let Some(b) = basis.first() {
            if basis.iter().any(|x| x.len() != b.len()) {
                return Err(invalid("basis", "points must share a dimension"));
            }
        }
        let expected = n_classes * (basis.len() + 1);
        if weights.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("weights", "must be finite"));
        }
        Ok(KernelTransition {
            n_classes,
            sigma,
            basis,
            weights,
            mix: 0.0,
            keys,
        })
    }

    /// Re-checks the invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(invalid("mix", "must lie in [0, 1]"));
        }
        KernelTransition::trained(
            self.n_classes,
            self.sigma,
            self.basis.clone(),
            Vec::new(),
            self.weights.clone(),
        )
        .map(|_| ())
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Accumulated uniform-mixture coefficient.
    pub fn mix(&self) -> f64 {
        self.mix
    }

    pub(crate) fn keys(&self) -> &[SampleKey] {
        &self.keys
    }

    pub fn predict(&self, o: &[f64]) -> Categorical {
        let f = feature_vector(o, &self.basis, self.sigma);
        let p = f.len();
        let mut scores: Vec<f64> = self
            .weights
            .chunks_exact(p)
            .map(|w| w.iter().zip(&f).map(|(a, b)| a * b).sum())
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            z += *s;
        }
        let u = self.mix / self.n_classes as f64;
        for s in scores.iter_mut() {
            *s = (1.0 - self.mix) * *s / z + u;
        }
        Categorical::from_weights(&scores).expect("softmax output is a valid weight vector")
    }

    /// Mean predicted entropy over the basis points; `ln n` without a basis.
    pub fn approx_entropy(&self) -> f64 {
        if self.basis.is_empty() {
            return entropy(&self.predict(&[]));
        }
        self.basis.iter().map(|b| entropy(&self.predict(b))).sum::<f64>() / self.basis.len() as f64
    }

    /// Predictions become `(1 - a) predict(o) + a uniform`; repeated
    /// injections compose.
    pub fn inject(&self, alpha_ei: f64) -> Result<Self> {
        if !(alpha_ei > 0.0 && alpha_ei < 1.0) {
            return Err(invalid("alpha_ei", "must lie in (0, 1)"));
        }
        let mut f = self.clone();
        f.mix = 1.0 - (1.0 - self.mix) * (1.0 - alpha_ei);
        Ok(f)
    }
}

/// Mean entropy of a transition function's predictions at its basis.
pub fn approx_transition_entropy(f: &KernelTransition) -> f64 {
    f.approx_entropy()
}

/// Mixes a transition function with the uniform distribution.
pub fn inject_transition_entropy(f: &KernelTransition, alpha_ei: f64) -> Result<KernelTransition> {
    f.inject(alpha_ei)
}

/// Per-node macro-action distributions and kernel transition functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkFsaPolicy {
    pub actions: Vec<Categorical>,
    pub transitions: Vec<KernelTransition>,
}

impl SkFsaPolicy {
    pub fn uniform(n_nodes: usize, n_mas: usize, sigma: f64) -> Result<Self> {
        if n_nodes == 0 || n_mas == 0 {
            return Err(invalid("n_nodes", "nodes and macro-actions must be nonempty"));
        }
        Ok(SkFsaPolicy {
            actions: vec![Categorical::uniform(n_mas); n_nodes],
            transitions: (0..n_nodes)
                .map(|_| KernelTransition::untrained(n_nodes, sigma))
                .collect::<Result<_>>()?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.actions.len();
        if n == 0 || self.transitions.len() != n {
            return Err(Error::IncompatiblePolicy(
                "need one transition function per node".into(),
            ));
        }
        let n_mas = self.actions[0].len();
        if self.actions.iter().any(|a| a.len() != n_mas) {
            return Err(Error::IncompatiblePolicy("nodes disagree on macro-actions".into()));
        }
        if self.transitions.iter().any(|t| t.n_classes() != n) {
            return Err(Error::IncompatiblePolicy(
                "transition outputs must cover all nodes".into(),
            ));
        }
        for t in &self.transitions {
            t.validate()?;
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.actions.len()
    }

    pub fn n_mas(&self) -> usize {
        self.actions[0].len()
    }

    /// Observation dimension seen by the trained transition functions.
    pub fn obs_dim(&self) -> Option<usize> {
        self.transitions.iter().find_map(|t| t.basis().first().map(Vec::len))
    }
}

impl Controller for SkFsaPolicy {
    fn num_nodes(&self) -> usize {
        self.actions.len()
    }

    fn select_ma(&self, node: usize, rng: &mut SimRng) -> Result<usize> {
        let d = self.actions.get(node).ok_or(Error::NodeOutOfRange {
            node,
            n_nodes: self.actions.len(),
        })?;
        Ok(d.sample(rng))
    }

    fn transition(&self, node: usize, observation: &[f64], rng: &mut SimRng) -> Result<usize> {
        let f = self.transitions.get(node).ok_or(Error::NodeOutOfRange {
            node,
            n_nodes: self.transitions.len(),
        })?;
        if observation.iter().any(|x| x.is_nan()) {
            return Err(Error::NanObservation);
        }
        Ok(f.predict(observation).sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.3).unwrap(), 1.0);
        let k = rbf_kernel(&[0.0, 0.0], &[0.6, 0.8], 1.0).unwrap();
        assert!((k - (-0.5f64).exp()).abs() < 1e-15);
        let k = rbf_kernel(&[0.0], &[10.0], 1.0).unwrap();
        assert!((k / 1.9287498479639178e-22 - 1.0).abs() < 1e-9);
        assert!(rbf_kernel(&[0.0], &[0.0], 0.0).is_err());
        assert!(rbf_kernel(&[0.0], &[0.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn feature_vector_examples() {
        assert_eq!(feature_vector(&[0.5], &[vec![0.5]], 1.0), vec![1.0, 1.0]);
        assert_eq!(
            feature_vector(&[1e6], &[vec![0.0], vec![1.0]], 1.0),
            vec![0.0, 0.0, 1.0]
        );
        let f = feature_vector(&[0.0], &[vec![-1.0], vec![1.0]], 0.7);
        assert_eq!(f[0], f[1]);
    }

    fn fitted() -> KernelTransition {
        KernelTransition::new(
            3,
            1.0,
            vec![vec![0.0], vec![2.0]],
            vec![5.0, -1.0, 0.0, 0.0, 4.0, 0.5, -2.0, 0.0, 0.0],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_predict_uniform() {
        let f = KernelTransition::new(4, 1.0, vec![vec![0.0]], vec![0.0; 8], 0.0).unwrap();
        assert_eq!(f.predict(&[3.0]).probs(), &[0.25; 4]);
        assert!((f.approx_entropy() - 4f64.ln()).abs() < 1e-12);
        assert!((KernelTransition::untrained(3, 1.0).unwrap().approx_entropy() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shift_invariance() {
        let f = fitted();
        let shifted: Vec<f64> = f
            .weights()
            .chunks(3)
            .flat_map(|w| w.iter().zip([1.5, -2.0, 0.25]).map(|(a, c)| a + c))
            .collect();
        let g = KernelTransition::new(3, 1.0, f.basis().to_vec(), shifted, 0.0).unwrap();
        for o in [-1.0, 0.0, 0.7, 2.0, 5.0] {
            for (a, b) in f.predict(&[o]).probs().iter().zip(g.predict(&[o]).probs()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn injection_bounds_and_composition() {
        let f = fitted();
        let g = f.inject(0.03).unwrap();
        for o in [0.0, 1.0, 2.0] {
            let p = g.predict(&[o]);
            assert!(p.probs().iter().all(|&x| x >= 0.01 - 1e-15));
        }
        assert!(g.approx_entropy() > f.approx_entropy());
        let h = g.inject(0.03).unwrap();
        assert!((h.mix() - (1.0 - 0.97f64 * 0.97)).abs() < 1e-15);
        let u = KernelTransition::untrained(3, 1.0).unwrap();
        assert_eq!(u.inject(0.5).unwrap().predict(&[0.0]), u.predict(&[0.0]));
        assert!(f.inject(0.0).is_err());
    }

    #[test]
    fn duplicated_basis_keeps_entropy() {
        let f = KernelTransition::new(2, 1.0, vec![vec![0.0]], vec![2.0, 0.0, 0.0, 0.0], 0.0).unwrap();
        let g = KernelTransition::new(
            2,
            1.0,
            vec![vec![0.0], vec![0.0]],
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            0.0,
        )
        .unwrap();
        assert!((f.approx_entropy() - g.approx_entropy()).abs() < 1e-12);
    }

    #[test]
    fn policy_validation() {
        let mut p = SkFsaPolicy::uniform(3, 4, 0.5).unwrap();
        p.validate().unwrap();
        p.transitions.pop();
        assert!(p.validate().is_err());
    }
}

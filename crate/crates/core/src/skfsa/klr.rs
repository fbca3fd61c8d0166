//! Weighted multinomial kernel logistic regression.

use std::cell::RefCell;
use std::collections::HashMap;

use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;

use super::queue::{FifoKernelQueue, SampleKey};
use super::{feature_vector, KernelTransition};
use crate::error::{invalid, Error, Result};

/// Gradient infinity-norm at which training stops.
pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITERS: u64 = 200;
const LBFGS_MEMORY: usize = 10;

/// Per-bundle training weights, oldest bundle first:
/// `w_1 = (1 - alpha)^(n - 1)`, `w_b = alpha (1 - alpha)^(n - b)`.
pub fn bundle_weights(n: usize, alpha: f64) -> Vec<f64> {
    (1..=n)
        .map(|b| {
            let decay = (1.0 - alpha).powi((n - b) as i32);
            if b == 1 {
                decay
            } else {
                alpha * decay
            }
        })
        .collect()
}

/// A weighted classification problem on precomputed kernel features.
#[derive(Debug, Clone)]
pub struct KlrProblem {
    /// Row-major `n_samples x n_features`, bias last.
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    sample_weights: Vec<f64>,
    n_classes: usize,
    lambda: f64,
}

impl KlrProblem {
    pub fn new(
        observations: &[Vec<f64>],
        labels: &[usize],
        sample_weights: &[f64],
        basis: &[Vec<f64>],
        sigma: f64,
        n_classes: usize,
        lambda: f64,
    ) -> Result<Self> {
        if observations.len() != labels.len() || labels.len() != sample_weights.len() {
            return Err(Error::LengthMismatch {
                expected: observations.len(),
                got: labels.len().min(sample_weights.len()),
            });
        }
        if n_classes == 0 {
            return Err(invalid("n_classes", "must be at least 1"));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::NodeOutOfRange {
                node: l,
                n_nodes: n_classes,
            });
        }
        if sample_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("sample_weights", "must be nonnegative"));
        }
        if !(lambda >= 0.0) {
            return Err(invalid("lambda", "must be nonnegative"));
        }
        if !(sigma > 0.0) {
            return Err(invalid("sigma", "must be positive"));
        }
        let n_features = basis.len() + 1;
        let mut features = Vec::with_capacity(observations.len() * n_features);
        for o in observations {
            features.extend(feature_vector(o, basis, sigma));
        }
        Ok(KlrProblem {
            features,
            n_features,
            labels: labels.to_vec(),
            sample_weights: sample_weights.to_vec(),
            n_classes,
            lambda,
        })
    }

    pub fn n_params(&self) -> usize {
        self.n_classes * self.n_features
    }

    /// Regularized weighted log-likelihood and its gradient.
    pub fn objective_and_gradient(&self, weights: &[f64], grad: &mut [f64]) -> f64 {
        let (c, p) = (self.n_classes, self.n_features);
        debug_assert_eq!(weights.len(), c * p);
        let mut value = 0.0;
        let mut scores = vec![0.0; c];
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (i, f) in self.features.chunks_exact(p).enumerate() {
            let w_i = self.sample_weights[i];
            if w_i == 0.0 {
                continue;
            }
            for (k, s) in scores.iter_mut().enumerate() {
                *s = dot(&weights[k * p..(k + 1) * p], f);
            }
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for s in scores.iter_mut() {
                *s = (*s - max).exp();
                z += *s;
            }
            let y = self.labels[i];
            value += w_i * (scores[y] / z).ln();
            for k in 0..c {
                let resid = if k == y { 1.0 } else { 0.0 } - scores[k] / z;
                let scale = w_i * resid;
                for (g, x) in grad[k * p..(k + 1) * p].iter_mut().zip(f) {
                    *g += scale * x;
                }
            }
        }
        for k in 0..c {
            for j in 0..p - 1 {
                let w = weights[k * p + j];
                value -= 0.5 * self.lambda * w * w;
                grad[k * p + j] -= self.lambda * w;
            }
        }
        value
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Objective and gradient of the weighted kernel logistic regression on a
/// training set of `(observation, label)` pairs.
#[allow(clippy::too_many_arguments)]
pub fn klr_objective_and_gradient(
    weights: &[f64],
    observations: &[Vec<f64>],
    labels: &[usize],
    sample_weights: &[f64],
    lambda: f64,
    basis: &[Vec<f64>],
    sigma: f64,
    n_classes: usize,
) -> Result<(f64, Vec<f64>)> {
    let problem = KlrProblem::new(observations, labels, sample_weights, basis, sigma, n_classes, lambda)?;
    if weights.len() != problem.n_params() {
        return Err(Error::LengthMismatch {
            expected: problem.n_params(),
            got: weights.len(),
        });
    }
    let mut grad = vec![0.0; weights.len()];
    let value = problem.objective_and_gradient(weights, &mut grad);
    Ok((value, grad))
}

/// Negated objective for the minimizer, caching the last evaluation since
/// the solver asks for cost and gradient separately.
struct Negated<'a> {
    problem: &'a KlrProblem,
    cache: RefCell<Option<(Vec<f64>, f64, Vec<f64>)>>,
}

impl Negated<'_> {
    fn eval(&self, w: &[f64]) -> (f64, Vec<f64>) {
        if let Some((cw, f, g)) = self.cache.borrow().as_ref() {
            if cw.as_slice() == w {
                return (*f, g.clone());
            }
        }
        let mut g = vec![0.0; w.len()];
        let f = -self.problem.objective_and_gradient(w, &mut g);
        g.iter_mut().for_each(|x| *x = -*x);
        *self.cache.borrow_mut() = Some((w.to_vec(), f, g.clone()));
        (f, g)
    }
}

impl CostFunction for Negated<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, w: &Vec<f64>) -> Result<f64, argmin::core::Error> {
        Ok(self.eval(w).0)
    }
}

impl Gradient for Negated<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, w: &Vec<f64>) -> Result<Vec<f64>, argmin::core::Error> {
        Ok(self.eval(w).1)
    }
}

/// Maximizes the objective by L-BFGS from `init`. Never returns weights
/// scoring below both `init` and the zero vector.
pub fn maximize(problem: &KlrProblem, init: Vec<f64>) -> Vec<f64> {
    let n = problem.n_params();
    let mut scratch = vec![0.0; n];
    let score = |w: &[f64], g: &mut [f64]| problem.objective_and_gradient(w, g);
    let zero = vec![0.0; n];
    let (start, start_value) = {
        let a = score(&init, &mut scratch);
        let z = score(&zero, &mut scratch);
        if a >= z {
            (init, a)
        } else {
            (zero, z)
        }
    };
    score(&start, &mut scratch);
    if scratch.iter().all(|g| g.abs() < GRAD_TOL) {
        return start;
    }

    let cost = Negated {
        problem,
        cache: RefCell::new(None),
    };
    let solver = LBFGS::new(MoreThuenteLineSearch::new(), LBFGS_MEMORY)
        .with_tolerance_grad(GRAD_TOL)
        .expect("positive tolerance");
    let solved = Executor::new(cost, solver)
        .configure(|s| s.param(start.clone()).max_iters(MAX_ITERS))
        .run();
    match solved {
        Ok(res) => match res.state.best_param {
            Some(w) if score(&w, &mut scratch) >= start_value => w,
            _ => start,
        },
        Err(_) => start,
    }
}

/// Fits the transition function of `node` to the queued samples, weighting
/// each sample by its bundle's weight.
///
/// `warm` supplies starting weights for basis points it shares with the new
/// fit; other entries start at zero. A node without samples gets an
/// untrained (uniform) function.
pub fn train_weighted_klr(
    queue: &FifoKernelQueue,
    node: usize,
    n_classes: usize,
    alpha: f64,
    sigma: f64,
    lambda: f64,
    warm: Option<&KernelTransition>,
) -> Result<KernelTransition> {
    let samples: Vec<_> = queue.samples_for_node(node).collect();
    if samples.is_empty() {
        return KernelTransition::untrained(n_classes, sigma);
    }
    let bw = bundle_weights(queue.len(), alpha);
    let basis: Vec<Vec<f64>> = samples.iter().map(|s| s.sample.observation.clone()).collect();
    let keys: Vec<SampleKey> = samples.iter().map(|s| s.key).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.sample.next_node).collect();
    let weights: Vec<f64> = samples.iter().map(|s| bw[s.position - 1]).collect();
    let problem = KlrProblem::new(&basis, &labels, &weights, &basis, sigma, n_classes, lambda)?;

    let p = basis.len() + 1;
    let mut init = vec![0.0; n_classes * p];
    if let Some(prev) = warm.filter(|w| w.n_classes() == n_classes) {
        let old_p = prev.basis().len() + 1;
        let index: HashMap<SampleKey, usize> = prev.keys().iter().enumerate().map(|(j, k)| (*k, j)).collect();
        for k in 0..n_classes {
            for (j, key) in keys.iter().enumerate() {
                if let Some(&oj) = index.get(key) {
                    init[k * p + j] = prev.weights()[k * old_p + oj];
                }
            }
            init[k * p + p - 1] = prev.weights()[k * old_p + old_p - 1];
        }
    }
    let w = maximize(&problem, init);
    KernelTransition::trained(n_classes, sigma, basis, keys, w)
}

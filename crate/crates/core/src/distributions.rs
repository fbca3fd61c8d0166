//! Categorical sampling distributions and the update rules used by the
//! cross-entropy searches: maximum-likelihood estimation, smoothed updates,
//! entropy, maximal-entropy injection, and the learning-rate / noise
//! schedules of the acceleration schemes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the sum of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Floor applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// A probability vector over `n >= 1` outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Categorical::new(probs)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.probs
    }
}

impl Categorical {
    /// Validates and wraps a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbabilities(format!("entry {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidProbabilities(format!("entries sum to {total}")));
        }
        Ok(Categorical { probs })
    }

    /// Builds a distribution from nonnegative weights by normalization.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidProbabilities("empty vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidProbabilities(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyCounts);
        }
        Ok(Categorical {
            probs: weights.iter().map(|w| (w / total).min(1.0)).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "categorical needs at least one outcome");
        Categorical {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, index: usize) -> Self {
        assert!(index < n, "point mass index out of range");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Categorical { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable outcome (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Draws an outcome index by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        // u landed in the rounding gap above the accumulated mass
        last_positive
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    /// Entropy divided by its maximum `ln n`; 0 for single-outcome supports.
    pub fn normalized_entropy(&self) -> f64 {
        if self.probs.len() < 2 {
            return 0.0;
        }
        entropy(self) / (self.probs.len() as f64).ln()
    }
}

fn check_lengths(a: &Categorical, b: &Categorical) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: b.len(),
            got: a.len(),
        });
    }
    Ok(())
}

fn check_rate(name: &'static str, value: f64, allow_zero: bool, allow_one: bool) -> Result<()> {
    let lo_ok = if allow_zero { value >= 0.0 } else { value > 0.0 };
    let hi_ok = if allow_one { value <= 1.0 } else { value < 1.0 };
    if !(lo_ok && hi_ok) || value.is_nan() {
        return Err(invalid(name, format!("{value} out of range")));
    }
    Ok(())
}

/// Renormalizes a nonnegative vector that is already close to the simplex.
fn renormalized(mut probs: Vec<f64>) -> Categorical {
    for p in probs.iter_mut() {
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    Categorical { probs }
}

/// Maximum-likelihood estimate of a categorical from outcome counts.
pub fn mle_categorical(counts: &[u64]) -> Result<Categorical> {
    if counts.is_empty() {
        return Err(Error::InvalidProbabilities("empty counts".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyCounts);
    }
    Ok(Categorical {
        probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
    })
}

/// Smoothed parameter update `alpha * new + (1 - alpha) * old`.
pub fn smooth_update(new: &Categorical, old: &Categorical, alpha: f64) -> Result<Categorical> {
    check_lengths(new, old)?;
    check_rate("alpha", alpha, false, true)?;
    Ok(renormalized(
        new.probs
            .iter()
            .zip(&old.probs)
            .map(|(n, o)| alpha * n + (1.0 - alpha) * o)
            .collect(),
    ))
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(params: &Categorical) -> f64 {
    let h: f64 = params
        .probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|&p| {
            let q = p.max(LOG_FLOOR);
            -q * q.ln()
        })
        .sum();
    // adding 0.0 turns the -0.0 of a point mass into 0.0
    h.clamp(0.0, (params.len() as f64).ln()) + 0.0
}

/// Smoothed update followed by mixing with the uniform distribution at rate
/// `alpha_ei`.
pub fn inject_max_entropy(new: &Categorical, old: &Categorical, alpha: f64, alpha_ei: f64) -> Result<Categorical> {
    check_rate("alpha_ei", alpha_ei, true, false)?;
    let smoothed = smooth_update(new, old, alpha)?;
    Ok(mix_uniform(&smoothed, alpha_ei))
}

/// `(1 - rate) * params + rate * uniform`.
pub fn mix_uniform(params: &Categorical, rate: f64) -> Categorical {
    let u = 1.0 / params.len() as f64;
    renormalized(params.probs.iter().map(|p| (1.0 - rate) * p + rate * u).collect())
}

/// Dynamically smoothed learning rate `alpha0 - alpha0 (1 - 1/k)^beta`.
pub fn dynamic_alpha(k: u64, alpha0: f64, beta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroIteration);
    }
    let decay = (1.0 - 1.0 / k as f64).powf(beta);
    Ok(alpha0 - alpha0 * decay)
}

/// Linearly decreasing noise level `max(omega_max - r k, 0)`.
pub fn linear_noise(k: u64, omega_max: f64, rate: f64) -> f64 {
    (omega_max - rate * k as f64).max(0.0)
}

/// Adds `omega` to every component and renormalizes.
pub fn add_noise(params: &Categorical, omega: f64) -> Categorical {
    if omega <= 0.0 {
        return params.clone();
    }
    renormalized(params.probs.iter().map(|p| p + omega).collect())
}

/// Convergence-acceleration scheme applied after each cross-entropy update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
#[derive(Default)]
pub enum AccelerationScheme {
    #[default]
    None,
    DynamicSmoothing {
        alpha0: f64,
        beta: f64,
    },
    NoiseInjection {
        omega_max: f64,
        rate: f64,
    },
    MaxEntropyInjection {
        alpha_ei: f64,
        #[serde(default = "default_tau_h")]
        tau_h: f64,
    },
}

/// Default degeneracy threshold on normalized entropy.
pub const DEFAULT_TAU_H: f64 = 0.1;

fn default_tau_h() -> f64 {
    DEFAULT_TAU_H
}

impl AccelerationScheme {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AccelerationScheme::None => Ok(()),
            AccelerationScheme::DynamicSmoothing { alpha0, beta } => {
                check_rate("alpha0", alpha0, false, true)?;
                if !(beta > 0.0) {
                    return Err(invalid("beta", format!("{beta} must be positive")));
                }
                Ok(())
            }
            AccelerationScheme::NoiseInjection { omega_max, rate } => {
                if !(omega_max >= 0.0) {
                    return Err(invalid("omega_max", "must be nonnegative"));
                }
                if !(rate >= 0.0) {
                    return Err(invalid("rate", "must be nonnegative"));
                }
                Ok(())
            }
            AccelerationScheme::MaxEntropyInjection { alpha_ei, tau_h } => {
                check_rate("alpha_ei", alpha_ei, false, false)?;
                check_rate("tau_h", tau_h, false, false)
            }
        }
    }

    /// Learning rate for (zero-based) iteration `k` given the base rate.
    pub fn learning_rate(&self, k: u64, alpha: f64) -> f64 {
        match *self {
            AccelerationScheme::DynamicSmoothing { alpha0, beta } => {
                dynamic_alpha(k + 1, alpha0, beta).expect("k + 1 >= 1")
            }
            _ => alpha,
        }
    }

    /// Additive noise for (zero-based) iteration `k`, if any.
    pub fn noise(&self, k: u64) -> f64 {
        match *self {
            AccelerationScheme::NoiseInjection { omega_max, rate } => linear_noise(k, omega_max, rate),
            _ => 0.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            AccelerationScheme::None => "none".into(),
            AccelerationScheme::DynamicSmoothing { alpha0, beta } => {
                format!("dynamic-smoothing({alpha0},{beta})")
            }
            AccelerationScheme::NoiseInjection { omega_max, rate } => {
                format!("noise-injection({omega_max},{rate})")
            }
            AccelerationScheme::MaxEntropyInjection { alpha_ei, .. } => {
                format!("entropy-injection({alpha_ei})")
            }
        }
    }
}

/// True when a distribution's normalized entropy is below `tau_h`.
pub fn is_degenerate(params: &Categorical, tau_h: f64) -> bool {
    params.len() > 1 && params.normalized_entropy() < tau_h
}

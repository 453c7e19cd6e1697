use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass below which a hypothesis is skipped when scoring queries.
pub const ALIVE_MASS: f64 = 1e-9;

/// Belief over `n` candidate graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Posterior {
    weights: Vec<f64>,
}

impl Posterior {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("posterior needs at least one hypothesis".into()));
        }
        Ok(Posterior {
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Input("weights must be finite, nonnegative and non-empty".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Input("weights sum to zero".into()));
        }
        Ok(Posterior {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Index of the largest mass; the lowest index wins ties.
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (k, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = k;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.weights[self.map_index()]
    }

    pub fn alive(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > ALIVE_MASS)
            .map(|(k, _)| k)
    }
}

/// Shannon entropy in bits.
pub fn entropy(pi: &Posterior) -> f64 {
    -pi.weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.log2())
        .sum::<f64>()
}

/// `P(r = 1)` when hypothesis `k` predicts `preds[k]` and the oracle errs
/// with probability `eta_eff`.
pub fn predictive_response_prob(pi: &Posterior, preds: &[bool], eta_eff: f64) -> f64 {
    pi.weights
        .iter()
        .zip(preds)
        .map(|(&w, &r)| w * if r { 1.0 - eta_eff } else { eta_eff })
        .sum()
}

/// Expected entropy reduction, in bits, from observing the noisy response.
pub fn information_gain(pi: &Posterior, preds: &[bool], eta_eff: f64) -> f64 {
    let p1 = predictive_response_prob(pi, preds, eta_eff);
    let h = entropy(pi);
    let mut expected = 0.0;
    for (r, pr) in [(1u8, p1), (0u8, 1.0 - p1)] {
        if pr <= 0.0 {
            continue;
        }
        if let Ok(post) = bayes_update(pi, preds, r, eta_eff) {
            expected += pr * entropy(&post);
        }
    }
    (h - expected).max(0.0)
}

/// `π_k ∝ π_k · (1−η) if preds[k] = r_obs, else π_k · η`.
pub fn bayes_update(pi: &Posterior, preds: &[bool], r_obs: u8, eta_eff: f64) -> Result<Posterior> {
    if preds.len() != pi.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} hypotheses",
            preds.len(),
            pi.len()
        )));
    }
    let obs = r_obs == 1;
    let weights: Vec<f64> = pi
        .weights
        .iter()
        .zip(preds)
        .map(|(&w, &r)| w * if r == obs { 1.0 - eta_eff } else { eta_eff })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Contradiction);
    }
    Ok(Posterior {
        weights: weights.into_iter().map(|w| w / total).collect(),
    })
}

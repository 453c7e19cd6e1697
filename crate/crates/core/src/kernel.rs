//! A positional-match surrogate kernel and the margin bound it implies for
//! near-identical premise encodings.
//!
//! `K(a, b)` is the fraction of positions at which two token sequences
//! agree, so `K(a, a) = 1` and the induced feature map is a scaled one-hot
//! encoding per position. Any linear scorer `w` with `‖w‖ <= B` separates
//! two inputs by at most `B·κ·√(2δ)`, where `δ = 1 - cos`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::indep::{render_premise, CiPolicy};

/// Fills the shorter sequence when lengths differ.
pub const PAD: &str = "<pad>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Input("token sequence must be non-empty".into()));
        }
        Ok(TokenSeq { tokens })
    }

    /// Whitespace tokens, lowercased.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::new(text.split_whitespace().map(str::to_lowercase).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    fn at(&self, i: usize) -> &str {
        self.tokens.get(i).map_or(PAD, String::as_str)
    }

    /// Length of the common prefix with `other`.
    pub fn shared_prefix(&self, other: &TokenSeq) -> usize {
        self.tokens
            .iter()
            .zip(&other.tokens)
            .take_while(|(a, b)| a == b)
            .count()
    }
}

/// `K(a, b) = |{t : a_t = b_t}| / L` over the padded length `L`.
pub fn surrogate_kernel(a: &TokenSeq, b: &TokenSeq) -> f64 {
    let l = a.len().max(b.len());
    let matches = (0..l).filter(|&i| a.at(i) == b.at(i)).count();
    matches as f64 / l as f64
}

/// `δ = 1 - K(a, b) / √(K(a, a)·K(b, b))`.
pub fn delta_similarity(a: &TokenSeq, b: &TokenSeq) -> Result<f64> {
    let (kaa, kbb) = (surrogate_kernel(a, a), surrogate_kernel(b, b));
    if kaa <= 0.0 || kbb <= 0.0 {
        return Err(Error::Input("zero self-similarity".into()));
    }
    Ok((1.0 - surrogate_kernel(a, b) / (kaa * kbb).sqrt()).clamp(0.0, 1.0))
}

/// Largest score gap `B·κ·√(2δ)` available to a norm-`B` linear scorer.
pub fn margin_bound(b_norm: f64, kappa: f64, delta: f64) -> f64 {
    b_norm * kappa * (2.0 * delta).sqrt()
}

/// Norm needed to reach margin `gamma`; infinite when `delta = 0`.
pub fn required_b(gamma: f64, kappa: f64, delta: f64) -> f64 {
    let denom = kappa * (2.0 * delta).sqrt();
    if denom == 0.0 {
        f64::INFINITY
    } else {
        gamma / denom
    }
}

/// A feature vector with a declared norm bound `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVec {
    pub coords: Vec<f64>,
    pub kappa: f64,
}

impl FeatureVec {
    pub fn new(coords: Vec<f64>, kappa: f64) -> Result<Self> {
        let v = FeatureVec { coords, kappa };
        if v.norm() > kappa * (1.0 + 1e-12) {
            return Err(Error::Input(format!("feature norm {} exceeds κ = {kappa}", v.norm())));
        }
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &FeatureVec) -> f64 {
        self.coords.iter().zip(&other.coords).map(|(a, b)| a * b).sum()
    }

    /// `1 - cos(self, other)`, computed as `‖â - b̂‖² / 2` on the unit
    /// vectors to stay accurate for nearly parallel pairs.
    pub fn delta(&self, other: &FeatureVec) -> Result<f64> {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return Err(Error::Input("zero feature vector".into()));
        }
        let sq: f64 = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a / na - b / nb).powi(2))
            .sum();
        Ok((sq / 2.0).clamp(0.0, 2.0))
    }
}

/// Explicit feature map of [`surrogate_kernel`]: one `1/√L`-scaled one-hot
/// block per position over the sorted joint vocabulary, so `⟨φ(a), φ(b)⟩ =
/// K(a, b)` and `κ = 1`.
pub fn surrogate_features(a: &TokenSeq, b: &TokenSeq) -> (FeatureVec, FeatureVec) {
    let l = a.len().max(b.len());
    let mut vocab: BTreeMap<&str, usize> = BTreeMap::new();
    for i in 0..l {
        vocab.insert(a.at(i), 0);
        vocab.insert(b.at(i), 0);
    }
    for (k, v) in vocab.values_mut().enumerate() {
        *v = k;
    }
    let scale = 1.0 / (l as f64).sqrt();
    let embed = |s: &TokenSeq| {
        let mut coords = vec![0.0; l * vocab.len()];
        for i in 0..l {
            coords[i * vocab.len() + vocab[s.at(i)]] = scale;
        }
        FeatureVec { coords, kappa: 1.0 }
    };
    (embed(a), embed(b))
}

/// `B·‖φ⁺ − φ⁻‖`: the gap reached by the unit direction along the difference.
pub fn max_achievable_margin(phi_plus: &FeatureVec, phi_minus: &FeatureVec, b_norm: f64) -> Result<f64> {
    if phi_plus.coords.len() != phi_minus.coords.len() {
        return Err(Error::Input("feature vectors differ in dimension".into()));
    }
    let diff: f64 = phi_plus
        .coords
        .iter()
        .zip(&phi_minus.coords)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(b_norm * diff.sqrt())
}

/// `ρ = 1 - cos` between two answer renderings.
pub fn interventional_rho(response_plus: &TokenSeq, response_minus: &TokenSeq) -> Result<f64> {
    delta_similarity(response_plus, response_minus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub delta: f64,
    pub kernel_cosine: f64,
    pub margin_bound: f64,
    pub achieved_margin: f64,
    pub required_b: f64,
}

pub fn similarity_report(a: &TokenSeq, b: &TokenSeq, b_norm: f64, gamma: f64) -> Result<SimilarityReport> {
    let delta = delta_similarity(a, b)?;
    let (pa, pb) = surrogate_features(a, b);
    Ok(SimilarityReport {
        delta,
        kernel_cosine: 1.0 - delta,
        margin_bound: margin_bound(b_norm, 1.0, delta),
        achieved_margin: max_achievable_margin(&pa, &pb, b_norm)?,
        required_b: required_b(gamma, 1.0, delta),
    })
}

/// Two graphs with identical observational premises but different
/// intervention effects, paired with reasoning chains that differ only in
/// the final word.
#[derive(Debug, Clone)]
pub struct NearMissPair {
    pub plus: Dag,
    pub minus: Dag,
    pub premise: String,
    pub plus_tokens: TokenSeq,
    pub minus_tokens: TokenSeq,
}

/// Chain `V1 → V2 → V3` versus fork `V1 ← V2 → V3`, with `V4..Vd` isolated.
pub fn near_miss_factory(d: usize) -> Result<NearMissPair> {
    if d < 3 {
        return Err(Error::Input(format!("near-miss pair needs d >= 3, got {d}")));
    }
    let names: Vec<String> = (1..=d).map(|i| format!("V{i}")).collect();
    let plus = Dag::new(names.clone(), &[(0, 1), (1, 2)])?;
    let minus = Dag::new(names, &[(1, 0), (1, 2)])?;
    let policy = CiPolicy::MinimalSeparators { max_size: 3 };
    let (premise, _) = render_premise(&plus, policy)?;
    let (other, _) = render_premise(&minus, policy)?;
    debug_assert_eq!(premise, other);
    let reasoning = |shape: &str| {
        format!(
            "{premise} V1 and V3 are dependent but independent given V2, \
             so the causal structure among V1, V2, and V3 is a {shape}."
        )
    };
    Ok(NearMissPair {
        plus_tokens: TokenSeq::from_text(&reasoning("chain"))?,
        minus_tokens: TokenSeq::from_text(&reasoning("fork"))?,
        plus,
        minus,
        premise,
    })
}

/// One row of the depth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub delta: f64,
    pub margin_bound: f64,
    pub required_b: f64,
    pub rho: f64,
}

/// Near-miss sweep with `B = 1`, `κ = 1`, `γ = 1`, and single-word yes/no
/// answers.
pub fn kernel_sweep(depths: impl IntoIterator<Item = usize>) -> Result<Vec<SweepRow>> {
    let yes = TokenSeq::from_text("yes")?;
    let no = TokenSeq::from_text("no")?;
    let rho = interventional_rho(&yes, &no)?;
    depths
        .into_iter()
        .map(|d| {
            let pair = near_miss_factory(d)?;
            let delta = delta_similarity(&pair.plus_tokens, &pair.minus_tokens)?;
            Ok(SweepRow {
                d,
                l: pair.plus_tokens.len().max(pair.minus_tokens.len()),
                delta,
                margin_bound: margin_bound(1.0, 1.0, delta),
                required_b: required_b(1.0, 1.0, delta),
                rho,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::discrimination_set;
    use crate::indep::markov_equivalent;

    fn seq(s: &str) -> TokenSeq {
        TokenSeq::from_text(s).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(surrogate_kernel(&seq("a b c"), &seq("a b c")), 1.0);
        assert_eq!(surrogate_kernel(&seq("a b"), &seq("c d")), 0.0);
        let a: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let mut b = a.clone();
        b[3] = "x".into();
        b[70] = "y".into();
        let (a, b) = (TokenSeq::new(a).unwrap(), TokenSeq::new(b).unwrap());
        assert!((surrogate_kernel(&a, &b) - 0.98).abs() < 1e-12);
        assert!((delta_similarity(&a, &b).unwrap() - 0.02).abs() < 1e-12);
        // padding counts as a mismatch
        assert!((surrogate_kernel(&seq("a b"), &seq("a")) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bound_values() {
        assert!((margin_bound(1.0, 1.0, 0.02) - 0.2).abs() < 1e-12);
        assert!((required_b(1.0, 1.0, 0.02) - 5.0).abs() < 1e-12);
        assert_eq!(margin_bound(1.0, 1.0, 0.0), 0.0);
        assert!(required_b(1.0, 1.0, 0.0).is_infinite());
        assert!((margin_bound(1.0, 1.0, 0.00347) - 0.0833).abs() < 1e-4);
    }

    #[test]
    fn features_reproduce_the_kernel() {
        let (a, b) = (seq("x y z w"), seq("x q z"));
        let (pa, pb) = surrogate_features(&a, &b);
        assert!((pa.dot(&pb) - surrogate_kernel(&a, &b)).abs() < 1e-12);
        assert!((pa.norm() - 1.0).abs() < 1e-12);
        let m = max_achievable_margin(&pa, &pb, 1.0).unwrap();
        let bound = margin_bound(1.0, 1.0, delta_similarity(&a, &b).unwrap());
        assert!((m - bound).abs() < 1e-12);
        assert_eq!(max_achievable_margin(&pa, &pa, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn unequal_norms_can_exceed_the_equal_norm_bound() {
        // ‖Δ‖² = (a − b)² + 2ab·δ, which exceeds 2κ²δ for nearly parallel
        // vectors of different lengths
        let p = FeatureVec::new(vec![1.0, 0.0], 1.0).unwrap();
        let q = FeatureVec::new(vec![0.5, 0.01], 1.0).unwrap();
        let delta = p.delta(&q).unwrap();
        let (a, b) = (p.norm(), q.norm());
        let diff = max_achievable_margin(&p, &q, 1.0).unwrap();
        assert!((diff * diff - ((a - b).powi(2) + 2.0 * a * b * delta)).abs() < 1e-12);
        assert!(diff > margin_bound(1.0, 1.0, delta));
    }

    #[test]
    fn yes_no_rho() {
        assert_eq!(interventional_rho(&seq("yes"), &seq("no")).unwrap(), 1.0);
        assert_eq!(interventional_rho(&seq("yes"), &seq("yes")).unwrap(), 0.0);
    }

    #[test]
    fn three_variable_near_miss() {
        let pair = near_miss_factory(3).unwrap();
        // same premise, different interventional behaviour
        assert!(markov_equivalent(&pair.plus, &pair.minus).unwrap());
        assert_ne!(pair.plus, pair.minus);
        assert!(!discrimination_set(&pair.plus, &pair.minus).unwrap().is_empty());
        let l = pair.plus_tokens.len();
        assert_eq!(pair.plus_tokens.shared_prefix(&pair.minus_tokens), l - 1);
        assert!((delta_similarity(&pair.plus_tokens, &pair.minus_tokens).unwrap() - 1.0 / l as f64).abs() < 1e-12);
        assert!(near_miss_factory(2).is_err());
    }

    #[test]
    fn sweep_is_monotone() {
        let rows = kernel_sweep(3..=12).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].delta < w[0].delta);
            assert!(w[1].required_b > w[0].required_b);
            assert_eq!(w[1].rho, w[0].rho);
        }
    }
}

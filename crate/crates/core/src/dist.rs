//! Probability mass functions over real outcomes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on total probability mass for a distribution to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution has no outcomes")]
    Empty,
    #[error("values and probs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("probability {0} at index {1} is negative or not finite")]
    InvalidProbability(f64, usize),
    #[error("value {0} at index {1} is not finite")]
    NonFiniteValue(f64, usize),
    #[error("values must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("total probability is {0}, expected 1")]
    Unnormalized(f64),
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().total()
}

#[derive(Deserialize)]
struct RawDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
}

/// A finite probability mass function with strictly increasing support.
///
/// Distributions built with [`DiscreteDistribution::new`] or deserialized from JSON
/// are normalized to within [`NORMALIZATION_TOL`]. [`DiscreteDistribution::unnormalized`]
/// skips that check for partial masses such as truncated tails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution")]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RawDistribution> for DiscreteDistribution {
    type Error = DistributionError;

    fn try_from(raw: RawDistribution) -> Result<Self, Self::Error> {
        DiscreteDistribution::new(raw.values, raw.probs)
    }
}

impl DiscreteDistribution {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        let dist = Self::unnormalized(values, probs)?;
        let mass = dist.total_mass();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DistributionError::Unnormalized(mass));
        }
        Ok(dist)
    }

    /// Validates support and non-negativity but not total mass.
    pub fn unnormalized(values: Vec<f64>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        if values.len() != probs.len() {
            return Err(DistributionError::LengthMismatch(values.len(), probs.len()));
        }
        if values.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (i, (&v, &p)) in values.iter().zip(&probs).enumerate() {
            if !v.is_finite() {
                return Err(DistributionError::NonFiniteValue(v, i));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(DistributionError::InvalidProbability(p, i));
            }
            if i > 0 && values[i - 1] >= v {
                return Err(DistributionError::NotIncreasing(i));
            }
        }
        Ok(Self { values, probs })
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Self {
        Self {
            values: vec![value],
            probs: vec![1.0],
        }
    }

    /// Builds a distribution from unordered `(value, weight)` pairs, merging values
    /// closer than `merge_tol * max(1, |v|)`. Weights are not renormalized.
    pub fn from_weighted(mut pairs: Vec<(f64, f64)>, merge_tol: f64) -> Self {
        pairs.retain(|&(_, p)| p > 0.0);
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<CompensatedSum> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match values.last() {
                Some(&last) if (v - last).abs() <= merge_tol * last.abs().max(v.abs()).max(1.0) => {
                    probs.last_mut().expect("parallel vectors").add(p);
                }
                _ => {
                    values.push(v);
                    let mut acc = CompensatedSum::new();
                    acc.add(p);
                    probs.push(acc);
                }
            }
        }
        if values.is_empty() {
            return Self {
                values: vec![0.0],
                probs: vec![0.0],
            };
        }
        Self {
            values,
            probs: probs.iter().map(CompensatedSum::total).collect(),
        }
    }

    /// Empirical distribution of a sample, with exact-value bins.
    pub fn empirical(samples: &[f64]) -> Self {
        let w = 1.0 / samples.len().max(1) as f64;
        Self::from_weighted(samples.iter().map(|&x| (x, w)).collect(), 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.probs.iter().copied())
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= NORMALIZATION_TOL
    }

    /// `E[f(X)]`, accumulated with compensated summation.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        compensated_sum(self.iter().map(|(v, p)| p * f(v)))
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|v| v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expectation(|v| (v - m) * (v - m))
    }

    /// `P[X < t]`.
    pub fn prob_below(&self, t: f64) -> f64 {
        compensated_sum(self.iter().take_while(|&(v, _)| v < t).map(|(_, p)| p))
    }

    /// `P[X <= t]`.
    pub fn prob_at_most(&self, t: f64) -> f64 {
        compensated_sum(self.iter().take_while(|&(v, _)| v <= t).map(|(_, p)| p))
    }

    /// Probability of the outcome equal to `v` (within `tol`), or 0.
    pub fn prob_of(&self, v: f64, tol: f64) -> f64 {
        self.iter()
            .filter(|&(x, _)| (x - v).abs() <= tol)
            .map(|(_, p)| p)
            .sum()
    }

    /// Distribution of `X + shift * B` with `B ~ Bernoulli(p)` independent of `X`.
    pub fn add_bernoulli(&self, shift: f64, p: f64, merge_tol: f64) -> Self {
        if shift == 0.0 || p == 0.0 {
            return self.clone();
        }
        let mut pairs = Vec::with_capacity(2 * self.len());
        for (v, q) in self.iter() {
            pairs.push((v, q * (1.0 - p)));
            pairs.push((v + shift, q * p));
        }
        Self::from_weighted(pairs, merge_tol)
    }
}

/// Distribution of the number of successes among independent Bernoulli trials with
/// the given success probabilities (Poisson-binomial), by sequential convolution.
///
/// Entry `k` of the result is `P[sum = k]`.
pub fn bernoulli_convolution(success: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &f in success {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &q) in pmf.iter().enumerate() {
            next[k] += q * (1.0 - f);
            next[k + 1] += q * f;
        }
        pmf = next;
    }
    pmf
}

/// Shannon entropy in nats of a (possibly unnormalized) weight vector, `0 ln 0 = 0`.
pub fn shannon_entropy(weights: impl IntoIterator<Item = f64>) -> f64 {
    compensated_sum(
        weights
            .into_iter()
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln()),
    )
}

/// Binary entropy `H(p)` in nats.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy([p, 1.0 - p])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            DiscreteDistribution::new(vec![], vec![]),
            Err(DistributionError::Empty)
        );
        assert!(matches!(
            DiscreteDistribution::new(vec![0.0, 0.0], vec![0.5, 0.5]),
            Err(DistributionError::NotIncreasing(1))
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![0.0, 1.0], vec![0.5, 0.6]),
            Err(DistributionError::Unnormalized(_))
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![0.0, 1.0], vec![1.5, -0.5]),
            Err(DistributionError::InvalidProbability(_, 1))
        ));
    }

    #[test]
    fn merges_nearby_values() {
        let d = DiscreteDistribution::from_weighted(
            vec![(1.0, 0.25), (0.0, 0.5), (1.0 + 1e-15, 0.25)],
            1e-12,
        );
        assert_eq!(d.values(), &[0.0, 1.0]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn json_roundtrip_validates() {
        let d = DiscreteDistribution::new(vec![0.0, 2.0], vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        let back: DiscreteDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);
        let bad = r#"{"values":[0.0,1.0],"probs":[0.3,0.3]}"#;
        assert!(serde_json::from_str::<DiscreteDistribution>(bad).is_err());
    }

    #[test]
    fn bernoulli_convolution_small_case() {
        let pmf = bernoulli_convolution(&[0.5, 0.5]);
        assert_eq!(pmf, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn tail_probabilities() {
        let d = DiscreteDistribution::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(d.prob_below(1.0), 0.2);
        assert_eq!(d.prob_at_most(1.0), 0.5);
        assert!((d.mean() - 1.3).abs() < 1e-15);
    }
}

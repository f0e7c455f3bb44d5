//! Probability vectors over actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type ActionId = usize;

const SUM_TOLERANCE: f64 = 1e-9;

/// A categorical distribution over arms. Entries are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolicyDistribution {
    probs: Vec<f64>,
}

impl PolicyDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::invalid("distribution has no entries"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::invalid(format!("probs[{i}] = {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("distribution has no entries"));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
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
}

impl TryFrom<Vec<f64>> for PolicyDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<PolicyDistribution> for Vec<f64> {
    fn from(d: PolicyDistribution) -> Self {
        d.probs
    }
}

/// Numerically stable softmax; the maximum score is subtracted before exponentiating.
pub fn softmax(scores: &[f64]) -> Result<PolicyDistribution> {
    if scores.is_empty() {
        return Err(Error::invalid("softmax of an empty score vector"));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!("score[{i}] = {} is not finite", scores[i])));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(PolicyDistribution {
        probs: exps.into_iter().map(|e| e / z).collect(),
    })
}

/// Samples an index with probability `probs[i]` using exactly one uniform draw.
///
/// The cumulative sum is scanned left to right; if rounding leaves the draw
/// past the final cumulative value, the last positive-probability arm is used.
pub fn sample_categorical(dist: &PolicyDistribution, rng: &mut RngStream) -> ActionId {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.probs
        .iter()
        .rposition(|p| *p > 0.0)
        .unwrap_or(dist.probs.len() - 1)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> ActionId {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let d = softmax(&[0.0; 4]).unwrap();
        assert!(close(d.probs(), &[0.25; 4], 1e-15));
    }

    #[test]
    fn softmax_two_arm_closed_form() {
        let e = std::f64::consts::E;
        let d = softmax(&[1.0, 0.0]).unwrap();
        assert!(close(d.probs(), &[e / (e + 1.0), 1.0 / (e + 1.0)], 1e-15));
        assert!((d.probs()[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn softmax_large_scores_do_not_overflow() {
        let d = softmax(&[1000.0, 1000.0]).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(softmax(&[]), Err(Error::InvalidInput(_))));
        assert!(softmax(&[0.0, f64::NAN]).is_err());
        assert!(softmax(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(PolicyDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(PolicyDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(PolicyDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(PolicyDistribution::new(vec![]).is_err());
    }

    #[test]
    fn degenerate_distribution_always_first() {
        let d = PolicyDistribution::new(vec![1.0, 0.0, 0.0]).unwrap();
        let mut rng = RngStream::new(9);
        assert!((0..1000).all(|_| sample_categorical(&d, &mut rng) == 0));
    }

    fn empirical(d: &PolicyDistribution, draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed);
        let mut counts = vec![0usize; d.len()];
        for _ in 0..draws {
            counts[sample_categorical(d, &mut rng)] += 1;
        }
        counts.iter().map(|c| *c as f64 / draws as f64).collect()
    }

    #[test]
    fn categorical_fair_coin() {
        let d = PolicyDistribution::new(vec![0.5, 0.5]).unwrap();
        let f = empirical(&d, 100_000, 1);
        assert!((0.49..=0.51).contains(&f[0]), "{f:?}");
    }

    #[test]
    fn categorical_three_way() {
        let d = PolicyDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = empirical(&d, 100_000, 2);
        assert!(close(&f, d.probs(), 0.01), "{f:?}");
    }

    #[test]
    fn categorical_consumes_one_draw() {
        let d = PolicyDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut a = RngStream::new(4);
        let mut b = RngStream::new(4);
        sample_categorical(&d, &mut a);
        b.uniform();
        assert_eq!(a.uniform(), b.uniform());
    }

    #[test]
    fn argmax_ties_break_low() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
        assert_eq!(argmax(&[-1.0, -2.0]), 0);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(scores in prop::collection::vec(-500.0f64..500.0, 1..16)) {
            let d = softmax(&scores).unwrap();
            prop_assert!(d.probs().iter().all(|p| *p >= 0.0));
            let sum: f64 = d.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert_eq!(d.len(), scores.len());
        }

        #[test]
        fn softmax_shift_invariant(
            scores in prop::collection::vec(-50.0f64..50.0, 1..12),
            c in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            let a = softmax(&scores).unwrap();
            let b = softmax(&shifted).unwrap();
            prop_assert!(close(a.probs(), b.probs(), 1e-12));
        }
    }
}

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

/// Stationary distribution of the volume found at a price level when it is
/// revealed by a queue depletion.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthDistribution {
    support: Vec<u64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DepthDistribution {
    pub fn new(support: Vec<u64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(invalid("depth distribution needs matching, non-empty support and weights"));
        }
        if support.iter().any(|&s| s == 0) {
            return Err(invalid("depth distribution support must be positive"));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("depth weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("depth weights must not all be zero"));
        }
        let mut pairs: Vec<(u64, f64)> = support.into_iter().zip(weights.into_iter().map(|w| w / total)).collect();
        pairs.sort_by_key(|p| p.0);
        // merge duplicate support points
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(pairs.len());
        for (s, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 += w,
                _ => merged.push((s, w)),
            }
        }
        let support: Vec<u64> = merged.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = merged.iter().map(|p| p.1).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Self { support, weights, cumulative })
    }

    /// Empirical histogram of observed depths; zero depths are ignored.
    pub fn from_samples(samples: &[u64]) -> Result<Self> {
        let mut sorted: Vec<u64> = samples.iter().copied().filter(|&s| s > 0).collect();
        if sorted.is_empty() {
            return Err(invalid("no positive depth samples"));
        }
        sorted.sort_unstable();
        let mut support = Vec::new();
        let mut weights = Vec::new();
        for s in sorted {
            if support.last() == Some(&s) {
                *weights.last_mut().unwrap() += 1.0;
            } else {
                support.push(s);
                weights.push(1.0);
            }
        }
        Self::new(support, weights)
    }

    pub fn constant(depth: u64) -> Result<Self> {
        Self::new(vec![depth], vec![1.0])
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().zip(&self.weights).map(|(&s, &w)| s as f64 * w).sum()
    }

    /// One uniform draw, inverted through the cumulative weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let k = self.cumulative.partition_point(|&c| c <= u);
        self.support[k.min(self.support.len() - 1)]
    }
}

#[derive(Serialize, Deserialize)]
struct DepthDoc {
    support: Vec<u64>,
    weights: Vec<f64>,
}

impl Serialize for DepthDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DepthDoc { support: self.support.clone(), weights: self.weights.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DepthDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = DepthDoc::deserialize(d)?;
        DepthDistribution::new(doc.support, doc.weights).map_err(serde::de::Error::custom)
    }
}

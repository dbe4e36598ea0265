//! Order-size distributions: point masses at round numbers on top of a
//! geometric body on {1, 2, ...}.
//!
//! ```text
//! pmf(k) = w_k·1[k ∈ spikes] + w_body·p·(1 − p)^(k−1)
//! ```
//!
//! Fitting is EM on the two-component mixture, working on the histogram of
//! observed sizes so each iteration is linear in the number of distinct
//! values.

use std::collections::BTreeMap;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::event::{EventType, OrderKind};

pub const DEFAULT_SPIKES: [u64; 6] = [1, 10, 50, 100, 200, 500];
pub const DEFAULT_MIN_SAMPLES: usize = 100;

const EM_TOL: f64 = 1e-10;
const EM_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SizeDistribution {
    spike_points: Vec<u64>,
    spike_weights: Vec<f64>,
    body_weight: f64,
    geom_p: f64,
}

impl SizeDistribution {
    pub fn new(spike_points: Vec<u64>, spike_weights: Vec<f64>, body_weight: f64, geom_p: f64) -> Result<Self> {
        if spike_points.len() != spike_weights.len() {
            return Err(invalid("spike points and weights differ in length"));
        }
        if spike_points.iter().any(|&k| k == 0) || spike_points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("spike points must be positive and strictly ascending"));
        }
        if spike_weights.iter().chain([&body_weight]).any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(invalid("size weights must be finite and non-negative"));
        }
        let total: f64 = spike_weights.iter().sum::<f64>() + body_weight;
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("size weights sum to {total}, expected 1")));
        }
        if !(geom_p > 0.0 && geom_p <= 1.0) {
            return Err(invalid(format!("geometric parameter must lie in (0, 1], got {geom_p}")));
        }
        Ok(Self { spike_points, spike_weights, body_weight, geom_p })
    }

    /// Geometric sizes only.
    pub fn geometric(p: f64) -> Result<Self> {
        Self::new(DEFAULT_SPIKES.to_vec(), vec![0.0; DEFAULT_SPIKES.len()], 1.0, p)
    }

    /// Every order has the same size.
    pub fn constant(size: u64) -> Result<Self> {
        let mut points = DEFAULT_SPIKES.to_vec();
        if !points.contains(&size) {
            points.push(size);
            points.sort_unstable();
        }
        let weights = points.iter().map(|&k| if k == size { 1.0 } else { 0.0 }).collect();
        Self::new(points, weights, 0.0, 1.0)
    }

    pub fn spike_points(&self) -> &[u64] {
        &self.spike_points
    }

    pub fn spike_weights(&self) -> &[f64] {
        &self.spike_weights
    }

    pub fn spike_weight(&self, k: u64) -> f64 {
        self.spike_points.iter().position(|&s| s == k).map_or(0.0, |i| self.spike_weights[i])
    }

    pub fn body_weight(&self) -> f64 {
        self.body_weight
    }

    pub fn geom_p(&self) -> f64 {
        self.geom_p
    }

    pub fn body_pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        if self.geom_p == 1.0 {
            return if k == 1 { 1.0 } else { 0.0 };
        }
        self.geom_p * ((k - 1) as f64 * (1.0 - self.geom_p).ln()).exp()
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.spike_weight(k) + self.body_weight * self.body_pmf(k)
    }

    pub fn mean(&self) -> f64 {
        let spikes: f64 = self.spike_points.iter().zip(&self.spike_weights).map(|(&k, &w)| k as f64 * w).sum();
        spikes + self.body_weight / self.geom_p
    }

    /// One uniform picks the component; a second inverts the geometric CDF
    /// when the body is chosen.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (&k, &w) in self.spike_points.iter().zip(&self.spike_weights) {
            acc += w;
            if u < acc {
                return k;
            }
        }
        if self.body_weight == 0.0 {
            // rounding left u above the spike total
            return self.spike_points[self.spike_weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)];
        }
        if self.geom_p == 1.0 {
            return 1;
        }
        let v: f64 = rng.gen();
        let k = ((1.0 - v).ln() / (1.0 - self.geom_p).ln()).floor();
        if k.is_finite() && k < 1e18 {
            1 + k as u64
        } else {
            u64::MAX / 2
        }
    }

    pub fn log_likelihood(&self, hist: &BTreeMap<u64, u64>) -> f64 {
        hist.iter().map(|(&k, &c)| c as f64 * self.pmf(k).ln()).sum()
    }
}

/// Maximum-likelihood fit with the default spike set and sample floor.
pub fn fit_sizes(samples: &[u64]) -> Result<SizeDistribution> {
    fit_sizes_with(samples, &DEFAULT_SPIKES, DEFAULT_MIN_SAMPLES).map(|f| f.dist)
}

#[derive(Debug, Clone)]
pub struct SizeFit {
    pub dist: SizeDistribution,
    /// Log-likelihood after each EM iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub fn fit_sizes_with(samples: &[u64], spikes: &[u64], min_samples: usize) -> Result<SizeFit> {
    if samples.len() < min_samples {
        return Err(Error::InsufficientData(format!(
            "{} size samples, need at least {min_samples}",
            samples.len()
        )));
    }
    if samples.iter().any(|&s| s == 0) {
        return Err(invalid("order sizes must be at least 1"));
    }
    let mut spikes = spikes.to_vec();
    spikes.sort_unstable();
    spikes.dedup();
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in samples {
        *hist.entry(s).or_default() += 1;
    }
    let n = samples.len() as f64;

    if hist.len() == 1 {
        let (&v, _) = hist.iter().next().unwrap();
        let dist = if spikes.contains(&v) {
            let weights = spikes.iter().map(|&k| if k == v { 1.0 } else { 0.0 }).collect();
            SizeDistribution::new(spikes, weights, 0.0, 1.0)?
        } else {
            // a single value off the spike set can only come from the body
            SizeDistribution::new(spikes.clone(), vec![0.0; spikes.len()], 1.0, 1.0 / v as f64)?
        };
        let ll = dist.log_likelihood(&hist);
        return Ok(SizeFit { dist, trace: vec![ll], converged: true });
    }

    let mean = samples.iter().map(|&s| s as f64).sum::<f64>() / n;
    let mut weights: Vec<f64> = spikes
        .iter()
        .map(|k| 0.5 * hist.get(k).copied().unwrap_or(0) as f64 / n)
        .collect();
    let mut body = 1.0 - weights.iter().sum::<f64>();
    let mut p = (1.0 / mean).clamp(1e-9, 1.0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last = f64::NEG_INFINITY;

    for _ in 0..EM_MAX_ITER {
        let dist = SizeDistribution { spike_points: spikes.clone(), spike_weights: weights.clone(), body_weight: body, geom_p: p };
        let ll = dist.log_likelihood(&hist);
        trace.push(ll);
        if (ll - last).abs() / n < EM_TOL {
            converged = true;
            break;
        }
        last = ll;

        // E step: share of each observed value attributed to the body
        let mut body_count = 0.0;
        let mut body_sum = 0.0;
        let mut spike_counts = vec![0.0; spikes.len()];
        for (&k, &c) in &hist {
            let c = c as f64;
            let b = body * dist.body_pmf(k);
            let r = match spikes.iter().position(|&s| s == k) {
                Some(idx) => {
                    let s = weights[idx];
                    let r = if b + s > 0.0 { b / (b + s) } else { 0.0 };
                    spike_counts[idx] += c * (1.0 - r);
                    r
                }
                None => 1.0,
            };
            body_count += c * r;
            body_sum += c * r * k as f64;
        }
        // M step
        weights = spike_counts.iter().map(|c| c / n).collect();
        body = body_count / n;
        if body_sum > 0.0 {
            p = (body_count / body_sum).clamp(1e-12, 1.0);
        }
    }
    if !converged {
        warn!("size EM stopped after {EM_MAX_ITER} iterations without converging");
    }
    // renormalise against accumulated rounding
    let total = weights.iter().sum::<f64>() + body;
    let weights = weights.iter().map(|w| w / total).collect();
    let dist = SizeDistribution::new(spikes, weights, body / total, p)?;
    Ok(SizeFit { dist, trace, converged })
}

#[derive(Serialize, Deserialize)]
struct SizeDoc {
    spike_points: Vec<u64>,
    spike_weights: Vec<f64>,
    body_weight: f64,
    geom_p: f64,
}

impl Serialize for SizeDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SizeDoc {
            spike_points: self.spike_points.clone(),
            spike_weights: self.spike_weights.clone(),
            body_weight: self.body_weight,
            geom_p: self.geom_p,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SizeDistribution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SizeDoc::deserialize(d)?;
        SizeDistribution::new(doc.spike_points, doc.spike_weights, doc.body_weight, doc.geom_p)
            .map_err(serde::de::Error::custom)
    }
}

/// Size distributions for the limit and market order dimensions, keyed by
/// event type. Cancel dimensions carry none.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SizeTable {
    dists: BTreeMap<EventType, SizeDistribution>,
}

impl SizeTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// The same distribution for every limit and market order dimension.
    pub fn uniform(dist: SizeDistribution) -> Self {
        let mut t = Self::new();
        for e in EventType::ALL {
            if e.kind() != OrderKind::Cancel {
                t.dists.insert(e, dist.clone());
            }
        }
        t
    }

    pub fn insert(&mut self, e: EventType, dist: SizeDistribution) -> Result<()> {
        if e.kind() == OrderKind::Cancel {
            return Err(invalid(format!("{e} sizes come from the book, not a distribution")));
        }
        self.dists.insert(e, dist);
        Ok(())
    }

    pub fn get(&self, e: EventType) -> Option<&SizeDistribution> {
        self.dists.get(&e)
    }

    /// Fails unless every limit and market dimension has a distribution.
    pub fn check_complete(&self) -> Result<()> {
        for e in EventType::ALL {
            if e.kind() != OrderKind::Cancel && !self.dists.contains_key(&e) {
                return Err(invalid(format!("no size distribution for {e}")));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EventType, &SizeDistribution)> {
        self.dists.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mixed() -> SizeDistribution {
        SizeDistribution::new(DEFAULT_SPIKES.to_vec(), vec![0.05, 0.03, 0.04, 0.4, 0.08, 0.02], 0.38, 0.02).unwrap()
    }

    #[test]
    fn pmf_has_unit_mass() {
        let d = mixed();
        let head: f64 = (1..=1_000_000u64).map(|k| d.pmf(k)).sum();
        // closed-form geometric remainder beyond 10^6
        let tail = d.body_weight() * (1.0 - d.geom_p()).powf(1_000_000.0);
        assert!((head + tail - 1.0).abs() < 1e-9);
        assert!((1..1000).all(|k| d.pmf(k) >= 0.0));
    }

    #[test]
    fn degenerate_samples() {
        let d = fit_sizes(&[100; 500]).unwrap();
        assert_eq!(d.spike_weight(100), 1.0);
        assert_eq!(d.body_weight(), 0.0);
        assert!(d.spike_points().iter().filter(|&&k| k != 100).all(|&k| d.spike_weight(k) == 0.0));
        let off = fit_sizes(&[37; 500]).unwrap();
        assert_eq!(off.body_weight(), 1.0);
        assert!((off.geom_p() - 1.0 / 37.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples_refused() {
        assert!(matches!(fit_sizes(&[1, 2, 3]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn point_mass_always_samples_its_point() {
        let d = SizeDistribution::new(DEFAULT_SPIKES.to_vec(), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..10_000).all(|_| d.sample(&mut rng) == 1));
    }

    #[test]
    fn em_likelihood_is_monotone() {
        let d = mixed();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<u64> = (0..20_000).map(|_| d.sample(&mut rng)).collect();
        let fit = fit_sizes_with(&samples, &DEFAULT_SPIKES, 100).unwrap();
        assert!(fit.converged);
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn table_json_is_keyed_by_event_name() {
        let t = SizeTable::uniform(SizeDistribution::geometric(0.1).unwrap());
        let v = serde_json::to_value(&t).unwrap();
        assert!(v.get("MO_bid0").is_some());
        assert!(v.get("CO_ask0").is_none());
        assert_eq!(v["LO_ask0"]["geom_p"], 0.1);
        let back: SizeTable = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
        t.check_complete().unwrap();
    }
}

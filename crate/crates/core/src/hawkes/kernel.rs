//! Excitation kernels φ(t), t ≥ 0.
//!
//! ```text
//! Exponential    φ(t) = α·exp(−β·t)                 norm = α/β
//! PowerLaw       φ(t) = α·(1 + t/δ)^(−γ), γ > 1     norm = α·δ/(γ−1)
//! NonParametric  φ(t) = v_c  for t in [e_c, e_{c+1})  norm = Σ v_c·(e_{c+1} − e_c)
//! ```
//!
//! α and the tabulated values may be negative (inhibition); nothing in this
//! module clips them.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Exponential { alpha: f64, beta: f64 },
    PowerLaw { alpha: f64, delta: f64, gamma: f64 },
    NonParametric(Tabulated),
}

/// Piecewise-constant kernel on a strictly ascending grid of cell edges.
/// Outside `[edges[0], edges[last])` the kernel is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    edges: Vec<f64>,
    values: Vec<f64>,
    // sup over cells c' >= c of max(values[c'], 0)
    positive_suffix: Vec<f64>,
}

impl Tabulated {
    pub fn new(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || values.len() + 1 != edges.len() {
            return Err(invalid(format!(
                "tabulated kernel needs n+1 edges for n values (got {} edges, {} values)",
                edges.len(),
                values.len()
            )));
        }
        if !(edges[0] >= 0.0) {
            return Err(invalid("tabulated kernel grid must start at t >= 0"));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges.iter().any(|e| !e.is_finite()) {
            return Err(invalid("tabulated kernel grid must be strictly ascending and finite"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("tabulated kernel values must be finite"));
        }
        let mut positive_suffix = vec![0.0; values.len()];
        let mut running = 0.0f64;
        for c in (0..values.len()).rev() {
            running = running.max(values[c]);
            positive_suffix[c] = running;
        }
        Ok(Self { edges, values, positive_suffix })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_end(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    fn cell_of(&self, t: f64) -> Option<usize> {
        if t < self.edges[0] || t >= self.support_end() {
            return None;
        }
        // first edge strictly greater than t, minus one
        Some(self.edges.partition_point(|&e| e <= t) - 1)
    }

    fn value(&self, t: f64) -> f64 {
        self.cell_of(t).map_or(0.0, |c| self.values[c])
    }

    fn primitive(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (c, v) in self.values.iter().enumerate() {
            let (lo, hi) = (self.edges[c], self.edges[c + 1]);
            if t <= lo {
                break;
            }
            acc += v * (t.min(hi) - lo);
        }
        acc
    }

    fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.edges.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum()
    }

    fn positive_sup_from(&self, t: f64) -> f64 {
        if t >= self.support_end() {
            return 0.0;
        }
        let c = self.cell_of(t).unwrap_or(0);
        self.positive_suffix[c]
    }

    fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if a < self.edges[0] || b >= self.support_end() {
            lo = 0.0;
            hi = 0.0;
        }
        let first = self.edges.partition_point(|&e| e <= a).saturating_sub(1);
        for c in first..self.values.len() {
            if self.edges[c] > b {
                break;
            }
            if self.edges[c + 1] <= a {
                continue;
            }
            lo = lo.min(self.values[c]);
            hi = hi.max(self.values[c]);
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

impl Kernel {
    pub fn exponential(alpha: f64, beta: f64) -> Result<Self> {
        let k = Kernel::Exponential { alpha, beta };
        k.validate()?;
        Ok(k)
    }

    pub fn power_law(alpha: f64, delta: f64, gamma: f64) -> Result<Self> {
        let k = Kernel::PowerLaw { alpha, delta, gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(edges: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Kernel::NonParametric(Tabulated::new(edges, values)?))
    }

    pub fn zero() -> Self {
        Kernel::Exponential { alpha: 0.0, beta: 1.0 }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            Kernel::Exponential { .. } => KernelFamily::Exponential,
            Kernel::PowerLaw { .. } => KernelFamily::PowerLaw,
            Kernel::NonParametric(_) => KernelFamily::NonParametric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Exponential { alpha, beta } => {
                if !alpha.is_finite() || !(beta > 0.0) || !beta.is_finite() {
                    return Err(invalid(format!(
                        "exponential kernel needs finite alpha and beta > 0 (alpha={alpha}, beta={beta})"
                    )));
                }
            }
            Kernel::PowerLaw { alpha, delta, gamma } => {
                if !alpha.is_finite()
                    || !(delta > 0.0)
                    || !delta.is_finite()
                    || !(gamma > 1.0)
                    || !gamma.is_finite()
                {
                    return Err(invalid(format!(
                        "power-law kernel needs delta > 0 and gamma > 1 (alpha={alpha}, delta={delta}, gamma={gamma})"
                    )));
                }
            }
            Kernel::NonParametric(_) => {}
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Kernel::Exponential { alpha, .. } | Kernel::PowerLaw { alpha, .. } => *alpha == 0.0,
            Kernel::NonParametric(t) => t.values.iter().all(|v| *v == 0.0),
        }
    }

    /// φ(t); zero for t < 0.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { alpha, beta } => alpha * (-beta * t).exp(),
            Kernel::PowerLaw { alpha, delta, gamma } => alpha * (1.0 + t / delta).powf(-gamma),
            Kernel::NonParametric(ref tab) => tab.value(t),
        }
    }

    /// ∫₀ᵗ φ(s) ds.
    pub fn primitive(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Kernel::Exponential { alpha, beta } => alpha / beta * (-(-beta * t).exp_m1()),
            Kernel::PowerLaw { alpha, delta, gamma } => {
                alpha * delta / (gamma - 1.0) * (1.0 - (1.0 + t / delta).powf(1.0 - gamma))
            }
            Kernel::NonParametric(ref tab) => tab.primitive(t),
        }
    }

    /// ∫₀^∞ φ(s) ds, signed.
    pub fn norm(&self) -> f64 {
        match *self {
            Kernel::Exponential { alpha, beta } => alpha / beta,
            Kernel::PowerLaw { alpha, delta, gamma } => alpha * delta / (gamma - 1.0),
            Kernel::NonParametric(ref tab) => tab.norm(),
        }
    }

    /// sup over s ≥ t of max(φ(s), 0). Used for thinning majorants: it bounds
    /// every future contribution of an event that is currently `t` old.
    pub fn positive_sup_from(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match *self {
            // both parametric families are monotone in |φ|
            Kernel::Exponential { .. } | Kernel::PowerLaw { .. } => self.value(t).max(0.0),
            Kernel::NonParametric(ref tab) => tab.positive_sup_from(t),
        }
    }

    /// (min, max) of φ over [a, b], 0 ≤ a ≤ b.
    pub fn range_on(&self, a: f64, b: f64) -> (f64, f64) {
        match *self {
            Kernel::Exponential { .. } | Kernel::PowerLaw { .. } => {
                let (va, vb) = (self.value(a), self.value(b));
                (va.min(vb), va.max(vb))
            }
            Kernel::NonParametric(ref tab) => tab.range_on(a, b),
        }
    }

    /// Age beyond which the kernel's remaining mass is at most `tail_tol`
    /// times its total absolute mass. Infinite only for tol = 0 on an
    /// unbounded family.
    pub fn lookback(&self, tail_tol: f64) -> f64 {
        match *self {
            _ if self.is_zero() => 0.0,
            Kernel::Exponential { beta, .. } => {
                if tail_tol <= 0.0 {
                    f64::INFINITY
                } else {
                    (1.0 / tail_tol).ln().max(0.0) / beta
                }
            }
            Kernel::PowerLaw { delta, gamma, .. } => {
                if tail_tol <= 0.0 {
                    f64::INFINITY
                } else {
                    // (1 + L/δ)^(1−γ) = tol
                    delta * (tail_tol.powf(1.0 / (1.0 - gamma)) - 1.0).max(0.0)
                }
            }
            Kernel::NonParametric(ref tab) => tab.support_end(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Exponential,
    PowerLaw,
    NonParametric,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::PowerLaw => "power_law",
            KernelFamily::NonParametric => "non_parametric",
        }
    }
}

// JSON form: {"family": "...", "params": {...}}
#[derive(Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
enum KernelDoc {
    Exponential { alpha: f64, beta: f64 },
    PowerLaw { alpha: f64, delta: f64, gamma: f64 },
    NonParametric { grid: Vec<f64>, values: Vec<f64> },
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let doc = match self {
            Kernel::Exponential { alpha, beta } => KernelDoc::Exponential { alpha: *alpha, beta: *beta },
            Kernel::PowerLaw { alpha, delta, gamma } => {
                KernelDoc::PowerLaw { alpha: *alpha, delta: *delta, gamma: *gamma }
            }
            Kernel::NonParametric(tab) => {
                KernelDoc::NonParametric { grid: tab.edges.clone(), values: tab.values.clone() }
            }
        };
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Kernel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = KernelDoc::deserialize(d)?;
        let kernel = match doc {
            KernelDoc::Exponential { alpha, beta } => Kernel::exponential(alpha, beta),
            KernelDoc::PowerLaw { alpha, delta, gamma } => Kernel::power_law(alpha, delta, gamma),
            KernelDoc::NonParametric { grid, values } => Kernel::tabulated(grid, values),
        };
        kernel.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Composite Simpson on [0, upper] after the substitution t = u/(1−u),
    /// independent of the closed forms under test.
    fn quadrature_norm(k: &Kernel) -> f64 {
        let n = 2_000_000;
        let h = 1.0 / n as f64;
        let f = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let t = u / (1.0 - u);
            k.value(t) / ((1.0 - u) * (1.0 - u))
        };
        let mut acc = f(0.0) + f(1.0 - 1e-15);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn norms_match_quadrature() {
        let exp = Kernel::exponential(0.7, 3.0).unwrap();
        assert_relative_eq!(exp.norm(), quadrature_norm(&exp), max_relative = 1e-6);
        let inhib = Kernel::exponential(-0.2, 5.0).unwrap();
        assert_relative_eq!(inhib.norm(), quadrature_norm(&inhib), max_relative = 1e-6);
        // slow tails converge slowly in u; keep gamma away from 1
        let pl = Kernel::power_law(0.4, 0.05, 2.5).unwrap();
        assert_relative_eq!(pl.norm(), quadrature_norm(&pl), max_relative = 1e-6);
    }

    #[test]
    fn tabulated_norm_matches_cellwise_sum() {
        let k = Kernel::tabulated(vec![0.0, 0.1, 0.3, 1.0], vec![2.0, -1.0, 0.5]).unwrap();
        // direct midpoint integration of the step function
        let n = 1_000_000;
        let h = 1.0 / n as f64;
        let q: f64 = (0..n).map(|i| k.value((i as f64 + 0.5) * h) * h).sum();
        assert_relative_eq!(k.norm(), q, max_relative = 1e-6);
        assert_relative_eq!(k.norm(), 0.2 - 0.2 + 0.35, epsilon = 1e-12);
    }

    #[test]
    fn primitive_tends_to_norm() {
        let pl = Kernel::power_law(0.4, 0.01, 1.5).unwrap();
        assert_relative_eq!(pl.primitive(1e12), pl.norm(), max_relative = 1e-6);
        let exp = Kernel::exponential(1.0, 2.0).unwrap();
        assert_relative_eq!(exp.primitive(50.0), 0.5, max_relative = 1e-12);
        let tab = Kernel::tabulated(vec![0.0, 1.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert_relative_eq!(tab.primitive(1.5), 2.5);
        assert_relative_eq!(tab.primitive(10.0), 4.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Kernel::exponential(1.0, 0.0).is_err());
        assert!(Kernel::power_law(1.0, 0.1, 1.0).is_err());
        assert!(Kernel::power_law(1.0, -0.1, 2.0).is_err());
        assert!(Kernel::tabulated(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Kernel::tabulated(vec![-1.0, 0.0], vec![1.0]).is_err());
        assert!(Kernel::tabulated(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn sign_is_preserved() {
        let k = Kernel::exponential(-0.5, 1.0).unwrap();
        assert!(k.value(0.3) < 0.0);
        assert!(k.norm() < 0.0);
        assert_eq!(k.positive_sup_from(0.0), 0.0);
    }

    #[test]
    fn positive_sup_bounds_future_values() {
        let tab = Kernel::tabulated(vec![0.0, 0.1, 0.2, 0.5], vec![-1.0, 0.3, 0.8]).unwrap();
        assert_eq!(tab.positive_sup_from(0.05), 0.8);
        assert_eq!(tab.positive_sup_from(0.3), 0.8);
        assert_eq!(tab.positive_sup_from(0.6), 0.0);
        for i in 0..1000 {
            let t = i as f64 * 1e-3;
            for j in i..1000 {
                assert!(tab.value(j as f64 * 1e-3) <= tab.positive_sup_from(t) + 1e-15);
            }
        }
    }

    #[test]
    fn range_on_brackets_values() {
        let tab = Kernel::tabulated(vec![0.0, 0.1, 0.2, 0.5], vec![-1.0, 0.3, 0.8]).unwrap();
        assert_eq!(tab.range_on(0.05, 0.15), (-1.0, 0.3));
        assert_eq!(tab.range_on(0.3, 0.7), (0.0, 0.8));
        let pl = Kernel::power_law(-0.4, 0.01, 1.5).unwrap();
        let (lo, hi) = pl.range_on(0.0, 0.1);
        assert_relative_eq!(lo, -0.4);
        assert!(hi < 0.0 && hi > lo);
    }

    #[test]
    fn lookback_leaves_requested_tail() {
        let pl = Kernel::power_law(1.0, 0.02, 3.0).unwrap();
        let l = pl.lookback(1e-4);
        let tail = pl.norm() - pl.primitive(l);
        assert_relative_eq!(tail / pl.norm(), 1e-4, max_relative = 1e-6);
        let exp = Kernel::exponential(1.0, 10.0).unwrap();
        let l = exp.lookback(1e-6);
        assert_relative_eq!((exp.norm() - exp.primitive(l)) / exp.norm(), 1e-6, max_relative = 1e-6);
    }

    #[test]
    fn json_shape() {
        let k = Kernel::power_law(0.4, 0.01, 1.5).unwrap();
        let v = serde_json::to_value(&k).unwrap();
        assert_eq!(v["family"], "power_law");
        assert_eq!(v["params"]["gamma"], 1.5);
        let back: Kernel = serde_json::from_value(v).unwrap();
        assert_eq!(back, k);
        let bad = serde_json::json!({"family": "exponential", "params": {"alpha": 1.0, "beta": -1.0}});
        assert!(serde_json::from_value::<Kernel>(bad).is_err());
        let tab = Kernel::tabulated(vec![0.0, 1.0], vec![0.5]).unwrap();
        let v = serde_json::to_value(&tab).unwrap();
        assert_eq!(v["params"]["grid"], serde_json::json!([0.0, 1.0]));
    }
}

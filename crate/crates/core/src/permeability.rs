//! Permeability laws `k(·)` mapping fluid content to Darcy conductivity.
//!
//! Every law is continuous and clamped into `[k1, k2]` with `k1 > 0`, so the
//! weighted stiffness it produces is uniformly coercive and bounded.

use crate::error::{config, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum PermeabilityKind {
    Constant { value: f64 },
    /// `k0 * exp(rate * x)` clamped into `[k1, k2]`.
    ClampedExponential { k0: f64, rate: f64 },
    /// `k1 + (k2 - k1) / (1 + exp(-steepness * (x - center)))`.
    Logistic { steepness: f64, center: f64 },
    /// Piecewise-linear interpolation through sorted `(x, k)` nodes with
    /// constant extrapolation.
    Table { nodes: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PermeabilityLaw {
    kind: PermeabilityKind,
    k1: f64,
    k2: f64,
}

fn check_bounds(k1: f64, k2: f64) -> Result<()> {
    if !(k1.is_finite() && k2.is_finite()) {
        return config("permeability bounds must be finite");
    }
    if k1 <= 0.0 {
        return config(format!("permeability lower bound k1 = {k1} must be positive"));
    }
    if k2 < k1 {
        return config(format!(
            "permeability bounds violate 0 < k1 <= k2 (k1 = {k1}, k2 = {k2})"
        ));
    }
    Ok(())
}

impl PermeabilityLaw {
    pub fn constant(value: f64) -> Result<Self> {
        check_bounds(value, value)?;
        Ok(Self {
            kind: PermeabilityKind::Constant { value },
            k1: value,
            k2: value,
        })
    }

    pub fn clamped_exponential(k0: f64, rate: f64, k1: f64, k2: f64) -> Result<Self> {
        check_bounds(k1, k2)?;
        if !(k0 > 0.0 && k0.is_finite() && rate.is_finite()) {
            return config("clamped-exponential law needs k0 > 0 and a finite rate");
        }
        Ok(Self {
            kind: PermeabilityKind::ClampedExponential { k0, rate },
            k1,
            k2,
        })
    }

    pub fn logistic(steepness: f64, center: f64, k1: f64, k2: f64) -> Result<Self> {
        check_bounds(k1, k2)?;
        if !(steepness.is_finite() && center.is_finite()) {
            return config("logistic law parameters must be finite");
        }
        Ok(Self {
            kind: PermeabilityKind::Logistic { steepness, center },
            k1,
            k2,
        })
    }

    /// Bounds are the extreme tabulated values.
    pub fn table(mut nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return config("permeability table must have at least one node");
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        if nodes.windows(2).any(|w| w[0].0 == w[1].0) {
            return config("permeability table abscissae must be distinct");
        }
        let k1 = nodes.iter().map(|n| n.1).fold(f64::INFINITY, f64::min);
        let k2 = nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max);
        check_bounds(k1, k2)?;
        Ok(Self {
            kind: PermeabilityKind::Table { nodes },
            k1,
            k2,
        })
    }

    /// One representative of every shipped law.
    pub fn library() -> Vec<(&'static str, PermeabilityLaw)> {
        vec![
            ("constant", Self::constant(1.5).unwrap()),
            ("clamped_exponential", Self::clamped_exponential(1.0, 1.0, 0.2, 5.0).unwrap()),
            ("logistic", Self::logistic(2.0, 0.5, 0.5, 3.0).unwrap()),
            ("table", Self::table(vec![(-1.0, 0.5), (0.0, 2.0), (1.0, 1.0), (2.0, 4.0)]).unwrap()),
        ]
    }

    pub fn kind(&self) -> &PermeabilityKind {
        &self.kind
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, PermeabilityKind::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        check_bounds(self.k1, self.k2)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let raw = match &self.kind {
            PermeabilityKind::Constant { value } => *value,
            PermeabilityKind::ClampedExponential { k0, rate } => k0 * (rate * x).exp(),
            PermeabilityKind::Logistic { steepness, center } => {
                self.k1 + (self.k2 - self.k1) / (1.0 + (-steepness * (x - center)).exp())
            }
            PermeabilityKind::Table { nodes } => interpolate(nodes, x),
        };
        raw.clamp(self.k1, self.k2)
    }

    /// Derivative `k'(x)`; one-sided (zero) at clamp saturation.
    pub fn derivative(&self, x: f64) -> f64 {
        match &self.kind {
            PermeabilityKind::Constant { .. } => 0.0,
            PermeabilityKind::ClampedExponential { k0, rate } => {
                let raw = k0 * (rate * x).exp();
                if raw < self.k1 || raw > self.k2 {
                    0.0
                } else {
                    rate * raw
                }
            }
            PermeabilityKind::Logistic { steepness, center } => {
                let s = 1.0 / (1.0 + (-steepness * (x - center)).exp());
                (self.k2 - self.k1) * steepness * s * (1.0 - s)
            }
            PermeabilityKind::Table { nodes } => {
                match nodes.windows(2).find(|w| x >= w[0].0 && x < w[1].0) {
                    Some(w) => (w[1].1 - w[0].1) / (w[1].0 - w[0].0),
                    None => 0.0,
                }
            }
        }
    }

    /// Global Lipschitz constant, absent for tabulated laws.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match &self.kind {
            PermeabilityKind::Constant { .. } => Some(0.0),
            PermeabilityKind::ClampedExponential { rate, .. } => Some(rate.abs() * self.k2),
            PermeabilityKind::Logistic { steepness, .. } => {
                Some(0.25 * steepness.abs() * (self.k2 - self.k1))
            }
            PermeabilityKind::Table { .. } => None,
        }
    }
}

fn interpolate(nodes: &[(f64, f64)], x: f64) -> f64 {
    let first = nodes[0];
    let last = nodes[nodes.len() - 1];
    if x <= first.0 {
        return first.1;
    }
    if x >= last.0 {
        return last.1;
    }
    let i = nodes.partition_point(|n| n.0 <= x);
    let (x0, y0) = nodes[i - 1];
    let (x1, y1) = nodes[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn library() -> Vec<PermeabilityLaw> {
        vec![
            PermeabilityLaw::constant(1.5).unwrap(),
            PermeabilityLaw::clamped_exponential(1.0, 2.0, 0.5, 3.0).unwrap(),
            PermeabilityLaw::logistic(4.0, 0.1, 0.2, 2.0).unwrap(),
            PermeabilityLaw::table(vec![(-1.0, 0.5), (0.0, 1.0), (2.0, 4.0)]).unwrap(),
        ]
    }

    #[test]
    fn rejects_invalid_bounds() {
        assert!(PermeabilityLaw::constant(0.0).is_err());
        assert!(PermeabilityLaw::clamped_exponential(1.0, 1.0, 2.0, 1.0).is_err());
        assert!(PermeabilityLaw::logistic(1.0, 0.0, -1.0, 1.0).is_err());
        assert!(PermeabilityLaw::table(vec![(0.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(PermeabilityLaw::table(vec![]).is_err());
    }

    #[test]
    fn exponential_saturates_at_bounds() {
        let k = PermeabilityLaw::clamped_exponential(1.0, 2.0, 0.5, 3.0).unwrap();
        assert_eq!(k.eval(50.0), 3.0);
        assert_eq!(k.eval(-50.0), 0.5);
        assert!((k.eval(0.1) - (0.2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn table_interpolates_and_extrapolates() {
        let k = PermeabilityLaw::table(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(k.eval(1.0), 2.0);
        assert_eq!(k.eval(-5.0), 1.0);
        assert_eq!(k.eval(5.0), 3.0);
        assert_eq!(k.lipschitz_constant(), None);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for law in library() {
            for &x in &[-0.37, 0.05, 0.21, 0.5, 1.3] {
                let h = 1e-6;
                let fd = (law.eval(x + h) - law.eval(x - h)) / (2.0 * h);
                assert!((fd - law.derivative(x)).abs() < 1e-6, "{law:?} at {x}");
            }
        }
    }

    proptest! {
        #[test]
        fn values_stay_within_bounds(x in -1e3f64..1e3) {
            for law in library() {
                let k = law.eval(x);
                prop_assert!(law.k1() <= k && k <= law.k2());
            }
        }

        #[test]
        fn lipschitz_bound_holds(x in -5f64..5.0, y in -5f64..5.0) {
            for law in library() {
                if let Some(l) = law.lipschitz_constant() {
                    prop_assert!((law.eval(x) - law.eval(y)).abs() <= l * (x - y).abs() + 1e-12);
                }
            }
        }
    }
}

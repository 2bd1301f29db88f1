//! Problem description consumed by the evolution and fixed-point drivers.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{config, Result};
use crate::expr::{Expr, Var};
use crate::mesh::Point;
use crate::permeability::PermeabilityLaw;

/// Initial fluid content `d₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialContent {
    Analytic(Expr),
    /// Nodal values on every vertex of the mesh.
    Nodal(DVector<f64>),
}

/// How the translation forms `∂_t u_F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranslationMode {
    /// Backward difference of the per-step elastic lifts.
    #[default]
    BackwardDifference,
    /// Elastic lift of the analytic `F_t`.
    Analytic,
}

/// Which system the stepper integrates when `F ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Formulation {
    /// Eliminate `F` by the elastic lift `u_F` and solve the shifted problem.
    #[default]
    Translated,
    /// Keep `F` in the elasticity right-hand side.
    Direct,
}

/// Starting permeability argument of the Picard iteration, expressed in the
/// original fluid-content variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    #[default]
    InitialContent,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PicardMode {
    /// Whole-trajectory successive substitution.
    #[default]
    Global,
    /// Single sweep with `z` at step `n` taken as `ζ` at step `n - 1`.
    PerStepLagged,
}

/// Scalar source `S(x, t)`: a parsed expression or a closure (used by
/// manufactured solutions whose source involves the permeability law).
#[derive(Clone)]
pub enum ScalarSource {
    Expr(Expr),
    Function(Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>),
}

impl ScalarSource {
    pub fn eval(&self, x: Point, t: f64) -> f64 {
        match self {
            ScalarSource::Expr(e) => e.eval(x[0], x[1], t),
            ScalarSource::Function(f) => f(x, t),
        }
    }
}

impl fmt::Debug for ScalarSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarSource::Expr(e) => write!(f, "Expr({e})"),
            ScalarSource::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub dim: usize,
    pub n: usize,
    pub t_final: f64,
    pub dt: f64,
    pub c0: f64,
    pub law: PermeabilityLaw,
    /// Body force components; the second is ignored in 1D.
    pub force: [Expr; 2],
    pub force_t: Option<[Expr; 2]>,
    pub source: ScalarSource,
    pub d0: InitialContent,
    pub picard_tol: f64,
    pub max_iters: usize,
    pub linear_tol: f64,
    pub theta: f64,
    pub translation: TranslationMode,
    pub formulation: Formulation,
    pub initial_guess: InitialGuess,
    pub picard_mode: PicardMode,
}

impl Scenario {
    /// Scenario with zero data and default tolerances.
    pub fn new(dim: usize, n: usize, t_final: f64, dt: f64, c0: f64, law: PermeabilityLaw) -> Self {
        Self {
            dim,
            n,
            t_final,
            dt,
            c0,
            law,
            force: [Expr::num(0.0), Expr::num(0.0)],
            force_t: None,
            source: ScalarSource::Expr(Expr::num(0.0)),
            d0: InitialContent::Analytic(Expr::num(0.0)),
            picard_tol: 1e-8,
            max_iters: 50,
            linear_tol: 1e-10,
            theta: 1.0,
            translation: TranslationMode::default(),
            formulation: Formulation::default(),
            initial_guess: InitialGuess::default(),
            picard_mode: PicardMode::default(),
        }
    }

    pub fn with_source(mut self, s: Expr) -> Self {
        self.source = ScalarSource::Expr(s);
        self
    }

    pub fn with_source_fn(mut self, f: impl Fn(Point, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = ScalarSource::Function(Arc::new(f));
        self
    }

    pub fn with_force(mut self, f: [Expr; 2]) -> Self {
        self.force = f;
        self
    }

    pub fn with_d0(mut self, d0: InitialContent) -> Self {
        self.d0 = d0;
        self
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps()).map(|i| i as f64 * self.dt).collect()
    }

    pub fn has_force(&self) -> bool {
        self.force[..self.dim].iter().any(|e| !e.is_zero())
    }

    pub fn eval_force(&self, x: Point, t: f64) -> [f64; 2] {
        [
            self.force[0].eval(x[0], x[1], t),
            if self.dim > 1 {
                self.force[1].eval(x[0], x[1], t)
            } else {
                0.0
            },
        ]
    }

    /// Analytic `F_t` if supplied, else the symbolic time derivative of `F`.
    pub fn force_rate(&self) -> [Expr; 2] {
        self.force_t
            .clone()
            .unwrap_or_else(|| [self.force[0].diff(Var::T), self.force[1].diff(Var::T)])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return config(format!("dimension must be 1 or 2, got {}", self.dim));
        }
        if self.n == 0 {
            return config("mesh resolution n must be at least 1");
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return config("final time T must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return config("time step dt must be positive");
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return config(format!(
                "time step dt = {} does not divide T = {}",
                self.dt, self.t_final
            ));
        }
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            return config("storage coefficient c0 must be non-negative");
        }
        self.law.validate()?;
        if !(self.picard_tol > 0.0) {
            return config("picard_tol must be positive");
        }
        if self.max_iters == 0 {
            return config("max_iters must be at least 1");
        }
        if !(self.linear_tol > 0.0) {
            return config("linear_tol must be positive");
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return config("damping theta must lie in (0, 1]");
        }
        if let InitialContent::Nodal(v) = &self.d0 {
            let expected = (self.n + 1).pow(self.dim as u32);
            if v.len() != expected {
                return config(format!(
                    "nodal d0 has {} values, mesh has {expected} vertices",
                    v.len()
                ));
            }
        }
        if self.translation == TranslationMode::Analytic && self.has_force() && self.force_t.is_none() {
            return config("analytic translation requires force_t");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario::new(1, 4, 1.0, 0.25, 1.0, PermeabilityLaw::constant(1.0).unwrap())
    }

    #[test]
    fn defaults_validate() {
        let sc = base();
        sc.validate().unwrap();
        assert_eq!(sc.n_steps(), 4);
        assert_eq!(sc.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn dt_must_divide_t() {
        let mut sc = base();
        sc.dt = 0.3;
        assert!(sc.validate().is_err());
        sc.dt = 0.1;
        sc.validate().unwrap();
    }

    #[test]
    fn analytic_translation_needs_rate() {
        let mut sc = base().with_force([Expr::parse("t*x").unwrap(), Expr::num(0.0)]);
        sc.translation = TranslationMode::Analytic;
        assert!(sc.validate().is_err());
        sc.force_t = Some([Expr::x(), Expr::num(0.0)]);
        sc.validate().unwrap();
    }

    #[test]
    fn force_rate_defaults_to_symbolic_derivative() {
        let sc = base().with_force([Expr::parse("t^2*x").unwrap(), Expr::num(0.0)]);
        assert_eq!(sc.force_rate()[0].eval(0.5, 0.0, 3.0), 3.0);
    }
}

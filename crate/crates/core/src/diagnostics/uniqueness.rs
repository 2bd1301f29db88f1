//! Discrete monitor for the uniqueness criterion: Lipschitz constant of the
//! law, `‖∇pⁿ‖_{L∞}` per step, the Grönwall exponent, and a two-guess probe.

use crate::error::Result;
use crate::evolution::{EvolutionContext, TrajectoryRecord};
use crate::field::ScalarField;
use crate::fixedpoint::{l2_l2, picard_solve_with, PicardOptions};
use crate::operators::Discretization;
use crate::permeability::PermeabilityLaw;
use crate::scenario::InitialGuess;

/// Two Picard runs from different starting guesses.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    /// `‖p_a − p_b‖_{L²(0,T;L²)}`.
    pub p_gap: f64,
    pub zeta_gap: f64,
    /// `10 · picard_tol`.
    pub tolerance: f64,
    pub agreed: bool,
    pub iterations: [usize; 2],
}

pub fn two_guess_probe(ctx: &EvolutionContext) -> Result<ProbeResult> {
    let run = |guess| picard_solve_with(ctx, PicardOptions { guess, timing: false });
    let a = run(InitialGuess::InitialContent)?;
    let b = run(InitialGuess::Zero)?;
    let diff = |x: &[ScalarField], y: &[ScalarField]| -> Vec<ScalarField> {
        x.iter().zip(y).map(|(f, g)| ScalarField::new(&f.values - &g.values)).collect()
    };
    let dt = ctx.sc.dt;
    let p_gap = l2_l2(ctx.disc, dt, &diff(&a.trajectory.p, &b.trajectory.p));
    let zeta_gap = l2_l2(ctx.disc, dt, &diff(&a.trajectory.zeta, &b.trajectory.zeta));
    let tolerance = 10.0 * ctx.sc.picard_tol;
    Ok(ProbeResult {
        p_gap,
        zeta_gap,
        tolerance,
        agreed: p_gap <= tolerance && zeta_gap <= tolerance,
        iterations: [a.iterations(), b.iterations()],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// `None` when the law has no global Lipschitz constant.
    pub lipschitz: Option<f64>,
    pub k1: f64,
    /// `‖∇pⁿ‖_{L∞}` for `n = 0..=N`.
    pub grad_p_linf: Vec<f64>,
    pub sup_grad_p: f64,
    /// `(L_k²/k₁) dt Σ_{n≥1} ‖∇pⁿ‖²_{L∞}` with the hidden constant set to 1.
    pub exponent: Option<f64>,
    /// `√(dt Σ_{n≥2} ‖(pⁿ − pⁿ⁻¹)/dt‖²_{L²})`, a proxy for `p_t ∈ L²L²`.
    pub p_t_proxy: f64,
    pub regularity_finite: bool,
    pub probe: Option<ProbeResult>,
    pub applicable: bool,
    pub criterion_satisfied: bool,
}

impl UniquenessReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NaN".to_string(), |x| format!("{x:.16e}"));
        let mut out = String::from("key,value\n");
        out.push_str(&format!("L_k,{}\n", opt(self.lipschitz)));
        out.push_str(&format!("k1,{:.16e}\n", self.k1));
        out.push_str(&format!("sup_grad_p_Linf,{:.16e}\n", self.sup_grad_p));
        out.push_str(&format!("gronwall_exponent,{}\n", opt(self.exponent)));
        out.push_str(&format!("p_t_L2L2,{:.16e}\n", self.p_t_proxy));
        out.push_str(&format!("probe_p_gap,{}\n", opt(self.probe.as_ref().map(|p| p.p_gap))));
        out.push_str(&format!("applicable,{}\n", self.applicable));
        out.push_str(&format!("criterion_satisfied,{}\n", self.criterion_satisfied));
        out
    }
}

/// Build the report for a converged trajectory. `lipschitz_override`
/// replaces the law's Lipschitz constant in the exponent only.
pub fn uniqueness_monitor(
    disc: &Discretization,
    tr: &TrajectoryRecord,
    law: &PermeabilityLaw,
    dt: f64,
    lipschitz_override: Option<f64>,
    probe: Option<ProbeResult>,
) -> UniquenessReport {
    let grad_p_linf: Vec<f64> = tr.ledger.iter().map(|l| l.linf_grad_p).collect();
    let sup_grad_p = grad_p_linf.iter().skip(1).copied().fold(0.0, f64::max);
    let lipschitz = lipschitz_override.or_else(|| law.lipschitz_constant());
    let k1 = law.k1();
    let sum_sq: f64 = grad_p_linf.iter().skip(1).map(|g| g * g).sum();
    let exponent = lipschitz.map(|l| l * l / k1 * dt * sum_sq);
    let dp: Vec<ScalarField> = tr
        .p
        .windows(2)
        .map(|w| ScalarField::new((&w[1].values - &w[0].values) / dt))
        .collect();
    // dp[0] involves p⁰, which is unavailable when c₀ = 0
    let p_t_proxy = l2_l2(disc, dt, &dp);
    let regularity_finite = sup_grad_p.is_finite() && p_t_proxy.is_finite();
    let applicable = lipschitz.is_some();
    let criterion_satisfied = applicable
        && regularity_finite
        && exponent.is_some_and(f64::is_finite)
        && probe.as_ref().is_some_and(|p| p.agreed);
    UniquenessReport {
        lipschitz,
        k1,
        grad_p_linf,
        sup_grad_p,
        exponent,
        p_t_proxy,
        regularity_finite,
        probe,
        applicable,
        criterion_satisfied,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::fixedpoint::picard_solve;
    use crate::scenario::{InitialContent, Scenario};

    fn setup(law: PermeabilityLaw) -> (Discretization, Scenario) {
        let mut sc = Scenario::new(1, 16, 1.0, 0.125, 1.0, law)
            .with_source(Expr::parse("10*sin(pi*x)*(1+t)").unwrap())
            .with_d0(InitialContent::Analytic(Expr::parse("sin(pi*x)").unwrap()));
        sc.picard_tol = 1e-11;
        (Discretization::new(1, 16).unwrap(), sc)
    }

    #[test]
    fn constant_law_has_zero_exponent() {
        let (disc, sc) = setup(PermeabilityLaw::constant(1.0).unwrap());
        let ctx = EvolutionContext::new(&disc, &sc).unwrap();
        let out = picard_solve(&disc, &sc).unwrap();
        let probe = two_guess_probe(&ctx).unwrap();
        let r = uniqueness_monitor(&disc, &out.trajectory, &sc.law, sc.dt, None, Some(probe));
        assert_eq!(r.exponent, Some(0.0));
        assert!(r.sup_grad_p > 0.0);
        assert!(r.criterion_satisfied);
    }

    #[test]
    fn exponent_is_quadratic_in_lipschitz_constant() {
        let law = PermeabilityLaw::clamped_exponential(1.0, 1.0, 0.2, 5.0).unwrap();
        let (disc, sc) = setup(law.clone());
        let out = picard_solve(&disc, &sc).unwrap();
        let lk = law.lipschitz_constant().unwrap();
        let a = uniqueness_monitor(&disc, &out.trajectory, &law, sc.dt, None, None);
        let b = uniqueness_monitor(&disc, &out.trajectory, &law, sc.dt, Some(2.0 * lk), None);
        let ratio = b.exponent.unwrap() / a.exponent.unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
        assert!(!a.criterion_satisfied);
    }

    #[test]
    fn zero_solution_has_zero_norms() {
        let (disc, mut sc) = setup(PermeabilityLaw::constant(1.0).unwrap());
        sc = sc.with_source(Expr::num(0.0)).with_d0(InitialContent::Analytic(Expr::num(0.0)));
        let out = picard_solve(&disc, &sc).unwrap();
        let r = uniqueness_monitor(&disc, &out.trajectory, &sc.law, sc.dt, None, None);
        assert_eq!(r.sup_grad_p, 0.0);
        assert_eq!(r.p_t_proxy, 0.0);
    }
}

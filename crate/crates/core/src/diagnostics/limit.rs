//! Storage-coefficient ladder `c₀ ↘ 0` against the `c₀ = 0` run.

use rayon::prelude::*;

use crate::error::{BiotError, Result};
use crate::evolution::{EvolutionContext, TrajectoryRecord};
use crate::field::ScalarField;
use crate::fixedpoint::{l2_l2, picard_solve_with, PicardOptions};
use crate::operators::Discretization;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub c0: f64,
    /// `‖p^{c₀} − p⁰‖_{L²(0,T;L²)}`.
    pub p_gap: f64,
    pub zeta_gap: f64,
    /// `‖c₀ p^{c₀}‖_{L²(0,T;L²)}`.
    pub c0p_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub baseline_iterations: usize,
    pub baseline_p_norm: f64,
    pub rows: Vec<LimitRow>,
    pub c0p_strictly_decreasing: bool,
    pub p_gap_decreasing: bool,
    pub zeta_gap_decreasing: bool,
}

impl LimitReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("c0,p_gap_L2L2,zeta_gap_L2L2,c0p_L2L2,picard_iters,converged\n");
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{},true\n",
            0.0, 0.0, 0.0, 0.0, self.baseline_iterations
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
                r.c0, r.p_gap, r.zeta_gap, r.c0p_norm, r.iterations, r.converged
            ));
        }
        out
    }
}

fn solve(disc: &Discretization, sc: &Scenario) -> Result<(TrajectoryRecord, usize)> {
    let ctx = EvolutionContext::new(disc, sc)?;
    let out = picard_solve_with(&ctx, PicardOptions::default())?;
    let iters = out.iterations();
    Ok((out.trajectory, iters))
}

fn gap(disc: &Discretization, dt: f64, a: &[ScalarField], b: &[ScalarField]) -> f64 {
    let diff: Vec<ScalarField> = a
        .iter()
        .zip(b)
        .map(|(x, y)| ScalarField::new(&x.values - &y.values))
        .collect();
    l2_l2(disc, dt, &diff)
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Solve `sc` with each `c₀` of `ladder` (in the given order) and with
/// `c₀ = 0`, then compare. Rungs that fail to converge are kept with
/// `converged = false` and NaN gaps; the baseline must converge.
pub fn incompressible_limit(sc: &Scenario, ladder: &[f64]) -> Result<LimitReport> {
    if ladder.iter().any(|&c| !(c > 0.0)) {
        return Err(BiotError::Config("ladder values must be positive".into()));
    }
    let disc = Discretization::new(sc.dim, sc.n)?;
    let mut base_sc = sc.clone();
    base_sc.c0 = 0.0;
    let (base, baseline_iterations) = solve(&disc, &base_sc)?;
    let dt = sc.dt;
    let rows: Vec<LimitRow> = ladder
        .par_iter()
        .map(|&c0| {
            let mut s = sc.clone();
            s.c0 = c0;
            match solve(&disc, &s) {
                Ok((tr, iterations)) => {
                    let c0p: Vec<ScalarField> =
                        tr.p.iter().map(|p| ScalarField::new(&p.values * c0)).collect();
                    Ok(LimitRow {
                        c0,
                        p_gap: gap(&disc, dt, &tr.p, &base.p),
                        zeta_gap: gap(&disc, dt, &tr.zeta, &base.zeta),
                        c0p_norm: l2_l2(&disc, dt, &c0p),
                        iterations,
                        converged: true,
                    })
                }
                Err(BiotError::NotConverged { history }) => Ok(LimitRow {
                    c0,
                    p_gap: f64::NAN,
                    zeta_gap: f64::NAN,
                    c0p_norm: f64::NAN,
                    iterations: history.len(),
                    converged: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let c0p: Vec<f64> = rows.iter().map(|r| r.c0p_norm).collect();
    let p_gaps: Vec<f64> = rows.iter().map(|r| r.p_gap).collect();
    let z_gaps: Vec<f64> = rows.iter().map(|r| r.zeta_gap).collect();
    Ok(LimitReport {
        baseline_iterations,
        baseline_p_norm: l2_l2(&disc, dt, &base.p),
        c0p_strictly_decreasing: c0p.windows(2).all(|w| w[1] < w[0]),
        p_gap_decreasing: non_increasing(&p_gaps),
        zeta_gap_decreasing: non_increasing(&z_gaps),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::permeability::PermeabilityLaw;

    fn scenario() -> Scenario {
        Scenario::new(1, 16, 1.0, 0.125, 1.0, PermeabilityLaw::constant(1.0).unwrap())
            .with_source(Expr::parse("sin(pi*x)*(1+t)").unwrap())
            .with_force([Expr::parse("x*(1-x)*t").unwrap(), Expr::num(0.0)])
    }

    #[test]
    fn gaps_shrink_along_the_ladder() {
        let r = incompressible_limit(&scenario(), &[1e-1, 1e-2, 1e-3, 1e-4]).unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.all_converged());
        assert!(r.c0p_strictly_decreasing, "{r:?}");
        assert!(r.p_gap_decreasing, "{r:?}");
        assert!(r.zeta_gap_decreasing, "{r:?}");
        // gap roughly linear in c0
        let ratio = r.rows[0].p_gap / r.rows[1].p_gap;
        assert!(ratio > 5.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn zero_data_gives_zero_rows() {
        let sc = Scenario::new(1, 8, 1.0, 0.25, 1.0, PermeabilityLaw::constant(1.0).unwrap());
        let r = incompressible_limit(&sc, &[1e-1, 1e-2]).unwrap();
        for row in &r.rows {
            assert_eq!(row.p_gap, 0.0);
            assert_eq!(row.c0p_norm, 0.0);
        }
        assert_eq!(r.baseline_p_norm, 0.0);
        assert_eq!(r.to_csv().lines().count(), 4);
    }
}

//! Manufactured solutions and convergence-rate studies.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{config, BiotError, Result};
use crate::evolution::{EvolutionContext, TrajectoryRecord};
use crate::expr::{add, mul, neg, sub, Expr, Var};
use crate::fixedpoint::{picard_solve_with, PicardOptions};
use crate::mesh::Point;
use crate::operators::Discretization;
use crate::permeability::PermeabilityLaw;
use crate::quadrature;
use crate::scenario::{InitialContent, Scenario};

/// Exact pressure and displacement with the data they induce.
#[derive(Debug, Clone)]
pub struct MmsCase {
    pub dim: usize,
    pub p: Expr,
    pub u: [Expr; 2],
    pub c0: f64,
    pub law: PermeabilityLaw,
}

impl MmsCase {
    /// Fails unless `p` and `u` vanish on the boundary at all sampled times.
    pub fn new(dim: usize, p: Expr, u: [Expr; 2], c0: f64, law: PermeabilityLaw) -> Result<Self> {
        let u = if dim == 1 { [u[0].clone(), Expr::num(0.0)] } else { u };
        let case = Self { dim, p, u, c0, law };
        case.check_boundary()?;
        Ok(case)
    }

    fn check_boundary(&self) -> Result<()> {
        let samples = 41;
        let mut points: Vec<Point> = Vec::new();
        if self.dim == 1 {
            points.extend([[0.0, 0.0], [1.0, 0.0]]);
        } else {
            for i in 0..samples {
                let s = i as f64 / (samples - 1) as f64;
                points.extend([[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]]);
            }
        }
        for t in [0.0, 0.25, 0.5, 1.0] {
            for x in &points {
                let vals = [
                    self.p.eval(x[0], x[1], t),
                    self.u[0].eval(x[0], x[1], t),
                    self.u[1].eval(x[0], x[1], t),
                ];
                if vals.iter().any(|v| v.abs() > 1e-12) {
                    return config(format!(
                        "manufactured fields do not vanish on the boundary at ({}, {}), t = {t}",
                        x[0], x[1]
                    ));
                }
            }
        }
        Ok(())
    }

    fn vars(&self) -> Vec<Var> {
        [Var::X, Var::Y][..self.dim].to_vec()
    }

    pub fn divergence(&self) -> Expr {
        self.vars()
            .iter()
            .enumerate()
            .fold(Expr::num(0.0), |acc, (i, &v)| add(acc, self.u[i].diff(v)))
    }

    /// `ζ = c₀p + ∇·u`.
    pub fn zeta(&self) -> Expr {
        add(mul(Expr::num(self.c0), self.p.clone()), self.divergence())
    }

    /// `F = −Δu − 2∇(∇·u) + ∇p`.
    pub fn force(&self) -> [Expr; 2] {
        let div = self.divergence();
        let vars = self.vars();
        let mut out = [Expr::num(0.0), Expr::num(0.0)];
        for (i, &vi) in vars.iter().enumerate() {
            let lap = vars
                .iter()
                .fold(Expr::num(0.0), |acc, &v| add(acc, self.u[i].diff(v).diff(v)));
            out[i] = add(
                sub(neg(lap), mul(Expr::num(2.0), div.diff(vi))),
                self.p.diff(vi),
            );
        }
        out
    }

    /// `S = ζ_t − k′(ζ)∇ζ·∇p − k(ζ)Δp`, evaluated pointwise.
    pub fn source(&self) -> Arc<dyn Fn(Point, f64) -> f64 + Send + Sync> {
        let zeta = self.zeta();
        let vars = self.vars();
        let zeta_t = zeta.diff(Var::T);
        let grad_z: Vec<Expr> = vars.iter().map(|&v| zeta.diff(v)).collect();
        let grad_p: Vec<Expr> = vars.iter().map(|&v| self.p.diff(v)).collect();
        let lap_p = vars
            .iter()
            .fold(Expr::num(0.0), |acc, &v| add(acc, self.p.diff(v).diff(v)));
        let law = self.law.clone();
        Arc::new(move |x: Point, t: f64| {
            let z = zeta.eval(x[0], x[1], t);
            let dot: f64 = grad_z
                .iter()
                .zip(&grad_p)
                .map(|(a, b)| a.eval(x[0], x[1], t) * b.eval(x[0], x[1], t))
                .sum();
            zeta_t.eval(x[0], x[1], t) - law.derivative(z) * dot - law.eval(z) * lap_p.eval(x[0], x[1], t)
        })
    }

    pub fn scenario(&self, n: usize, t_final: f64, dt: f64) -> Scenario {
        let mut sc = Scenario::new(self.dim, n, t_final, dt, self.c0, self.law.clone())
            .with_force(self.force())
            .with_d0(InitialContent::Analytic(self.zeta().at_time(0.0)));
        let src = self.source();
        sc = sc.with_source_fn(move |x, t| src(x, t));
        sc
    }

    /// `p = sin(πx) e^{−t}`, `u = 4x²(1−x)²(1+t)`.
    pub fn standard_1d(c0: f64, law: PermeabilityLaw) -> Result<Self> {
        Self::new(
            1,
            Expr::parse("sin(pi*x)*exp(-t)")?,
            [Expr::parse("4*x^2*(1-x)^2*(1+t)")?, Expr::num(0.0)],
            c0,
            law,
        )
    }

    /// `p = sin(πx)sin(πy)e^{−t}` and the curl-free bubble `u = ∇φ` with
    /// `φ = 16 x²(1−x)² y²(1−y)² (1+t)`.
    pub fn standard_2d(c0: f64, law: PermeabilityLaw) -> Result<Self> {
        let phi = Expr::parse("16*x^2*(1-x)^2*y^2*(1-y)^2*(1+t)")?;
        Self::new(
            2,
            Expr::parse("sin(pi*x)*sin(pi*y)*exp(-t)")?,
            [phi.diff(Var::X), phi.diff(Var::Y)],
            c0,
            law,
        )
    }
}

/// `√(dt Σ_{n≥1} ‖p_h − p‖²_{L²})` and the same for `u`.
pub fn trajectory_errors(disc: &Discretization, case: &MmsCase, tr: &TrajectoryRecord, dt: f64) -> (f64, f64) {
    let q = quadrature::rule(disc.mesh.dim());
    let d = disc.mesh.dim();
    let mut ep = 0.0;
    let mut eu = 0.0;
    for n in 1..tr.times.len() {
        let t = tr.times[n];
        for c in 0..disc.mesh.n_cells() {
            let g = disc.mesh.cell_geometry(c);
            let cell = disc.mesh.cell(c);
            for (bary, w) in &q {
                let mut x = [0.0; 2];
                for (k, &v) in cell.iter().enumerate() {
                    let xv = disc.mesh.vertex(v);
                    x[0] += bary[k] * xv[0];
                    x[1] += bary[k] * xv[1];
                }
                let ph = tr.p[n].eval_in_cell(&disc.mesh, c, &bary[..=d]);
                let dp = ph - case.p.eval(x[0], x[1], t);
                ep += dt * g.measure * w * dp * dp;
                let uh = tr.u[n].eval_in_cell(&disc.mesh, c, &bary[..=d]);
                for i in 0..d {
                    let du = uh[i] - case.u[i].eval(x[0], x[1], t);
                    eu += dt * g.measure * w * du * du;
                }
            }
        }
    }
    (ep.sqrt(), eu.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsRow {
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub err_p: f64,
    pub err_u: f64,
    pub picard_iterations: usize,
    /// Observed order against the previous row (NaN on the first row).
    pub order_p: f64,
    pub order_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderKind {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub kind: LadderKind,
    pub rows: Vec<MmsRow>,
}

impl RateTable {
    /// Orders observed between consecutive rungs.
    pub fn orders_p(&self) -> Vec<f64> {
        self.rows.iter().skip(1).map(|r| r.order_p).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,h,dt,err_p_L2,err_u_L2,order_p,order_u,picard_iters\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                r.n, r.h, r.dt, r.err_p, r.err_u, r.order_p, r.order_u, r.picard_iterations
            ));
        }
        out
    }
}

/// Solve one rung and measure errors.
pub fn mms_run(case: &MmsCase, n: usize, dt: f64, t_final: f64, picard_tol: f64) -> Result<MmsRow> {
    let mut sc = case.scenario(n, t_final, dt);
    sc.picard_tol = picard_tol;
    let disc = Discretization::new(case.dim, n)?;
    let ctx = EvolutionContext::new(&disc, &sc)?;
    let out = picard_solve_with(&ctx, PicardOptions::default())?;
    let (err_p, err_u) = trajectory_errors(&disc, case, &out.trajectory, dt);
    Ok(MmsRow {
        n,
        h: 1.0 / n as f64,
        dt,
        err_p,
        err_u,
        picard_iterations: out.iterations(),
        order_p: f64::NAN,
        order_u: f64::NAN,
    })
}

/// Run a ladder of `(n, dt)` rungs in parallel and compute observed orders
/// with respect to `h` (spatial) or `dt` (temporal).
pub fn mms_convergence(
    case: &MmsCase,
    ladder: &[(usize, f64)],
    kind: LadderKind,
    t_final: f64,
    picard_tol: f64,
) -> Result<RateTable> {
    if ladder.len() < 2 {
        return Err(BiotError::Config("a convergence ladder needs at least two rungs".into()));
    }
    let mut rows: Vec<MmsRow> = ladder
        .par_iter()
        .map(|&(n, dt)| mms_run(case, n, dt, t_final, picard_tol))
        .collect::<Result<_>>()?;
    for i in 1..rows.len() {
        let scale = match kind {
            LadderKind::Spatial => (rows[i - 1].h / rows[i].h).ln(),
            LadderKind::Temporal => (rows[i - 1].dt / rows[i].dt).ln(),
        };
        rows[i].order_p = (rows[i - 1].err_p / rows[i].err_p).ln() / scale;
        rows[i].order_u = (rows[i - 1].err_u / rows[i].err_u).ln() / scale;
    }
    Ok(RateTable { kind, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_violation_is_rejected() {
        let law = PermeabilityLaw::constant(1.0).unwrap();
        let err = MmsCase::new(1, Expr::parse("x").unwrap(), [Expr::num(0.0), Expr::num(0.0)], 1.0, law);
        assert!(matches!(err, Err(BiotError::Config(_))));
    }

    #[test]
    fn derived_force_matches_hand_computation_1d() {
        // u = x²(1−x)², p = 0: F = −3u″
        let law = PermeabilityLaw::constant(1.0).unwrap();
        let case = MmsCase::new(
            1,
            Expr::num(0.0),
            [Expr::parse("x^2*(1-x)^2").unwrap(), Expr::num(0.0)],
            1.0,
            law,
        )
        .unwrap();
        let x: f64 = 0.3;
        let upp = 2.0 - 12.0 * x + 12.0 * x * x;
        assert!((case.force()[0].eval(x, 0.0, 0.0) + 3.0 * upp).abs() < 1e-12);
    }

    #[test]
    fn source_with_constant_law_is_heat_operator() {
        let law = PermeabilityLaw::constant(2.0).unwrap();
        let case = MmsCase::standard_1d(1.0, law).unwrap();
        let s = case.source();
        let (x, t) = (0.4f64, 0.3f64);
        let pi = std::f64::consts::PI;
        let p = (pi * x).sin() * (-t).exp();
        let div_u_t = 4.0 * (2.0 * x - 6.0 * x * x + 4.0 * x * x * x);
        let want = -p + div_u_t + 2.0 * pi * pi * p;
        assert!((s([x, 0.0], t) - want).abs() < 1e-12);
    }

    #[test]
    fn pressure_converges_at_second_order_1d() {
        let case = MmsCase::standard_1d(1.0, PermeabilityLaw::constant(1.0).unwrap()).unwrap();
        let table = mms_convergence(
            &case,
            &[(8, 1.0 / 8.0), (16, 1.0 / 32.0), (32, 1.0 / 128.0)],
            LadderKind::Spatial,
            1.0,
            1e-10,
        )
        .unwrap();
        for o in table.orders_p() {
            assert!((o - 2.0).abs() < 0.3, "{table:?}");
        }
    }
}

//! Picard iteration `z ↦ ζ(z)` over whole space-time trajectories, and the
//! a posteriori check of the nonlinear weak form.

use std::time::Instant;

use nalgebra::DVector;

use crate::assembly::cell_permeabilities;
use crate::error::{BiotError, Result};
use crate::evolution::{solve_linear_trajectory, EvolutionContext, TrajectoryRecord, ZSource};
use crate::field::{restrict, ScalarField};
use crate::operators::Discretization;
use crate::scenario::{InitialGuess, PicardMode, Scenario};

/// One row of the Picard iteration log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub residual: f64,
    pub energy_bound_c: f64,
    pub wallclock_s: f64,
}

/// State after the last sweep.
#[derive(Debug, Clone)]
pub struct PicardState {
    pub iter: usize,
    /// Permeability argument used in the last sweep.
    pub z: Vec<ScalarField>,
    /// Fluid content produced by the last sweep, same variables as `z`.
    pub zeta: Vec<ScalarField>,
    pub residual: f64,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub trajectory: TrajectoryRecord,
    pub history: Vec<IterationLog>,
    pub state: PicardState,
    pub estimates: SolutionEstimates,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PicardOptions {
    pub guess: InitialGuess,
    /// Record real elapsed time in the log; otherwise `wallclock_s = 0` so
    /// output stays reproducible.
    pub timing: bool,
}

fn weighted_l2(ctx: &EvolutionContext, a: &[ScalarField], b: &[ScalarField]) -> f64 {
    let disc = ctx.disc;
    let mut sum = 0.0;
    for n in 1..a.len() {
        let d = ScalarField::new(&a[n].values - &b[n].values);
        sum += ctx.sc.dt * disc.mass_full.quadratic_form(&d.values);
    }
    sum.max(0.0).sqrt()
}

/// `√(dt Σ_{n≥1} ‖fⁿ‖²_{L²})`.
pub fn l2_l2(disc: &Discretization, dt: f64, fields: &[ScalarField]) -> f64 {
    fields
        .iter()
        .skip(1)
        .map(|f| dt * disc.mass_full.quadratic_form(&f.values))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

fn formulation_zeta(ctx: &EvolutionContext, tr: &TrajectoryRecord) -> Vec<ScalarField> {
    tr.zeta
        .iter()
        .enumerate()
        .map(|(n, z)| ctx.to_formulation(n, z).at_time(ctx.times[n]))
        .collect()
}

/// Solve the nonlinear problem for a scenario with default options.
pub fn picard_solve(disc: &Discretization, sc: &Scenario) -> Result<PicardOutcome> {
    let ctx = EvolutionContext::new(disc, sc)?;
    picard_solve_with(
        &ctx,
        PicardOptions {
            guess: sc.initial_guess,
            timing: false,
        },
    )
}

pub fn picard_solve_with(ctx: &EvolutionContext, opts: PicardOptions) -> Result<PicardOutcome> {
    let sc = ctx.sc;
    let start = Instant::now();
    let elapsed = || if opts.timing { start.elapsed().as_secs_f64() } else { 0.0 };

    if sc.picard_mode == PicardMode::PerStepLagged {
        let tr = solve_linear_trajectory(ctx, ZSource::Lagged)?;
        let zeta = formulation_zeta(ctx, &tr);
        let mut z = vec![zeta[0].clone()];
        z.extend(zeta[..zeta.len() - 1].iter().cloned());
        let residual = weighted_l2(ctx, &zeta, &z);
        let estimates = solution_estimates(ctx, &tr);
        let history = vec![IterationLog {
            iter: 1,
            residual,
            energy_bound_c: estimates.pressure_energy,
            wallclock_s: elapsed(),
        }];
        return Ok(PicardOutcome {
            trajectory: tr,
            history,
            state: PicardState {
                iter: 1,
                z,
                zeta,
                residual,
                theta: sc.theta,
            },
            estimates,
        });
    }

    let mut z = ctx.initial_guess(opts.guess);
    let mut history = Vec::new();
    for iter in 1..=sc.max_iters {
        let tr = solve_linear_trajectory(ctx, ZSource::Given(&z))?;
        let zeta = formulation_zeta(ctx, &tr);
        let residual = weighted_l2(ctx, &zeta, &z);
        let scale = 1.0 + l2_l2(ctx.disc, sc.dt, &zeta);
        let estimates = solution_estimates(ctx, &tr);
        history.push(IterationLog {
            iter,
            residual,
            energy_bound_c: estimates.pressure_energy,
            wallclock_s: elapsed(),
        });
        log::debug!("picard sweep {iter}: residual {residual:.3e}");
        if !residual.is_finite() {
            return Err(BiotError::NotConverged { history });
        }
        if residual <= sc.picard_tol * scale {
            return Ok(PicardOutcome {
                trajectory: tr,
                history,
                state: PicardState {
                    iter,
                    z,
                    zeta,
                    residual,
                    theta: sc.theta,
                },
                estimates,
            });
        }
        z = z
            .iter()
            .zip(&zeta)
            .map(|(zm, zt)| {
                let mut next = ScalarField::new(&zm.values * (1.0 - sc.theta) + &zt.values * sc.theta);
                next.time = zm.time;
                next
            })
            .collect();
    }
    Err(BiotError::NotConverged { history })
}

/// Constants of the a priori estimates observed on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolutionEstimates {
    /// `(c₀‖p‖²_{L∞L²} + ‖p‖²_{L²V}) / (‖d₀‖² + DATA)`.
    pub pressure_energy: f64,
    /// `‖u‖²_{L²V} / (‖p‖²_{L²V} + ‖F‖²_{L²L²})`.
    pub displacement: f64,
    /// `‖ζ_t‖_{L²V′} / (‖p‖_{L²V} + √DATA)`.
    pub content_rate: f64,
    /// `‖ζ‖_{L²H¹} / ‖p‖_{L²V}`.
    pub content_regularity: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

pub fn solution_estimates(ctx: &EvolutionContext, tr: &TrajectoryRecord) -> SolutionEstimates {
    let disc = ctx.disc;
    let sc = ctx.sc;
    let dt = sc.dt;
    let mut p_linf_sq = 0.0f64;
    let mut p_v_sq = 0.0;
    let mut u_v_sq = 0.0;
    let mut f_sq = 0.0;
    let mut zt_sq = 0.0;
    let mut z_h1_sq = 0.0;
    for n in 1..tr.times.len() {
        let l = &tr.ledger[n];
        p_linf_sq = p_linf_sq.max(l.l2_p * l.l2_p);
        p_v_sq += dt * l.v_p * l.v_p;
        let uv = disc.elasticity.v_norm(&tr.u[n]);
        u_v_sq += dt * uv * uv;
        f_sq += dt * force_l2_sq(disc, sc, tr.times[n]);
        zt_sq += dt * l.vprime_dzeta * l.vprime_dzeta;
        z_h1_sq += dt * l.h1_zeta * l.h1_zeta;
    }
    let d0_sq = disc.mass_full.quadratic_form(&ctx.d0.values);
    let data = tr.data_functional;
    SolutionEstimates {
        pressure_energy: ratio(sc.c0 * p_linf_sq + p_v_sq, d0_sq + data),
        displacement: ratio(u_v_sq, p_v_sq + f_sq),
        content_rate: ratio(zt_sq.sqrt(), p_v_sq.sqrt() + data.sqrt()),
        content_regularity: ratio(z_h1_sq.sqrt(), p_v_sq.sqrt()),
    }
}

fn force_l2_sq(disc: &Discretization, sc: &Scenario, t: f64) -> f64 {
    if !sc.has_force() {
        return 0.0;
    }
    disc.mesh
        .geometries()
        .iter()
        .map(|g| {
            let f = sc.eval_force(g.centroid, t);
            g.measure * (f[0] * f[0] + f[1] * f[1])
        })
        .sum()
}

/// A posteriori residuals of the nonlinear weak form.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    /// Per-step `‖r‖_{V′}` of the pressure equation, steps `1..=N`.
    pub pressure_residuals: Vec<f64>,
    /// Per-step elasticity residual in the energy dual norm, steps `0..=N`.
    pub elasticity_residuals: Vec<f64>,
    pub max_pressure_residual: f64,
    pub max_elasticity_residual: f64,
}

/// Recompute `(ζⁿ − ζⁿ⁻¹)/dt + A(ζⁿ)pⁿ − Sⁿ` with the solution's own fluid
/// content, together with the elasticity residual.
pub fn verify_fixed_point(ctx: &EvolutionContext, tr: &TrajectoryRecord) -> FixedPointReport {
    let disc = ctx.disc;
    let sc = ctx.sc;
    let g = disc.elasticity.coupling();
    let pairing = |n: usize| -> DVector<f64> {
        if n == 0 {
            ctx.b0.clone()
        } else {
            restrict(&g.mul_vec(&tr.u[n].values), &disc.scalar)
                + disc.b.mass_interior() * tr.p[n].interior(&disc.scalar) * sc.c0
        }
    };
    let mut pressure_residuals = Vec::with_capacity(ctx.n_steps());
    let mut prev = pairing(0);
    for n in 1..tr.times.len() {
        let cur = pairing(n);
        let weights = cell_permeabilities(&disc.mesh, &tr.zeta[n], &sc.law, None);
        let a = ctx.stiffness_matrix(&weights);
        let pi = tr.p[n].interior(&disc.scalar);
        let r = (&cur - &prev) / sc.dt + a * pi - &ctx.s_loads[n];
        pressure_residuals.push(disc.riesz.dual_norm_interior(&r));
        prev = cur;
    }
    let elasticity_residuals: Vec<f64> = (0..tr.times.len())
        .map(|n| disc.elasticity.residual_norm(&tr.u[n], &tr.p[n], &ctx.f_loads[n]))
        .collect();
    FixedPointReport {
        max_pressure_residual: pressure_residuals.iter().copied().fold(0.0, f64::max),
        max_elasticity_residual: elasticity_residuals.iter().copied().fold(0.0, f64::max),
        pressure_residuals,
        elasticity_residuals,
    }
}

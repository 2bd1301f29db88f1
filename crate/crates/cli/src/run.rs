//! Mode dispatch and output writing.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use biot_core::battery;
use biot_core::diagnostics::{
    incompressible_limit, mms_convergence, postprocess_fields, two_guess_probe, uniqueness_monitor, LadderKind,
    RateTable,
};
use biot_core::error::{BiotError, Result};
use biot_core::evolution::{energy_audit_linear, EnergyAudit};
use biot_core::fixedpoint::{verify_fixed_point, FixedPointReport, SolutionEstimates};
use biot_core::output::{iteration_log_csv, read_csv, read_snapshot, snapshot, trajectory_csv, TRAJECTORY_HEADER};
use biot_core::scenario::PicardMode;
use biot_core::{Discretization, EvolutionContext, PicardOptions, ScalarField, TrajectoryRecord};
use serde::{Deserialize, Serialize};

use crate::config::{parse_scenario, ScenarioFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Mms,
    Limit,
    CheckOps,
    Audit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub mode: Mode,
    pub scenario: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub per_step_lagged: bool,
    pub timing: bool,
}

/// A posteriori nonlinear residual accepted by `solve`.
pub const FIXED_POINT_TOL: f64 = 1e-7;
/// Agreement required between a stored and a recomputed quantity.
pub const AUDIT_TOL: f64 = 1e-12;
pub const SPATIAL_ORDER: (f64, f64) = (2.0, 0.3);
pub const TEMPORAL_ORDER: (f64, f64) = (1.0, 0.2);
/// Meshes of the default operator battery.
pub const DEFAULT_BATTERY: [(usize, usize); 4] = [(1, 4), (1, 8), (2, 2), (2, 4)];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Numbers recorded by `solve` and re-derived by `audit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub picard_iterations: usize,
    pub final_residual: f64,
    pub per_step_lagged: bool,
    pub initial_pressure_recovered: bool,
    pub n_steps: usize,
    pub initial_energy: f64,
    pub max_energy_violation: f64,
    pub energy_passed: bool,
    pub max_pressure_residual: f64,
    pub max_elasticity_residual: f64,
    pub data_functional: f64,
    pub estimates: [f64; 4],
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn load(manifest: &RunManifest) -> Result<ScenarioFile> {
    let path = manifest
        .scenario
        .as_ref()
        .ok_or_else(|| BiotError::Config(format!("--scenario is required for {:?}", manifest.mode)))?;
    parse_scenario(path)
}

pub fn run(manifest: &RunManifest) -> Result<RunReport> {
    if manifest.mode != Mode::Audit {
        fs::create_dir_all(&manifest.out)?;
    }
    match manifest.mode {
        Mode::Solve => solve(manifest),
        Mode::Mms => mms(manifest),
        Mode::Limit => limit(manifest),
        Mode::CheckOps => check_ops(manifest),
        Mode::Audit => audit(manifest),
    }
}

fn energy_csv(a: &EnergyAudit, times: &[f64]) -> String {
    let mut out = String::from("t,slack\n");
    for (s, t) in a.slack.iter().zip(&times[1..]) {
        let _ = writeln!(out, "{t:.16e},{s:.16e}");
    }
    out
}

fn fixed_point_csv(r: &FixedPointReport, times: &[f64]) -> String {
    let mut out = String::from("t,pressure_residual_Vprime,elasticity_residual\n");
    for (n, t) in times.iter().enumerate() {
        let p = if n == 0 { 0.0 } else { r.pressure_residuals[n - 1] };
        let _ = writeln!(out, "{t:.16e},{p:.16e},{:.16e}", r.elasticity_residuals[n]);
    }
    out
}

fn estimates_csv(e: &SolutionEstimates, a: &EnergyAudit, data: f64) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in [
        ("pressure_energy", e.pressure_energy),
        ("displacement", e.displacement),
        ("content_rate", e.content_rate),
        ("content_regularity", e.content_regularity),
        ("dual_estimate_constant", a.dual_estimate_constant),
        ("regularity_constant", a.regularity_constant),
        ("data_functional", data),
    ] {
        let _ = writeln!(out, "{k},{v:.16e}");
    }
    out
}

fn derived_csv(disc: &Discretization, tr: &TrajectoryRecord, sc: &biot_core::Scenario) -> String {
    let d = postprocess_fields(&disc.mesh, tr, &sc.law);
    let mut out = String::from("t,cell,v_x,v_y,T_xx,T_xy,T_yx,T_yy\n");
    for (n, t) in tr.times.iter().enumerate() {
        for (c, (v, s)) in d.darcy[n].iter().zip(&d.stress[n]).enumerate() {
            let _ = writeln!(
                out,
                "{t:.16e},{c},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                v[0], v[1], s[0][0], s[0][1], s[1][0], s[1][1]
            );
        }
    }
    out
}

fn write_snapshots(dir: &Path, tr: &TrajectoryRecord, dim: usize) -> Result<()> {
    let snap = dir.join("snapshots");
    fs::create_dir_all(&snap)?;
    for (n, t) in tr.times.iter().enumerate() {
        write(&snap, &format!("p_{n:05}.txt"), &snapshot(&tr.p[n].values, 1, *t))?;
        write(&snap, &format!("u_{n:05}.txt"), &snapshot(&tr.u[n].values, dim, *t))?;
        write(&snap, &format!("zeta_{n:05}.txt"), &snapshot(&tr.zeta[n].values, 1, *t))?;
    }
    Ok(())
}

fn solve(m: &RunManifest) -> Result<RunReport> {
    let file = load(m)?;
    let sc = file.to_scenario(m.per_step_lagged)?;
    let disc = Discretization::new(sc.dim, sc.n)?;
    let ctx = EvolutionContext::new(&disc, &sc)?;
    let opts = PicardOptions { guess: sc.initial_guess, timing: m.timing };
    let outcome = match biot_core::picard_solve_with(&ctx, opts) {
        Ok(o) => o,
        Err(BiotError::NotConverged { history }) => {
            write(&m.out, "iterations.csv", &iteration_log_csv(&history))?;
            return Err(BiotError::NotConverged { history });
        }
        Err(e) => return Err(e),
    };
    let tr = &outcome.trajectory;
    let energy = energy_audit_linear(&ctx, tr)?;
    let fp = verify_fixed_point(&ctx, tr);
    let lagged = sc.picard_mode == PicardMode::PerStepLagged;

    write(&m.out, "trajectory.csv", &trajectory_csv(tr))?;
    write(&m.out, "iterations.csv", &iteration_log_csv(&outcome.history))?;
    write(&m.out, "energy.csv", &energy_csv(&energy, &tr.times))?;
    write(&m.out, "fixed_point.csv", &fixed_point_csv(&fp, &tr.times))?;
    write(&m.out, "estimates.csv", &estimates_csv(&outcome.estimates, &energy, tr.data_functional))?;
    write(&m.out, "derived.csv", &derived_csv(&disc, tr, &sc))?;
    write_snapshots(&m.out, tr, sc.dim)?;

    let probe = if file.uniqueness.probe && !lagged { Some(two_guess_probe(&ctx)?) } else { None };
    let uniq = uniqueness_monitor(&disc, tr, &sc.law, sc.dt, file.uniqueness.lipschitz_override, probe);
    write(&m.out, "uniqueness.csv", &uniq.to_csv())?;

    let e = &outcome.estimates;
    let summary = SolveSummary {
        picard_iterations: outcome.iterations(),
        final_residual: outcome.state.residual,
        per_step_lagged: lagged,
        initial_pressure_recovered: tr.initial_pressure_recovered,
        n_steps: tr.n_steps(),
        initial_energy: energy.initial_energy,
        max_energy_violation: energy.max_violation,
        energy_passed: energy.passed,
        max_pressure_residual: fp.max_pressure_residual,
        max_elasticity_residual: fp.max_elasticity_residual,
        data_functional: tr.data_functional,
        estimates: [e.pressure_energy, e.displacement, e.content_rate, e.content_regularity],
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| BiotError::Config(e.to_string()))?;
    write(&m.out, "summary.json", &json)?;

    let mut checks = vec![
        Check::new(
            "picard",
            true,
            if lagged {
                format!("single lagged sweep, lag residual {:.3e}", summary.final_residual)
            } else {
                format!("converged in {} iterations, residual {:.3e}", summary.picard_iterations, summary.final_residual)
            },
        ),
        Check::new(
            "energy inequality",
            energy.passed,
            format!("max relative violation {:.3e}", energy.max_violation),
        ),
    ];
    let fp_detail = format!(
        "max V' residual {:.3e}, elasticity {:.3e}",
        fp.max_pressure_residual, fp.max_elasticity_residual
    );
    if lagged {
        checks.push(Check::new("nonlinear residual (lagged, not enforced)", true, fp_detail));
    } else {
        let ok = fp.max_pressure_residual <= FIXED_POINT_TOL && fp.max_elasticity_residual <= FIXED_POINT_TOL;
        checks.push(Check::new("nonlinear residual", ok, fp_detail));
    }
    checks.push(Check::new(
        "uniqueness monitor (report only)",
        true,
        format!(
            "exponent {}, sup |grad p| {:.3e}, criterion satisfied: {}",
            uniq.exponent.map_or("n/a".into(), |x| format!("{x:.3e}")),
            uniq.sup_grad_p,
            uniq.criterion_satisfied
        ),
    ));
    Ok(RunReport { checks })
}

fn order_checks(table: &RateTable, label: &str, target: (f64, f64)) -> Vec<Check> {
    table
        .rows
        .iter()
        .skip(1)
        .map(|r| {
            Check::new(
                format!("{label} order n={} dt={:.3e}", r.n, r.dt),
                (r.order_p - target.0).abs() <= target.1,
                format!("p order {:.3} (target {} ± {})", r.order_p, target.0, target.1),
            )
        })
        .collect()
}

fn mms(m: &RunManifest) -> Result<RunReport> {
    let file = load(m)?;
    let spec = file.mms.clone().ok_or_else(|| BiotError::Config("mms: block missing from scenario".into()))?;
    let case = file.mms_case()?;
    let mut checks = Vec::new();
    let spatial = mms_convergence(&case, &spec.spatial_ladder, LadderKind::Spatial, file.t_final, file.picard_tol)?;
    write(&m.out, "mms_spatial.csv", &spatial.to_csv())?;
    checks.extend(order_checks(&spatial, "spatial", SPATIAL_ORDER));
    if !spec.temporal_ladder.is_empty() {
        let temporal =
            mms_convergence(&case, &spec.temporal_ladder, LadderKind::Temporal, file.t_final, file.picard_tol)?;
        write(&m.out, "mms_temporal.csv", &temporal.to_csv())?;
        checks.extend(order_checks(&temporal, "temporal", TEMPORAL_ORDER));
    }
    Ok(RunReport { checks })
}

fn limit(m: &RunManifest) -> Result<RunReport> {
    let file = load(m)?;
    let spec = file.limit.clone().ok_or_else(|| BiotError::Config("limit: block missing from scenario".into()))?;
    let sc = file.to_scenario(false)?;
    let report = incompressible_limit(&sc, &spec.ladder)?;
    write(&m.out, "limit.csv", &report.to_csv())?;
    Ok(RunReport {
        checks: vec![
            Check::new(
                "limit ladder converged",
                report.all_converged(),
                format!("{} rungs + c0 = 0 baseline", report.rows.len()),
            ),
            Check::new("c0 p strictly decreasing", report.c0p_strictly_decreasing, fmt_col(&report.rows, |r| r.c0p_norm)),
            Check::new("p gap decreasing", report.p_gap_decreasing, fmt_col(&report.rows, |r| r.p_gap)),
        ],
    })
}

fn fmt_col<T>(rows: &[T], f: impl Fn(&T) -> f64) -> String {
    rows.iter().map(|r| format!("{:.3e}", f(r))).collect::<Vec<_>>().join(" ")
}

fn check_ops(m: &RunManifest) -> Result<RunReport> {
    let meshes = match &m.scenario {
        Some(p) => {
            let file = parse_scenario(p)?;
            file.check_ops.map_or_else(|| vec![(file.dim, file.n)], |c| c.meshes)
        }
        None => DEFAULT_BATTERY.to_vec(),
    };
    let results = battery::check_ops(&meshes, m.seed)?;
    let mut csv = String::from("check,value,tolerance,passed\n");
    for r in &results {
        let _ = writeln!(csv, "{},{:.16e},{:.16e},{}", r.name, r.value, r.tolerance, r.passed);
    }
    write(&m.out, "check_ops.csv", &csv)?;
    Ok(RunReport {
        checks: results
            .iter()
            .map(|r| Check::new(&r.name, r.passed, format!("{:.3e} (tol {:.1e})", r.value, r.tolerance)))
            .collect(),
    })
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= AUDIT_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Re-derive a stored `solve` run from its pressure snapshots.
fn audit(m: &RunManifest) -> Result<RunReport> {
    let file = load(m)?;
    let text = fs::read_to_string(m.out.join("summary.json"))?;
    let stored: SolveSummary = serde_json::from_str(&text).map_err(|e| BiotError::Parse {
        message: format!("summary.json: {e}"),
        position: e.line(),
    })?;
    let sc = file.to_scenario(stored.per_step_lagged)?;
    let disc = Discretization::new(sc.dim, sc.n)?;
    let ctx = EvolutionContext::new(&disc, &sc)?;
    let mut p = Vec::with_capacity(stored.n_steps + 1);
    for n in 0..=stored.n_steps {
        let text = fs::read_to_string(m.out.join("snapshots").join(format!("p_{n:05}.txt")))?;
        let (values, _, time) = read_snapshot(&text)?;
        if values.len() != disc.mesh.n_vertices() {
            return Err(BiotError::Config(format!("snapshot {n} does not match the scenario mesh")));
        }
        p.push(ScalarField::new(values).at_time(time));
    }
    let tr = TrajectoryRecord::from_pressures(&ctx, p, stored.initial_pressure_recovered);
    let energy = energy_audit_linear(&ctx, &tr)?;
    let fp = verify_fixed_point(&ctx, &tr);

    let stored_rows = read_csv(&fs::read_to_string(m.out.join("trajectory.csv"))?, TRAJECTORY_HEADER)?;
    let fresh_rows = read_csv(&trajectory_csv(&tr), TRAJECTORY_HEADER)?;
    let ledger_ok = stored_rows.len() == fresh_rows.len()
        && stored_rows.iter().zip(&fresh_rows).all(|(a, b)| a.iter().zip(b).all(|(x, y)| close(*x, *y)));

    let pairs = [
        ("initial energy", stored.initial_energy, energy.initial_energy),
        ("energy violation", stored.max_energy_violation, energy.max_violation),
        ("pressure residual", stored.max_pressure_residual, fp.max_pressure_residual),
        ("elasticity residual", stored.max_elasticity_residual, fp.max_elasticity_residual),
        ("data functional", stored.data_functional, tr.data_functional),
    ];
    let mut checks: Vec<Check> = pairs
        .iter()
        .map(|(name, a, b)| Check::new(format!("audit {name}"), close(*a, *b), format!("stored {a:.16e}, recomputed {b:.16e}")))
        .collect();
    checks.push(Check::new("audit trajectory ledger", ledger_ok, format!("{} rows", fresh_rows.len())));
    checks.push(Check::new(
        "audit energy inequality",
        energy.passed,
        format!("max relative violation {:.3e}", energy.max_violation),
    ));
    let mut csv = String::from("check,passed,detail\n");
    for c in &checks {
        let _ = writeln!(csv, "{},{},{}", c.name, c.passed, c.detail.replace(',', ";"));
    }
    write(&m.out, "audit.csv", &csv)?;
    Ok(RunReport { checks })
}

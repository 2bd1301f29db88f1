//! JSON scenario files.

use std::path::Path;

use biot_core::diagnostics::MmsCase;
use biot_core::error::{BiotError, Result};
use biot_core::expr::Expr;
use biot_core::scenario::{Formulation, InitialContent, InitialGuess, PicardMode, Scenario, TranslationMode};
use biot_core::PermeabilityLaw;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Constant { value: f64 },
    ClampedExponential { k0: f64, rate: f64, k1: f64, k2: f64 },
    Logistic { steepness: f64, center: f64, k1: f64, k2: f64 },
    Table { nodes: Vec<(f64, f64)> },
}

impl LawSpec {
    pub fn build(&self) -> Result<PermeabilityLaw> {
        match self {
            LawSpec::Constant { value } => PermeabilityLaw::constant(*value),
            LawSpec::ClampedExponential { k0, rate, k1, k2 } => PermeabilityLaw::clamped_exponential(*k0, *rate, *k1, *k2),
            LawSpec::Logistic { steepness, center, k1, k2 } => PermeabilityLaw::logistic(*steepness, *center, *k1, *k2),
            LawSpec::Table { nodes } => PermeabilityLaw::table(nodes.clone()),
        }
    }
}

/// Manufactured solution: the built-in case for the dimension, or custom
/// exact fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MmsSpec {
    #[serde(default)]
    pub p: Option<String>,
    #[serde(default)]
    pub u: Option<Vec<String>>,
    /// `[n, dt]` rungs with `dt ∝ h²`.
    pub spatial_ladder: Vec<(usize, f64)>,
    /// `[n, dt]` rungs at fixed `n`.
    #[serde(default)]
    pub temporal_ladder: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSpec {
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckOpsSpec {
    /// `[dim, n]` pairs.
    pub meshes: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSpec {
    #[serde(default = "yes")]
    pub probe: bool,
    #[serde(default)]
    pub lipschitz_override: Option<f64>,
}

fn yes() -> bool {
    true
}

impl Default for UniquenessSpec {
    fn default() -> Self {
        Self { probe: true, lipschitz_override: None }
    }
}

fn zero() -> String {
    "0".into()
}
fn default_picard_tol() -> f64 {
    1e-8
}
fn default_max_iters() -> usize {
    50
}
fn default_linear_tol() -> f64 {
    1e-10
}
fn default_theta() -> f64 {
    1.0
}

/// On-disk scenario schema. Expressions are strings in `x`, `y`, `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dim: usize,
    pub n: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    pub c0: f64,
    pub law: LawSpec,
    #[serde(default = "zero")]
    pub source: String,
    #[serde(default)]
    pub force: Vec<String>,
    #[serde(default)]
    pub force_t: Option<Vec<String>>,
    #[serde(default = "zero")]
    pub d0: String,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_linear_tol")]
    pub linear_tol: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub translation: TranslationSpec,
    #[serde(default)]
    pub formulation: FormulationSpec,
    #[serde(default)]
    pub initial_guess: GuessSpec,
    #[serde(default)]
    pub mms: Option<MmsSpec>,
    #[serde(default)]
    pub limit: Option<LimitSpec>,
    #[serde(default)]
    pub check_ops: Option<CheckOpsSpec>,
    #[serde(default)]
    pub uniqueness: UniquenessSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TranslationSpec {
    #[default]
    BackwardDifference,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FormulationSpec {
    #[default]
    Translated,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GuessSpec {
    #[default]
    InitialContent,
    Zero,
}

fn field_err(field: &str, e: BiotError) -> BiotError {
    match e {
        BiotError::Parse { message, position } => BiotError::Config(format!(
            "{field}: {message} at offset {position}"
        )),
        BiotError::Config(m) => BiotError::Config(format!("{field}: {m}")),
        other => other,
    }
}

fn parse_expr(field: &str, s: &str) -> Result<Expr> {
    Expr::parse(s).map_err(|e| field_err(field, e))
}

fn parse_pair(field: &str, v: &[String], dim: usize) -> Result<[Expr; 2]> {
    if v.len() > 2 || (v.len() == 2 && dim == 1) {
        return Err(BiotError::Config(format!(
            "{field}: expected at most {dim} components, got {}",
            v.len()
        )));
    }
    let get = |i: usize| v.get(i).map_or(Ok(Expr::num(0.0)), |s| parse_expr(&format!("{field}[{i}]"), s));
    Ok([get(0)?, get(1)?])
}

impl ScenarioFile {
    pub fn law(&self) -> Result<PermeabilityLaw> {
        self.law.build().map_err(|e| field_err("law", e))
    }

    pub fn to_scenario(&self, per_step_lagged: bool) -> Result<Scenario> {
        let mut sc = Scenario::new(self.dim, self.n, self.t_final, self.dt, self.c0, self.law()?)
            .with_source(parse_expr("source", &self.source)?)
            .with_force(parse_pair("force", &self.force, self.dim)?)
            .with_d0(InitialContent::Analytic(parse_expr("d0", &self.d0)?));
        sc.force_t = self
            .force_t
            .as_ref()
            .map(|f| parse_pair("force_t", f, self.dim))
            .transpose()?;
        sc.picard_tol = self.picard_tol;
        sc.max_iters = self.max_iters;
        sc.linear_tol = self.linear_tol;
        sc.theta = self.theta;
        sc.translation = match self.translation {
            TranslationSpec::BackwardDifference => TranslationMode::BackwardDifference,
            TranslationSpec::Analytic => TranslationMode::Analytic,
        };
        sc.formulation = match self.formulation {
            FormulationSpec::Translated => Formulation::Translated,
            FormulationSpec::Direct => Formulation::Direct,
        };
        sc.initial_guess = match self.initial_guess {
            GuessSpec::InitialContent => InitialGuess::InitialContent,
            GuessSpec::Zero => InitialGuess::Zero,
        };
        if per_step_lagged {
            sc.picard_mode = PicardMode::PerStepLagged;
        }
        sc.validate()?;
        Ok(sc)
    }

    /// The manufactured case of the `mms` block.
    pub fn mms_case(&self) -> Result<MmsCase> {
        let spec = self
            .mms
            .as_ref()
            .ok_or_else(|| BiotError::Config("mms: block missing from scenario".into()))?;
        let law = self.law()?;
        match (&spec.p, &spec.u) {
            (None, None) if self.dim == 1 => MmsCase::standard_1d(self.c0, law),
            (None, None) => MmsCase::standard_2d(self.c0, law),
            (Some(p), Some(u)) => {
                let p = parse_expr("mms.p", p)?;
                let u = parse_pair("mms.u", u, self.dim)?;
                MmsCase::new(self.dim, p, u, self.c0, law).map_err(|e| field_err("mms", e))
            }
            _ => Err(BiotError::Config("mms: give both p and u or neither".into())),
        }
    }
}

/// Parse and validate a scenario from JSON text. Syntax errors carry the
/// line number.
pub fn parse_scenario_str(text: &str) -> Result<ScenarioFile> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| BiotError::Parse {
        message: e.to_string(),
        position: e.line(),
    })?;
    file.to_scenario(false)?;
    Ok(file)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BiotError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    parse_scenario_str(&text)
}

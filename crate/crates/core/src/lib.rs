//! Finite element solver for quasi-static nonlinear poroelasticity with a
//! fluid-content dependent permeability, on the unit interval and square.

pub mod assembly;
pub mod battery;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod expr;
pub mod field;
pub mod fixedpoint;
pub mod mesh;
pub mod operators;
pub mod output;
pub mod permeability;
pub mod quadrature;
pub mod scenario;

pub use assembly::LinearOperatorMatrix;
pub use error::{BiotError, Result};
pub use evolution::{EvolutionContext, TrajectoryRecord};
pub use field::{ScalarField, VectorField};
pub use fixedpoint::{picard_solve, picard_solve_with, IterationLog, PicardOptions, PicardOutcome};
pub use mesh::{build_unit_mesh, DofMap, Mesh, Point, SpaceKind};
pub use operators::Discretization;
pub use permeability::PermeabilityLaw;
pub use scenario::Scenario;

//! Verification drivers built on the solver.

pub mod limit;
pub mod mms;
pub mod postprocess;
pub mod uniqueness;

pub use limit::{incompressible_limit, LimitReport, LimitRow};
pub use mms::{mms_convergence, LadderKind, MmsCase, MmsRow, RateTable};
pub use postprocess::{postprocess_fields, DerivedFields};
pub use uniqueness::{two_guess_probe, uniqueness_monitor, ProbeResult, UniquenessReport};

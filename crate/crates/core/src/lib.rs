//! Regular two-level fractional factorial designs under blocking,
//! split-plot and strip-plot restrictions, with error-stratum allocation,
//! robust per-stratum screening and REML mixed-model analysis.

pub mod algebra;
pub mod dataset;
pub mod design;
pub mod error;
pub mod exec;
pub mod gf2;
pub mod mixed;
pub mod scenario;
pub mod screening;
pub mod strata;

pub use error::{Error, Result};
pub use exec::Exec;

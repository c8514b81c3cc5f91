//! Construction of the run table: fraction, blocking, four-level
//! extension and assignment to weeks, plates and tubes.

pub mod blocking;
pub mod extension;
pub mod fraction;
pub mod runtable;

pub use blocking::{assign_blocks, search_blocking, BlockingScheme, PositionLookup, PseudoFactor, RankedScheme};
pub use extension::{enumerate_four_level_extensions, ExtensionClass, FourLevelExtension};
pub use fraction::{sign, Key, RegularDesign};
pub use runtable::{assign_units, RunRow, RunTable, TubeSharing, UnitPlan};

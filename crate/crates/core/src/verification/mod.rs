//! Manufactured solutions, error norms and convergence-order estimation.

pub mod eoc;
pub mod expr;
pub mod manufactured;
pub mod norms;

pub use eoc::{fit_power_law, pairwise_eoc, EocTable, PowerFit};
pub use manufactured::{channel2d_case, zero_case, ManufacturedCase};
pub use norms::{level_errors, ErrorAccumulator, LevelErrors, NormKind, SpaceTimeErrors};

//! Shipped environments.

pub mod grid;
pub mod nuclear;
pub mod tiny;

pub use grid::{GridBenchmark, GridBenchmarkConfig, RobotRoute};
pub use nuclear::{NuclearConfig, NuclearDomain, NuclearMa, RewardTrigger};
pub use tiny::{TinyConfig, TinyOracleDomain};

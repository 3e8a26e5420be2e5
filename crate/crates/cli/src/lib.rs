//! Instance files, report emission and the `uamn` command line.

pub mod emit;
pub mod error;
pub mod instance;
pub mod run;
pub mod table;

pub use error::CliError;
pub use instance::{parse_instance, Instance, InstanceFile};

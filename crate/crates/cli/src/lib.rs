//! Experiment runner: configuration, dispatch to the library trainers and
//! oracle, and CSV/JSON artifact output.

pub mod config;
pub mod error;
pub mod grid;
pub mod record;
pub mod run;

pub use config::{parse_config, read_config, Command, ConfigFile, RunConfig};
pub use error::{CliError, CliResult};
pub use record::{emit_plotdata, ExperimentRecord, Table};
pub use run::run;

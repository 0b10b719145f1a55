//! Config-driven experiment runner for the `raywave` library.
//!
//! A run is described by a small TOML file (or a named preset), validated by
//! [`config::parse_config`], and executed by [`run::run`], which writes CSV and
//! PGM artifacts plus a `manifest.json` into an output directory.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{parse_config, parse_config_with, serialize_config, ConfigError, ConfigErrors, ExperimentConfig, Kind, Overrides};
pub use presets::{list_presets, Preset};
pub use run::{run, Manifest, RunError};

/// Exit status for a configuration problem.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for a failure inside a numerical pipeline.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for a failure to read or write files.
pub const EXIT_IO: i32 = 1;

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => EXIT_NUMERICAL,
            RunError::Io { .. } => EXIT_IO,
        }
    }
}

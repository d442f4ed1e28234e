//! Experiment harness for the lyaptrade engine: configuration loading,
//! backtest ensembles with verification, oracle runs, windowed scaling and
//! trace conversion. The `lyaptrade` binary is a thin layer over this crate.

pub mod checks;
pub mod commands;
pub mod config;

pub use commands::{Bundle, RunOptions, Status};
pub use config::{CheckName, ConfigError, ExperimentConfig, Resolved};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const DETERMINISTIC_FAIL: u8 = 2;
    pub const STATISTICAL_FAIL: u8 = 3;
    pub const CAPACITY: u8 = 4;
    pub const CONFIG: u8 = 5;
}

/// Exit code for an error that aborted a command. Too few replications for a
/// statistical check counts as a configuration problem.
pub fn error_exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return exit::CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<lyaptrade::Error>() {
            match e {
                lyaptrade::Error::Capacity { .. } => return exit::CAPACITY,
                lyaptrade::Error::StatisticalPower { .. } => return exit::CONFIG,
                _ => {}
            }
        }
    }
    exit::OTHER
}

/// Extra advice printed after an error, if any.
pub fn error_hint(err: &anyhow::Error) -> Option<String> {
    match error_exit_code(err) {
        exit::CAPACITY => Some(format!(
            "hint: set {}=<cells> to raise every solver cap, or shrink mu_max, the budget or the window",
            lyaptrade::limits::CAPACITY_ENV
        )),
        exit::CONFIG => Some("hint: the location above is a JSON pointer into the config file".into()),
        _ => None,
    }
}

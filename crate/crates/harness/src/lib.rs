//! Benchmark harness: configuration, data loading, parallel runs, CSV artifacts and
//! SVG rendering behind the `autoal` binary.

pub mod config;
pub mod data;
pub mod output;
pub mod render;
pub mod runner;

pub use config::{DatasetKind, ExperimentConfig, VERSION};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("training diverged: {0}")]
    Diverged(String),
}

impl HarnessError {
    /// Process exit code: 2 for bad configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<autoal_core::Error> for HarnessError {
    fn from(e: autoal_core::Error) -> Self {
        use autoal_core::Error as E;
        match e {
            E::Input(_) | E::Shape(_) | E::State(_) => HarnessError::Config(e.to_string()),
            E::Training(m) => HarnessError::Diverged(m),
            E::Format(_) | E::Io(_) => HarnessError::Io(e.to_string()),
        }
    }
}

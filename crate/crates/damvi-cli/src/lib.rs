//! Command-line trainer and experiment harness for the `damvi` library:
//! train and persist models, evaluate them on CSV data, compare resampling
//! baselines over repeated splits, and sweep the imbalance ratio.

pub mod commands;
pub mod experiment;
pub mod source;

/// Error with an exit-code classification: 1 usage, 2 data, 3 numerical.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(damvi::Error),
    Numerical(damvi::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Data(e) | CliError::Numerical(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<damvi::Error> for CliError {
    fn from(e: damvi::Error) -> Self {
        match e {
            damvi::Error::DegenerateDenominator { .. }
            | damvi::Error::BoundInapplicable { .. }
            | damvi::Error::InvalidDistribution { .. } => CliError::Numerical(e),
            damvi::Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Data(other),
        }
    }
}

use std::fmt;

use liftbmf::boolmat::BoolMatError;
use liftbmf::experiment::ExperimentError;
use liftbmf::factorize::FactorizeError;
use liftbmf::mln::MlnError;
use liftbmf::reduction::ReductionError;
use liftbmf::sampler::SamplerError;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad input files or flags: exit 1.
    Input(String),
    /// A size or search cap refused the job: exit 2.
    Cap(String),
    /// Evidence contradicts the hard formulas: exit 3.
    Inconsistent(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Cap(_) => 2,
            CliError::Inconsistent(_) => 3,
        }
    }

    pub fn context(self, what: &str) -> CliError {
        match self {
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Cap(m) => CliError::Cap(format!("{what}: {m}")),
            CliError::Inconsistent(m) => CliError::Inconsistent(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Cap(m) | CliError::Inconsistent(m) => f.write_str(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BoolMatError> for CliError {
    fn from(e: BoolMatError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FactorizeError> for CliError {
    fn from(e: FactorizeError) -> Self {
        match e {
            FactorizeError::SizeCap { .. } | FactorizeError::Timeout { .. } | FactorizeError::SearchCap { .. } => {
                CliError::Cap(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<MlnError> for CliError {
    fn from(e: MlnError) -> Self {
        match e.root() {
            MlnError::GroundingCap { .. } | MlnError::EnumerationCap { .. } => CliError::Cap(e.to_string()),
            MlnError::Inconsistent(_) => CliError::Inconsistent(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Mln(m) => m.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::Mln(m) => m.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(m) => CliError::Input(m),
            ExperimentError::Matrix(e) => e.into(),
            ExperimentError::Factorize(e) => e.into(),
            ExperimentError::Reduction(e) => e.into(),
            ExperimentError::Mln(e) => e.into(),
            ExperimentError::Sampler(e) => e.into(),
        }
    }
}

use thiserror::Error;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<spherelab::Error> for CliError {
    fn from(e: spherelab::Error) -> Self {
        use spherelab::Error as E;
        let msg = e.to_string();
        match e {
            E::NonConvergence { .. }
            | E::StalledDescent { .. }
            | E::NotMinimalAtResolution { .. }
            | E::ClosestPointAmbiguous { .. }
            | E::TriangleViolation { .. } => Self::Numerical(msg),
            E::Io(_) | E::Parse(_) => Self::Io(msg),
            _ => Self::Validation(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

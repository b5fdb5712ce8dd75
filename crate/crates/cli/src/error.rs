//! CLI-level errors with process exit codes: 0 success, 2 configuration,
//! 3 infeasible optimization, 4 I/O.

use wmforge_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("optimization error: {0}")]
    Infeasible(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Config(m) | CoreError::Input(m) | CoreError::Parse(m) => {
                CliError::Config(m)
            }
            CoreError::Solver(m) => CliError::Infeasible(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Infeasible("x".into()).exit_code(), 3);
        assert_eq!(CliError::Io("x".into()).exit_code(), 4);
        let from_core: CliError = CoreError::Solver("infeasible".into()).into();
        assert_eq!(from_core.exit_code(), 3);
        let from_core: CliError = CoreError::Config("bad".into()).into();
        assert_eq!(from_core.exit_code(), 2);
    }
}

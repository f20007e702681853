use multiwell_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("hypothesis validation failed for wells {0:?}")]
    Hypothesis(Vec<usize>),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("output: {0}")]
    Output(String),
}

impl HarnessError {
    /// Process exit status for the command line.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Hypothesis(_) => 2,
            HarnessError::Core(CoreError::AmbiguousCluster(..)) => 3,
            HarnessError::Core(CoreError::NonConvergence { .. }) => 4,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(HarnessError::Hypothesis(vec![0]).exit_code(), 2);
        assert_eq!(HarnessError::Core(CoreError::AmbiguousCluster(-1.0, -1.0)).exit_code(), 3);
        let stuck = CoreError::NonConvergence {
            what: "shift-invert".into(),
            residual: 1.0,
        };
        assert_eq!(HarnessError::from(stuck).exit_code(), 4);
        assert_eq!(HarnessError::Scenario("x".into()).exit_code(), 1);
        assert_eq!(HarnessError::Core(CoreError::FitRefused("x".into())).exit_code(), 1);
    }
}

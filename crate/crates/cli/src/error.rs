use std::fmt;

use bmi_core::BmiError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;
pub const EXIT_DIVERGED: i32 = 5;

/// A failure ready to be reported as `ERROR <code>: <message>`.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: "Usage",
            message: message.into(),
            exit: EXIT_USAGE,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: "Io",
            message: message.into(),
            exit: EXIT_IO,
        }
    }

    /// Prefixes the message with the file that caused it.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub fn exit_code(e: &BmiError) -> i32 {
    match e {
        BmiError::InvalidParameter { .. } | BmiError::InvalidGrid { .. } => EXIT_USAGE,
        BmiError::Io(_)
        | BmiError::Malformed { .. }
        | BmiError::UnsupportedDepth(_)
        | BmiError::BadMagic { .. }
        | BmiError::UnsupportedVersion(_) => EXIT_IO,
        BmiError::NonFiniteState { .. } => EXIT_DIVERGED,
        BmiError::DimensionMismatch { .. }
        | BmiError::IndivisibleGrid { .. }
        | BmiError::ZeroArea { .. }
        | BmiError::ShapeMismatch(_)
        | BmiError::SingularProjection { .. }
        | BmiError::TooSmall { .. }
        | BmiError::InvariantViolation { .. } => EXIT_INVARIANT,
    }
}

impl From<BmiError> for CliError {
    fn from(e: BmiError) -> Self {
        Self {
            code: e.code(),
            message: e.to_string(),
            exit: exit_code(&e),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Keep the report on one line whatever the message contains.
        let msg = self.message.replace(['\n', '\r'], " ");
        write!(f, "ERROR {}: {}", self.code, msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(exit_code(&BmiError::NonFiniteState { iteration: 3 }), EXIT_DIVERGED);
        assert_eq!(exit_code(&BmiError::UnsupportedVersion(9)), EXIT_IO);
        assert_eq!(
            exit_code(&BmiError::IndivisibleGrid { height: 512, width: 512, rows: 3, cols: 3 }),
            EXIT_INVARIANT
        );
        assert_eq!(exit_code(&BmiError::SingularProjection { position: 0 }), EXIT_INVARIANT);
        assert_eq!(
            exit_code(&BmiError::InvalidParameter { field: "rho", reason: String::new() }),
            EXIT_USAGE
        );
    }

    #[test]
    fn report_is_one_line() {
        let e = CliError::io("a\nb");
        assert_eq!(e.to_string(), "ERROR Io: a b");
    }
}

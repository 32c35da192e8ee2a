use std::fmt;

/// Failure of a command: bad invocation (exit 1) or a domain error (exit 2).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(polymax::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Domain(e) => e.kind(),
        }
    }

    /// `{"error": kind, "message": text}` on one line.
    pub fn to_json_line(&self) -> String {
        let message = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        serde_json::json!({ "error": self.kind(), "message": message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<polymax::Error> for CliError {
    fn from(e: polymax::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(polymax::Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

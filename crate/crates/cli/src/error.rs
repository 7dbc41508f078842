use feedstab_core::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// A verification check failed.
    pub const VERIFY_FAIL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    /// Rank test or synthesis failed.
    pub const SYNTHESIS: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("rank check failed\n{table}")]
    Rank { table: String },

    #[error("verification failed: {0}")]
    Verify(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Rank { .. } => exit::SYNTHESIS,
            CliError::Verify(_) => exit::VERIFY_FAIL,
            CliError::Io(_) => exit::NUMERICAL,
            CliError::Core(e) => match e {
                Error::Config(_) | Error::Parse { .. } | Error::Usage(_) => exit::CONFIG,
                Error::Uncontrollable { .. } | Error::Synthesis { .. } | Error::Placement { .. } => exit::SYNTHESIS,
                _ => exit::NUMERICAL,
            },
        }
    }
}

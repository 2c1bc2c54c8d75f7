use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error: {0}")]
    Model(#[from] ota_core::Error),
    #[error("check failed: {0}")]
    Check(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Output(String),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_IO: i32 = 3;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Model(_) => EXIT_CONFIG,
            CliError::Check(_) => EXIT_CHECK,
            CliError::Io { .. } | CliError::Output(_) => EXIT_IO,
        }
    }
}

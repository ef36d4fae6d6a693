use semaxes_core::{Error as CoreError, ErrorKind};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ENDPOINT: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Endpoint => EXIT_ENDPOINT,
                ErrorKind::Data | ErrorKind::Io => EXIT_DATA,
            },
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

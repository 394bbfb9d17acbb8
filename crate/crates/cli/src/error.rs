use std::fmt;
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Io(_) => 3,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<freqmask::Error> for CliError {
    fn from(e: freqmask::Error) -> Self {
        use freqmask::Error as E;
        match e {
            E::Io { .. } | E::Load { .. } => CliError::Io(e.to_string()),
            E::Contract(_) => CliError::Usage(e.to_string()),
            E::Dimension(_) | E::NonFinite(_) => CliError::Runtime(e.to_string()),
        }
    }
}

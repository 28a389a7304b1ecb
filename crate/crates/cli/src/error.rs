use std::fmt;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VIOLATED: u8 = 2;
    pub const INDETERMINATE: u8 = 3;
    pub const USAGE: u8 = 64;
    pub const PRECONDITION: u8 = 65;
    pub const NUMERIC: u8 = 70;
    pub const IO: u8 = 74;
}

pub const EXIT_CODES_HELP: &str = "\
Exit codes:
  0   success (verify: simplex conditions certified)
  2   verify: a condition is violated on the grid
  3   verify: some grid point is inside the strictness margin
  64  usage or configuration error
  65  precondition not met (missing or extra fixed points, parameter out of range, ...)
  70  numerical failure (non-finite value)
  74  cannot write output";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(hetcycle::Error),
    Io(String),
}

impl CliError {
    /// Wraps a library error raised while interpreting user input.
    pub fn usage(e: hetcycle::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        use hetcycle::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io(_) => exit::IO,
            CliError::Core(E::NonFinite { .. } | E::NonFiniteMatrix) => exit::NUMERIC,
            CliError::Core(E::InvalidModel(_) | E::OutsideCone { .. }) => exit::USAGE,
            CliError::Core(_) => exit::PRECONDITION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<hetcycle::Error> for CliError {
    fn from(e: hetcycle::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

use thiserror::Error;

/// Errors surfaced by the protocol library, the runners and the audit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid party count {0}: at least 2 parties are required")]
    InvalidPartyCount(usize),

    #[error("{0} is not a prime modulus")]
    NotPrime(u64),

    #[error("field mismatch: F_{left} vs F_{right}")]
    FieldMismatch { left: u64, right: u64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("element {element} is outside the universe [1, {universe}]")]
    ElementOutOfUniverse { element: u32, universe: u32 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("frame decode error: {0}")]
    Decode(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("enumeration space of {space} outcomes exceeds the bound {bound}; use a smaller instance or raise --bound")]
    BoundExceeded { space: u128, bound: u128 },
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidPartyCount(_) | Error::ElementOutOfUniverse { .. } => 2,
            Error::Infeasible(_) => 3,
            Error::Transport(_) => 4,
            Error::ProtocolViolation(_) | Error::Decode(_) => 5,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Transport(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

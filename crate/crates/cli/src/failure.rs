//! Exit-code classification.

use std::fmt;

/// CLI-level failures that carry their own exit code.
#[derive(Debug)]
pub enum Failure {
    MissingFlag(&'static str),
    BadFlag(String),
    Config(String),
    Io(String),
    Validation(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::MissingFlag(flag) => write!(f, "missing required flag {flag}"),
            Failure::BadFlag(m) | Failure::Config(m) | Failure::Io(m) | Failure::Validation(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for Failure {}

pub const USAGE: u8 = 2;
pub const BAD_FLAG: u8 = 3;
pub const CONFIG: u8 = 4;
pub const IO: u8 = 5;
pub const VALIDATION: u8 = 6;
pub const OTHER: u8 = 1;

/// Exit code and a short machine-readable kind for an error chain.
pub fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    use finchat_core::Error as E;
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::MissingFlag(_) | Failure::BadFlag(_) => (BAD_FLAG, "bad_flag"),
                Failure::Config(_) => (CONFIG, "config"),
                Failure::Io(_) => (IO, "io"),
                Failure::Validation(_) => (VALIDATION, "validation"),
            };
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } => (IO, "io"),
                E::InvalidConfig(_) => (CONFIG, "config"),
                E::InvalidFractions(_) => (BAD_FLAG, "bad_flag"),
                E::Parse { .. }
                | E::Invariant { .. }
                | E::DuplicateId { .. }
                | E::Json(_)
                | E::Checkpoint(_)
                | E::FingerprintMismatch { .. }
                | E::EmptyInput(_)
                | E::MissingClass(_)
                | E::MissingSetting(_) => (VALIDATION, "validation"),
                _ => (OTHER, "error"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (IO, "io");
        }
    }
    (OTHER, "error")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct() {
        let mut codes = [USAGE, BAD_FLAG, CONFIG, IO, VALIDATION, OTHER];
        codes.sort();
        assert!(codes.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn chain_is_searched() {
        let err = anyhow::Error::new(Failure::Config("x".into())).context("loading");
        assert_eq!(classify(&err), (CONFIG, "config"));
        let err = anyhow::Error::new(finchat_core::Error::EmptyInput("x"));
        assert_eq!(classify(&err).0, VALIDATION);
    }
}

use std::fmt;
use std::process::ExitCode;

use fnoseg3d::Error;

/// Process exit statuses.
pub mod code {
    pub const OK: u8 = 0;
    pub const OTHER: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const DATA: u8 = 3;
    pub const NUMERICAL: u8 = 4;
    pub const GRADCHECK: u8 = 5;
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Gradcheck(String),
    Core(Error),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => code::CONFIG,
            CliError::Data(_) => code::DATA,
            CliError::Gradcheck(_) => code::GRADCHECK,
            CliError::Core(e) => match e {
                Error::InvalidConfig(_) | Error::InvalidFactor(_) | Error::EpochOutOfRange { .. } => code::CONFIG,
                Error::NonFiniteLoss { .. } => code::NUMERICAL,
                Error::CorruptHeader(_)
                | Error::Truncated { .. }
                | Error::VersionMismatch { .. }
                | Error::EmptyDataset(_)
                | Error::LabelOutOfRange { .. }
                | Error::DimensionTooSmall { .. }
                | Error::ChannelMismatch { .. }
                | Error::Io(_)
                | Error::Json(_) => code::DATA,
                _ => code::OTHER,
            },
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Gradcheck(m) => write!(f, "gradient check failed: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_failure_class_has_its_own_status() {
        let nan = Error::NonFiniteLoss {
            epoch: 0,
            sample: "s".into(),
            value: f64::NAN,
        };
        let cases = [
            (CliError::Config("x".into()), code::CONFIG),
            (CliError::Data("x".into()), code::DATA),
            (CliError::Gradcheck("x".into()), code::GRADCHECK),
            (Error::InvalidFactor(0).into(), code::CONFIG),
            (nan.into(), code::NUMERICAL),
            (Error::VersionMismatch { found: 2, expected: 1 }.into(), code::DATA),
            (Error::NoForward.into(), code::OTHER),
        ];
        for (e, want) in cases {
            assert_eq!(e.code(), want, "{e}");
        }
    }
}

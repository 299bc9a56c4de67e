//! Process exit codes.

use std::fmt;

use debias_np::Error;

pub const OK: i32 = 0;
pub const CONFIG: i32 = 2;
pub const DATA: i32 = 3;
pub const ESTIMATION: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidConfig(_) | Error::OutOfDomain(_) | Error::OracleUnavailable => CONFIG,
            Error::Singular(_)
            | Error::PointFailed(_)
            | Error::PointNotFound(_)
            | Error::ExcessiveExclusions { .. }
            | Error::AllReplicationsFailed { .. } => ESTIMATION,
            _ => DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

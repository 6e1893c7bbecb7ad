use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Scalar field of a matrix or query vector.
///
/// All numeric storage is double precision per real/imaginary component.
/// Values tagged `Real` carry a zero imaginary component everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarField {
    Real,
    Complex,
}

impl ScalarField {
    pub fn is_real(self) -> bool {
        matches!(self, ScalarField::Real)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Real => write!(f, "real"),
            ScalarField::Complex => write!(f, "complex"),
        }
    }
}

impl FromStr for ScalarField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "real" => Ok(ScalarField::Real),
            "complex" => Ok(ScalarField::Complex),
            other => Err(Error::InvalidArgument(format!(
                "unknown scalar field {other:?}, expected \"real\" or \"complex\""
            ))),
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension error: requested {m}x{n} submatrix of a {rows}x{cols} matrix")]
    Dimension {
        m: usize,
        n: usize,
        rows: usize,
        cols: usize,
    },

    #[error("index out of range: {0}")]
    Bounds(String),

    #[error(
        "exhaustive scan needs {required} candidate evaluations, over the budget of {budget}; use scan_las"
    )]
    ScanBudget { required: u128, budget: u64 },

    #[error("permutation enumeration needs {required} permutations, over the limit of {limit}")]
    EnumerationBudget { required: u128, limit: u128 },

    #[error("no net element above {value} (largest is {largest}); use the below neighbor or the full net sweep")]
    MissingNeighbor { value: usize, largest: usize },

    #[error("degenerate population: zero variance and zero spread with t > 0")]
    DegeneratePopulation,

    #[error("malformed CSV at line {line}: {message}")]
    CsvParse { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a failure at run time.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Dimension { .. }
                | Error::Bounds(_)
                | Error::ScanBudget { .. }
                | Error::EnumerationBudget { .. }
                | Error::MissingNeighbor { .. }
                | Error::DegeneratePopulation
                | Error::CsvParse { .. }
                | Error::Json(_)
        )
    }
}

//! Crate-wide error type.

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A schema or label column is absent from the CSV header.
    MissingColumn(String),
    /// A label cell parsed to something other than 0 or 1.
    NonBinaryLabel { row: usize, value: String },
    /// A feature cell could not be parsed under its declared kind.
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },
    /// Split fractions are not positive or do not sum to 1.
    BadFractions(String),
    /// An operation that fits on training rows received none.
    EmptyTrainingSet,
    /// A NaN or infinity reached a numeric routine.
    NonFiniteInput,
    /// GBDT training requires both classes present.
    SingleClassDataset,
    /// ROC AUC is undefined when only one class is present.
    SingleClass,
    /// A row does not match the schema a model was trained on.
    SchemaMismatch(String),
    /// Every grid cell was skipped by the bin budget.
    EmptyGridAfterBudget,
    /// A config table was written by an incompatible format version.
    VersionMismatch { found: u16, expected: u16 },
    /// A config table failed structural or checksum validation.
    CorruptTable(String),
    /// The RPC server could not bind its listen address.
    BindFailed(String),
    /// An RPC round-trip exceeded the client timeout.
    Timeout,
    /// The RPC peer closed the connection.
    Disconnected,
    /// A precondition on an operation argument was violated.
    InvalidParameter(String),
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::MissingColumn(name) => write!(f, "missing column: {name}"),
            Error::NonBinaryLabel { row, value } => {
                write!(f, "non-binary label {value:?} at row {row}")
            }
            Error::UnparseableValue { row, column, value } => {
                write!(f, "unparseable value {value:?} at row {row}, column {column}")
            }
            Error::BadFractions(msg) => write!(f, "bad split fractions: {msg}"),
            Error::EmptyTrainingSet => write!(f, "empty training set"),
            Error::NonFiniteInput => write!(f, "non-finite input"),
            Error::SingleClassDataset => write!(f, "training data contains a single class"),
            Error::SingleClass => write!(f, "metric undefined for a single class"),
            Error::SchemaMismatch(msg) => write!(f, "schema mismatch: {msg}"),
            Error::EmptyGridAfterBudget => write!(f, "no grid cell fits the bin budget"),
            Error::VersionMismatch { found, expected } => {
                write!(f, "table version {found}, expected {expected}")
            }
            Error::CorruptTable(msg) => write!(f, "corrupt table: {msg}"),
            Error::BindFailed(msg) => write!(f, "bind failed: {msg}"),
            Error::Timeout => write!(f, "rpc timeout"),
            Error::Disconnected => write!(f, "rpc peer disconnected"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

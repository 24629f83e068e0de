use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{}: missing required column `{column}` (role: {role})", path.display())]
    MissingColumn {
        path: PathBuf,
        column: String,
        role: &'static str,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid HS6 code `{0}`: expected exactly 6 digits")]
    InvalidCode(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error("year {0} not present in the export tensor")]
    YearAbsent(i32),

    #[error("world exports for year {0} are zero")]
    ZeroWorldExports(i32),

    #[error("country {country} not present in year {year}")]
    CountryAbsent { country: String, year: i32 },

    #[error("product {0} missing from the proximity axis")]
    ProductMissing(String),

    #[error("product axes differ between years {0} and {1}")]
    AxisMismatch(i32, i32),

    #[error("candidate pool for {country} has {pool} products but {needed} are required")]
    InsufficientPool {
        country: String,
        pool: usize,
        needed: usize,
    },

    #[error("degenerate sample (n = {n}): bandwidth must be supplied explicitly")]
    DegenerateSample { n: usize },

    #[error("design matrix is rank deficient: column `{column}` is collinear with {with:?}")]
    RankDeficient { column: String, with: Vec<String> },

    #[error("too few observations: {n} complete rows, at least {needed} required")]
    TooFewObservations { n: usize, needed: usize },

    #[error("density grids differ")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::MissingColumn { .. }
            | Error::EmptyInput(_)
            | Error::InvalidCode(_)
            | Error::Malformed(_)
            | Error::YearAbsent(_)
            | Error::ZeroWorldExports(_)
            | Error::CountryAbsent { .. }
            | Error::ProductMissing(_)
            | Error::AxisMismatch(..)
            | Error::InsufficientPool { .. } => 3,
            Error::DegenerateSample { .. }
            | Error::RankDeficient { .. }
            | Error::TooFewObservations { .. }
            | Error::GridMismatch => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("missing column `{column}`")]
    MissingColumn { column: String },

    #[error("row {row}: cannot parse {column} value `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("input contains no observations")]
    EmptyInput,

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("only {distinct} distinct time values, at least 4 are needed for a spline fit")]
    InsufficientSupport { distinct: usize },

    #[error("penalized fit failed: {0}")]
    FitFailure(String),

    #[error("partitions have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("every cluster failed to fit in iteration {iteration}")]
    AllClustersDropped { iteration: usize },

    #[error("silhouette undefined for a single cluster")]
    SingleCluster,

    #[error("unknown preset `{0}` (expected bp5, clean2 or clean5)")]
    UnknownPreset(String),

    #[error("k = {k}, replicate {replicate}")]
    Replicate {
        k: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },
}

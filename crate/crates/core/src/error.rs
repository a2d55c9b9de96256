use thiserror::Error;

/// Errors raised anywhere in the buddying pipeline.
#[derive(Debug, Error)]
pub enum BuddyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series alignment: {0}")]
    Alignment(String),

    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("range error: {0}")]
    Range(String),

    #[error("grouping error: {0}")]
    Grouping(String),

    #[error("degenerate normalization: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unrecoverable series for {0}: no valid readings")]
    UnrecoverableSeries(String),

    #[error("power-law fit: {0}")]
    Fit(String),

    #[error("pool split: {0}")]
    Split(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

impl BuddyError {
    /// Stable machine-readable tag, used in the CLI's error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            BuddyError::InvalidInput(_) => "invalid-input",
            BuddyError::Alignment(_) => "alignment",
            BuddyError::Schema { .. } => "schema",
            BuddyError::Range(_) => "range",
            BuddyError::Grouping(_) => "grouping",
            BuddyError::Degenerate(_) => "degenerate",
            BuddyError::Config(_) => "config",
            BuddyError::UnrecoverableSeries(_) => "unrecoverable-series",
            BuddyError::Fit(_) => "fit",
            BuddyError::Split(_) => "split",
            BuddyError::Io(_) => "io",
            BuddyError::Csv(_) => "csv",
            BuddyError::Json(_) => "json",
            BuddyError::Toml(_) => "toml",
        }
    }
}

impl From<toml::de::Error> for BuddyError {
    fn from(e: toml::de::Error) -> Self {
        BuddyError::Toml(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BuddyError>;

use thiserror::Error;

/// Errors raised anywhere in the model, simulation, estimation and panel layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no steady state: gamma={gamma}, gamma*lambda={gamma_lambda} (both must be < 1)")]
    NonStationary { gamma: f64, gamma_lambda: f64 },

    #[error("unit outcome variance unattainable: noise-free variance exceeds 1 by {deficit}")]
    Infeasible { deficit: f64 },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("pedigree covariance not positive semi-definite (min eigenvalue {min_eigenvalue:e}) for {params}")]
    NotPsd { min_eigenvalue: f64, params: String },

    #[error("matching missed its target: target {target}, realized {realized} (tolerance {tolerance})")]
    MatchingTolerance { target: f64, realized: f64, tolerance: f64 },

    #[error("bad scenario parameters: {0}")]
    BadScenarioParams(String),

    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("no complete rows left after listwise deletion ({dropped} dropped)")]
    EmptyAfterListwiseDeletion { dropped: usize },

    #[error("clustered covariance needs at least 2 clusters, found {found}")]
    TooFewClusters { found: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("panel has no valid rows")]
    EmptyPanel,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

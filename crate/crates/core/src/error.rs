use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported modulation order {0}: must be a perfect square >= 4")]
    UnsupportedOrder(u32),

    #[error("point {re}{im:+}j is not a constellation member")]
    NotAMember { re: f64, im: f64 },

    #[error("bit stream length {len} is not a multiple of {bits_per_symbol}")]
    BitLength { len: usize, bits_per_symbol: usize },

    #[error("Gram matrix is numerically rank deficient (reciprocal condition {rcond:.3e})")]
    NumericalRank { rcond: f64 },

    #[error("equalization coefficient is zero for user {user}")]
    EqualizationSingular { user: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("nothing to plot in {0}")]
    NothingToPlot(String),
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("offspring law is not subcritical (mean {mean} >= 1)")]
    NotSubcritical { mean: f64 },

    #[error("tree exceeded size cap of {cap} vertices (reached {reached})")]
    CapExceeded { cap: usize, reached: usize },

    #[error("degenerate tree: {0}")]
    DegenerateTree(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("linear solve residual {residual:e} above tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("site {site} is outside the materialized window [{lo}, {hi}]")]
    MissingSite { site: i64, lo: i64, hi: i64 },

    #[error("window extension failed: {0}")]
    Extension(String),

    #[error("too few regeneration blocks: need at least {needed}, have {have}")]
    TooFewBlocks { needed: usize, have: usize },

    #[error("sample too small: need at least {needed}, have {have}")]
    SampleTooSmall { needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

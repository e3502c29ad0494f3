//! Statistics over externally produced classifier scores: within-start
//! paired effects, the strict subset, contrast ratios, observational
//! associations, cohort deduplication and the rendered reports.

pub mod cohort;
pub mod dist;
pub mod observational;
pub mod report;
pub mod scores;

use thiserror::Error;

pub use cohort::{dedupe_cohort, read_cohort_csv, write_cohort_csv, CohortRow, DedupeReport, Split};
pub use dist::{t_cdf, t_quantile, t_two_sided_p};
pub use observational::{logistic_or, observational_table, quintile_or, spearman, OddsRatio};
pub use scores::{
    contrast_ratio, fidelity_filter, paired_delta, paired_delta_in, paired_deltas, ratio_of, read_scores_csv, start_delta, strict_subset,
    summarize, t_interval,
    FidelityFailure, PairedEffect, Ratio, ScoreRecord, ScoreTable, StrictSubset,
};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("{config}: {n} paired starts, need at least 2")]
    TooFewStarts { config: String, n: usize },
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("input is constant")]
    ConstantInput,
    #[error("labels must be 0 or 1")]
    NonBinaryLabel,
    #[error("labels contain a single class")]
    SingleClass,
    #[error("perfect separation: the slope diverges")]
    Separation,
    #[error("logistic fit did not converge")]
    NoConvergence,
    #[error("quintile {0} is empty")]
    EmptyQuintile(usize),
    #[error("start {0:?} lacks image statistics")]
    MissingStats(String),
    #[error("no effect for configuration {0:?}")]
    MissingConfig(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

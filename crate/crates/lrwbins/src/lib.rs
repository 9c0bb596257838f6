//! Multistage inference for binary classification on tabular data.
//!
//! The first stage is a lookup-table model: the most important features are
//! cut into quantile bins, the ordered tuple of per-feature bins addresses a
//! "combined bin", and each combined bin holds a small logistic regression
//! trained on the rows that fall into it. A validation-driven allocation
//! decides which combined bins the first stage is allowed to answer; every
//! other row falls through to a gradient-boosted-tree model served over a
//! small RPC protocol.
//!
//! Pipeline outline:
//!
//! 1. [`dataset`] loads typed CSVs and produces train/validation/test splits.
//! 2. [`ranking`] orders features by importance (GBDT gain or MRMR).
//! 3. [`binning`] fits quantile bins on the top features and maps rows to
//!    combined-bin ids.
//! 4. [`first_stage`] trains one logistic regression per combined bin.
//! 5. [`gbdt`] trains the fallback gradient-boosted model.
//! 6. [`allocation`] compares both models per bin on validation data and
//!    picks the coverage/quality cutoff.
//! 7. [`config_table`] serializes the filtered first stage into a compact
//!    binary table consumed by an independent table-driven scorer.
//! 8. [`rpc`] serves the fallback model; [`bench`] measures the latency of
//!    first-stage, RPC, and multistage paths.
//!
//! [`pipeline::run_pipeline`] wires steps 1-7 together.

pub mod allocation;
pub mod automl;
pub mod bench;
pub mod binning;
pub mod config_table;
pub mod dataset;
pub mod error;
pub mod first_stage;
pub mod gbdt;
pub mod metrics;
pub mod pipeline;
pub mod ranking;
pub mod rng;
pub mod rpc;
pub mod synth;

pub use error::{Error, Result};

//! Deterministic federated-learning simulator with an economic defense
//! against data poisoning.
//!
//! The library simulates synchronous federated training rounds in which a
//! fraction of clients poison their local data by label flipping. Three
//! aggregation strategies are provided: plain FedAvg, Krum selection, and a
//! verification-and-payment mechanism in which the server scores every update
//! on a small private validation set, pays a fixed reward for updates whose
//! validation loss clears a threshold, and averages only the verified ones.
//!
//! Modules follow the pipeline:
//!
//! - [`datasets`] — IDX file parsing, synthetic blob generation, Dirichlet
//!   non-IID partitioning, validation splits.
//! - [`model`] — a small MLP with manual forward/backward passes and
//!   mini-batch SGD.
//! - [`adversary`] — client type assignment and the label-flipping attack.
//! - [`aggregators`] — FedAvg, Krum, and verified-mean aggregation.
//! - [`mechanism`] — the payment rule, utilities, the cumulative ledger, and
//!   closed-form rationality/deterrence analyzers.
//! - [`engine`] — round orchestration and full experiment runs.
//! - [`cli`] — config parsing and CSV/JSON metric emission.
//!
//! Every operation is a deterministic function of its inputs and seeds;
//! repeated runs of the same config produce byte-identical metric files.

pub mod adversary;
pub mod aggregators;
pub mod cli;
pub mod datasets;
pub mod engine;
pub mod error;
pub mod fmt;
pub mod mechanism;
pub mod model;
pub mod seeding;

pub use error::{Error, Result};

/// Library version string, surfaced in run manifests and the C API.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

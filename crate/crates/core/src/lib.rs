//! Example-subset search for improving a text classifier with synthetic data.
//!
//! The pipeline:
//!
//! 1. [`corpus`] loads a labeled TSV corpus and splits it into train,
//!    optimization-test and holdout partitions.
//! 2. [`features`] embeds every message into a small normalized feature space
//!    and enumerates 2D projections of it.
//! 3. [`search`] scans those projections (sliding window, hierarchical sliding
//!    window) or evolves subsets directly (genetic algorithm) to pick example
//!    sets, feeds each set to a [`synthgen`] backend, retrains a [`classifier`]
//!    on the augmented data and scores it with [`metrics`].
//! 4. [`knowledge`] folds a systematic sweep of settings into a cross-impact
//!    map, and [`ensemble`] uses that map to steer multi-phase,
//!    multi-objective improvement.

pub mod classifier;
pub mod corpus;
pub mod ensemble;
pub mod features;
pub mod knowledge;
pub mod metrics;
pub mod pipeline;
pub mod search;
pub mod seed;
pub mod synthgen;
pub mod toy;

pub use corpus::{ClassId, LabeledDataset, Message, Split, SplitRatios};
pub use metrics::{Delta, MetricId, MetricKind, ScoreVector};

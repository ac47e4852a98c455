//! Hierarchical intrusion detection for Internet-of-Vehicles CAN traffic.
//!
//! The crate covers the whole pipeline:
//!
//! - [`dataset`]: CSV ingestion, min-max scaling, label hierarchy, stratified
//!   folds and a synthetic generator for desk-scale experiments.
//! - [`learners`]: from-scratch CART trees, bootstrap random forests with
//!   out-of-bag permutation importance, and multinomial logistic regression.
//! - [`boruta`]: shadow-feature wrapper selection on top of the forest.
//! - [`attribution`]: decision-path attributions and the guided subset search
//!   that turns a ranking into a per-level feature subset.
//! - [`hierarchy`]: the three-level cascade (benign/attack, benign/DoS/spoofing,
//!   six fine classes) with routed prediction and per-level evaluation.
//! - [`metrics`]: confusion matrices and precision/recall/F1 tables.
//! - [`fedsim`]: an in-process FedAvg simulation over an MLP baseline.
//! - [`deploysim`]: a discrete-event simulation of the vehicle/RSU/edge/cloud
//!   deployment with overhead accounting.
//! - [`pipeline`]: the stages behind the `hierids` binary.
//!
//! Runnable walkthroughs live in `examples/`; see the README for the list.

pub mod attribution;
pub mod boruta;
pub mod dataset;
pub mod deploysim;
pub mod error;
pub mod fedsim;
pub mod hierarchy;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod pipeline;
pub mod seed;

pub use error::{Error, Result};

//! Label-efficient monitoring of a deployed classifier's accuracy.
//!
//! Streams of prediction events ([`stream`]) feed an unsupervised anomaly
//! signal ([`detector`]) into a label-querying [`policy`] that decides when
//! to pay for a ground-truth label and keeps a running accuracy estimate.
//! [`bounds`] certifies risk guarantees, [`risk`] scores runs and builds
//! query/risk frontiers, and [`harness`] runs configured experiments.

pub mod bounds;
pub mod detector;
pub mod error;
pub mod harness;
pub mod policy;
pub mod risk;
pub mod rng;
pub mod stream;

pub use error::{Error, Result};

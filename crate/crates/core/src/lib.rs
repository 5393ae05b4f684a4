//! Matching surveillance trajectories to wearable inertial streams.
//!
//! Tracks and sensor records are prepared onto a shared time grid
//! ([`signals`]), scored window by window ([`estimator`]), accumulated into
//! per-track decisions ([`matching`]) and evaluated ([`metrics`]). The
//! [`simulator`] produces synthetic scenes with ground truth and
//! [`training`] fits the learned estimators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimator;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod signals;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Track = signals::Track<f64>;
pub type SensorRecord = signals::SensorRecord<f64>;
pub type PreparedTrack = signals::PreparedTrack<f64>;
pub type PreparedSensor = signals::PreparedSensor<f64>;
pub type PreparedDataset = signals::PreparedDataset<f64>;
pub type RunningStats = estimator::RunningStats<f64>;
pub type CorrespondenceScore = estimator::CorrespondenceScore<f64>;
pub type FeatureLogistic = estimator::FeatureLogistic<f64>;
pub type ConvAttentionNet = estimator::ConvAttentionNet<f64>;
pub type MatchState = matching::MatchState<f64>;

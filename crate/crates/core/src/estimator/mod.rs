//! Correspondence probability and activity-based reliability for windows.
//!
//! Three estimators share the [`Estimator`] interface:
//! [`OracleEstimator`] reads ground-truth labels, [`FeatureLogistic`] is a
//! logistic model over cross-modal window features, and [`ConvAttentionNet`]
//! is a dual-kernel convolution network with attention pooling. The two
//! learned models also implement [`Trainable`].

mod checkpoint;
mod logistic;
mod network;
mod oracle;
mod reliability;
mod stats;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signals::{window_starts, FeatureWindow, PreparedSensor, PreparedTrack};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, EstimatorKind, TrainedModel};
pub use logistic::{window_features, FeatureLogistic, LogisticCache, FEATURE_COUNT};
pub use network::{Architecture, ConvAttentionNet, ForwardCache, Layout};
pub use oracle::{oracle_estimate, LabelTable, OracleEstimator};
pub use reliability::reliability;
pub use stats::{RunningStats, VARIANCE_FLOOR};

/// Probability and reliability for one window of one (track, sensor) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceScore<T> {
    pub track_id: Arc<str>,
    pub sensor_id: Arc<str>,
    /// Grid step of the window start; the matching step index.
    pub step: i64,
    pub start_t: T,
    pub p: T,
    pub r: T,
}

pub trait Estimator<T: Scalar> {
    /// Window length the estimator accepts.
    fn window_len(&self) -> usize;

    /// Frozen statistics used for the reliability term.
    fn stats(&self) -> &RunningStats<T>;

    /// Correspondence probability of one window, in [0, 1].
    fn probability(&self, window: &FeatureWindow<'_, T>) -> Result<T>;

    /// `(start step, p)` for every window of a pair at `stride`.
    fn score_pair(&self, track: &PreparedTrack<T>, sensor: &PreparedSensor<T>, stride: usize) -> Result<Vec<(i64, T)>> {
        let len = self.window_len();
        window_starts(track, sensor, len, stride)
            .map(|s| {
                let w = FeatureWindow::couple(track, s, sensor, s, len).expect("start inside overlap");
                self.probability(&w).map(|p| (s, p))
            })
            .collect()
    }
}

/// Estimators with an enumerable parameter vector and an analytic gradient.
pub trait Trainable<T: Scalar>: Estimator<T> {
    type Cache;

    fn params(&self) -> &[T];

    /// Mutable parameter access; invalidates outstanding forward caches.
    fn params_mut(&mut self) -> &mut [T];

    fn stats_mut(&mut self) -> &mut RunningStats<T>;

    fn forward(&self, window: &FeatureWindow<'_, T>) -> Result<(T, Self::Cache)>;

    /// Adds `upstream * dp/dθ` into `grad`.
    fn backward_into(&self, window: &FeatureWindow<'_, T>, cache: &Self::Cache, upstream: T, grad: &mut [T]) -> Result<()>;

    /// `upstream * dp/dθ` as a fresh vector.
    fn backward(&self, window: &FeatureWindow<'_, T>, cache: &Self::Cache, upstream: T) -> Result<Vec<T>> {
        let mut grad = vec![T::zero(); self.params().len()];
        self.backward_into(window, cache, upstream, &mut grad)?;
        Ok(grad)
    }
}

/// Scores one window: `p` from the model, `r` from its frozen statistics.
pub fn estimate<T: Scalar, E: Estimator<T> + ?Sized>(window: &FeatureWindow<'_, T>, model: &E) -> Result<CorrespondenceScore<T>> {
    if window.len() != model.window_len() {
        return Err(Error::Shape {
            expected: model.window_len(),
            got: window.len(),
        });
    }
    let p = model.probability(window)?;
    Ok(CorrespondenceScore {
        track_id: Arc::from(window.track_id),
        sensor_id: Arc::from(window.sensor_id),
        step: window.start_step,
        start_t: window.start_t,
        p,
        r: reliability(window, model.stats()),
    })
}

/// Identity of the window a forward cache was computed for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CacheKey {
    track_id: String,
    sensor_id: String,
    start_step: i64,
    sensor_start_step: i64,
    len: usize,
    revision: u64,
}

impl CacheKey {
    pub(crate) fn new<T: Scalar>(window: &FeatureWindow<'_, T>, revision: u64) -> Self {
        Self {
            track_id: window.track_id.to_owned(),
            sensor_id: window.sensor_id.to_owned(),
            start_step: window.start_step,
            sensor_start_step: window.sensor_start_step,
            len: window.len(),
            revision,
        }
    }

    pub(crate) fn check<T: Scalar>(&self, window: &FeatureWindow<'_, T>, revision: u64) -> Result<()> {
        if *self != Self::new(window, revision) {
            return Err(Error::State(
                "forward cache does not belong to this window and parameter revision".into(),
            ));
        }
        Ok(())
    }
}

use std::collections::HashMap;

use super::{Estimator, RunningStats};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signals::FeatureWindow;

/// Ground truth: track id to participant id, `None` for non-participants.
pub type LabelTable = HashMap<String, Option<String>>;

/// 1 if the window's track belongs to the window's sensor wearer, else 0.
pub fn oracle_estimate<T: Scalar>(window: &FeatureWindow<'_, T>, truth: &LabelTable) -> Result<T> {
    let label = truth
        .get(window.track_id)
        .ok_or_else(|| Error::Lookup(format!("track {} not in truth table", window.track_id)))?;
    Ok(if label.as_deref() == Some(window.sensor_id) {
        T::one()
    } else {
        T::zero()
    })
}

/// Test oracle for the matching and metrics layers.
#[derive(Debug, Clone)]
pub struct OracleEstimator<T> {
    truth: LabelTable,
    stats: RunningStats<T>,
    window_len: usize,
}

impl<T: Scalar> OracleEstimator<T> {
    pub fn new(truth: LabelTable, stats: RunningStats<T>, window_len: usize) -> Self {
        Self { truth, stats, window_len }
    }
}

impl<T: Scalar> Estimator<T> for OracleEstimator<T> {
    fn window_len(&self) -> usize {
        self.window_len
    }

    fn stats(&self) -> &RunningStats<T> {
        &self.stats
    }

    fn probability(&self, window: &FeatureWindow<'_, T>) -> Result<T> {
        oracle_estimate(window, &self.truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::estimate;
    use crate::signals::WindowBuf;

    fn truth() -> LabelTable {
        [("t1".to_string(), Some("alice".to_string())), ("t2".to_string(), None)]
            .into_iter()
            .collect()
    }

    fn win(track: &str, sensor: &str) -> WindowBuf<f64> {
        let mut w = WindowBuf::zeros(8);
        w.track_id = track.into();
        w.sensor_id = sensor.into();
        w
    }

    #[test]
    fn matched_mismatched_and_non_participant() {
        let t = truth();
        assert_eq!(oracle_estimate::<f64>(&win("t1", "alice").view(), &t).unwrap(), 1.0);
        assert_eq!(oracle_estimate::<f64>(&win("t1", "bob").view(), &t).unwrap(), 0.0);
        assert_eq!(oracle_estimate::<f64>(&win("t2", "alice").view(), &t).unwrap(), 0.0);
        assert!(matches!(
            oracle_estimate::<f64>(&win("t9", "alice").view(), &t),
            Err(Error::Lookup(_))
        ));
    }

    #[test]
    fn estimate_checks_window_length() {
        let est = OracleEstimator::new(truth(), RunningStats::from_moments([0.0; 9], [1.0; 9]), 8);
        let s = estimate(&win("t1", "alice").view(), &est).unwrap();
        assert_eq!(s.p, 1.0);
        let mut short = win("t1", "alice");
        short.channels.iter_mut().for_each(|c| c.truncate(5));
        assert!(matches!(estimate(&short.view(), &est), Err(Error::Shape { expected: 8, got: 5 })));
    }
}

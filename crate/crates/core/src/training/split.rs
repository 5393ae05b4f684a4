use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signals::PreparedDataset;

/// Participant-exclusive train/validation partition.
#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: PreparedDataset<T>,
    pub validation: PreparedDataset<T>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    /// Set when the validation subset is empty.
    pub warning: Option<String>,
}

/// Participant identities: sensor ids and track labels.
pub fn participants<T: Scalar>(ds: &PreparedDataset<T>) -> BTreeSet<String> {
    ds.sensors
        .iter()
        .map(|s| s.sensor_id.to_string())
        .chain(ds.tracks.iter().filter_map(|t| t.label.as_deref().map(str::to_owned)))
        .collect()
}

/// Assigns each participant, with all of its tracks and its sensor stream, to
/// exactly one subset. Unlabeled tracks are left out of both.
pub fn split_by_individual<T: Scalar>(ds: &PreparedDataset<T>, ratio: f64, seed: u64) -> Result<Split<T>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0, 1]")));
    }
    let mut ids: Vec<String> = participants(ds).into_iter().collect();
    if ids.len() < 2 {
        return Err(Error::degenerate(format!(
            "need at least 2 labeled participants to split, found {}",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((ratio * ids.len() as f64).round() as usize).clamp(1, ids.len());
    let validation_ids = ids.split_off(n_train);
    let mut train_ids = ids;
    train_ids.sort();
    let mut validation_ids = validation_ids;
    validation_ids.sort();
    let subset = |keep: &[String]| PreparedDataset {
        tracks: ds
            .tracks
            .iter()
            .filter(|t| t.label.as_deref().is_some_and(|l| keep.iter().any(|k| k == l)))
            .cloned()
            .collect(),
        sensors: ds
            .sensors
            .iter()
            .filter(|s| keep.iter().any(|k| **k == *s.sensor_id))
            .cloned()
            .collect(),
        skipped: Vec::new(),
    };
    let warning = validation_ids.is_empty().then(|| {
        let msg = format!("split ratio {ratio} leaves the validation subset empty");
        tracing::warn!("{msg}");
        msg
    });
    Ok(Split {
        train: subset(&train_ids),
        validation: subset(&validation_ids),
        train_ids,
        validation_ids,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{PreparedSensor, PreparedTrack};
    use std::sync::Arc;

    pub(crate) fn toy(n: usize) -> PreparedDataset<f64> {
        let mut ds = PreparedDataset::default();
        for i in 0..n {
            let id = format!("p{i}");
            ds.sensors.push(PreparedSensor {
                sensor_id: Arc::from(id.as_str()),
                rate: 10.0,
                start_step: 0,
                channels: std::array::from_fn(|_| vec![0.0; 5]),
            });
            for k in 0..2 {
                ds.tracks.push(PreparedTrack {
                    track_id: Arc::from(format!("{id}/{k}").as_str()),
                    label: Some(Arc::from(id.as_str())),
                    rate: 10.0,
                    start_step: 0,
                    speed: vec![0.0; 5],
                    turn_rate: vec![0.0; 5],
                });
            }
        }
        ds.tracks.push(PreparedTrack {
            track_id: Arc::from("visitor"),
            label: None,
            rate: 10.0,
            start_step: 0,
            speed: vec![0.0; 5],
            turn_rate: vec![0.0; 5],
        });
        ds
    }

    #[test]
    fn ten_participants_split_eight_two() {
        let s = split_by_individual(&toy(10), 0.8, 3).unwrap();
        assert_eq!((s.train_ids.len(), s.validation_ids.len()), (8, 2));
        assert!(s.train_ids.iter().all(|id| !s.validation_ids.contains(id)));
        assert_eq!(s.train.sensors.len(), 8);
        assert_eq!(s.train.tracks.len(), 16);
        assert_eq!(s.validation.tracks.len(), 4);
        assert!(s.warning.is_none());
    }

    #[test]
    fn split_is_seeded() {
        let a = split_by_individual(&toy(10), 0.8, 3).unwrap();
        let b = split_by_individual(&toy(10), 0.8, 3).unwrap();
        assert_eq!(a.validation_ids, b.validation_ids);
        let differs = (0..20).any(|s| split_by_individual(&toy(10), 0.8, s).unwrap().validation_ids != a.validation_ids);
        assert!(differs);
    }

    #[test]
    fn full_ratio_warns() {
        let s = split_by_individual(&toy(4), 1.0, 0).unwrap();
        assert!(s.validation_ids.is_empty());
        assert!(s.warning.is_some());
    }

    #[test]
    fn single_participant_is_degenerate() {
        assert!(matches!(split_by_individual(&toy(1), 0.8, 0), Err(Error::DegenerateInput(_))));
    }
}

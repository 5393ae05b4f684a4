//! Stage functions chaining preparation, scoring, matching and evaluation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::estimator::{reliability, CorrespondenceScore, Estimator, LabelTable, RunningStats, Trainable};
use crate::io::TruthTable;
use crate::matching::{run_matching, Assignment, MatchConfig, MatchOutcome};
use crate::metrics::{evaluate_outcomes, outcome_counts, time_weighted_metrics, LabeledOutcome, Metrics, OutcomeCounts};
use crate::scalar::Scalar;
use crate::signals::{window_starts, FeatureWindow, PreparedDataset, Track};
use crate::training::{build_pairs_with_mix, split_by_individual, train, PairSample, PairSet, Split, TrainConfig, TrainReport};

/// Every (track, sensor) window at `stride`, sorted by step, track, sensor.
pub fn score_dataset<T: Scalar, E: Estimator<T> + ?Sized>(
    ds: &PreparedDataset<T>,
    model: &E,
    stride: usize,
) -> Result<Vec<CorrespondenceScore<T>>> {
    let len = model.window_len();
    let mut out = Vec::new();
    for track in &ds.tracks {
        for sensor in &ds.sensors {
            if track.rate != sensor.rate {
                return Err(Error::invalid(format!(
                    "track {} and sensor {} are on different grids",
                    track.track_id, sensor.sensor_id
                )));
            }
            for (step, p) in model.score_pair(track, sensor, stride)? {
                let window = FeatureWindow::couple(track, step, sensor, step, len).expect("scored window inside overlap");
                out.push(CorrespondenceScore {
                    track_id: track.track_id.clone(),
                    sensor_id: sensor.sensor_id.clone(),
                    step,
                    start_t: window.start_t,
                    p,
                    r: reliability(&window, model.stats()),
                });
            }
        }
    }
    out.sort_by(|a, b| (a.step, &a.track_id, &a.sensor_id).cmp(&(b.step, &b.track_id, &b.sensor_id)));
    Ok(out)
}

/// Number of windows [`score_dataset`] produces.
pub fn window_count<T: Scalar>(ds: &PreparedDataset<T>, len: usize, stride: usize) -> usize {
    ds.tracks
        .iter()
        .flat_map(|t| ds.sensors.iter().map(move |s| window_starts(t, s, len, stride).count()))
        .sum()
}

/// Frozen statistics over every aligned same-identity window at `stride`.
pub fn population_stats<T: Scalar>(ds: &PreparedDataset<T>, len: usize, stride: usize) -> Result<RunningStats<T>> {
    let mut windows = Vec::new();
    for track in &ds.tracks {
        let Some(sensor) = track.label.as_deref().and_then(|l| ds.sensor(l)) else {
            continue;
        };
        windows.extend(window_starts(track, sensor, len, stride).filter_map(|s| FeatureWindow::couple(track, s, sensor, s, len)));
    }
    RunningStats::from_population(windows)
}

pub fn label_table(truth: &TruthTable) -> LabelTable {
    truth.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
}

/// Matching over scores, checked against the truth table.
pub fn match_scores<T: Scalar>(scores: &[CorrespondenceScore<T>], truth: &TruthTable, config: MatchConfig) -> Result<MatchOutcome<T>> {
    if let Some(s) = scores.iter().find(|s| !truth.contains_key(&*s.track_id)) {
        return Err(Error::Lookup(format!("track {} is not in the truth table", s.track_id)));
    }
    run_matching(scores, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub plain: Metrics<T>,
    pub weighted: Metrics<T>,
    pub counts: OutcomeCounts,
    pub assignments: BTreeMap<String, Assignment>,
}

/// Scores every track of the truth table; tracks never decided are undefined.
pub fn evaluate<T: Scalar>(
    outcome: &MatchOutcome<T>,
    truth: &TruthTable,
    tracks: &[Track<T>],
    participants: &BTreeSet<String>,
) -> Result<Evaluation<T>> {
    let durations: BTreeMap<&str, T> = tracks.iter().map(|t| (t.track_id.as_str(), t.duration())).collect();
    let assignments = outcome.state.finalize(truth.keys().map(String::as_str));
    let mut outcomes = Vec::with_capacity(truth.len());
    for (track, actual) in truth {
        let duration = *durations
            .get(track.as_str())
            .ok_or_else(|| Error::Lookup(format!("truth track {track} has no samples")))?;
        outcomes.push(LabeledOutcome {
            track_id: track.clone(),
            predicted: assignments[track].clone(),
            actual: actual.clone(),
            duration,
        });
    }
    if let Some(extra) = assignments.keys().find(|k| !truth.contains_key(*k)) {
        return Err(Error::Lookup(format!("track {extra} is not in the truth table")));
    }
    Ok(Evaluation {
        plain: evaluate_outcomes(&outcomes, participants),
        weighted: time_weighted_metrics(&outcomes, participants),
        counts: outcome_counts(&outcomes, participants),
        assignments,
    })
}

/// Training and validation pairs plus the participant split they come from.
#[derive(Debug, Clone)]
pub struct Experiment<T> {
    pub split: Split<T>,
    pub train_pairs: Vec<PairSample>,
    pub val_pairs: Vec<PairSample>,
}

/// Splits by participant and builds pairs; validation uses one negative
/// per positive.
pub fn build_experiment<T: Scalar>(ds: &PreparedDataset<T>, cfg: &TrainConfig) -> Result<Experiment<T>> {
    cfg.validate()?;
    let split = split_by_individual(ds, cfg.split_ratio, cfg.seed)?;
    let train_pairs = build_pairs_with_mix(
        &split.train,
        cfg.window,
        cfg.stride_train,
        cfg.rho_neg,
        cfg.cross_fraction,
        cfg.seed,
    )?;
    let val_pairs = if split.validation.tracks.is_empty() {
        Vec::new()
    } else {
        match build_pairs_with_mix(
            &split.validation,
            cfg.window,
            cfg.stride_val,
            1.0,
            cfg.cross_fraction,
            cfg.seed ^ 0x5eed,
        ) {
            Ok(p) => p,
            Err(Error::DegenerateInput(msg)) => {
                tracing::warn!(%msg, "validation subset has no positive pairs");
                Vec::new()
            }
            Err(e) => return Err(e),
        }
    };
    Ok(Experiment {
        split,
        train_pairs,
        val_pairs,
    })
}

/// Trains `model` on an experiment built from `ds`.
pub fn fit<T: Scalar, M: Trainable<T>>(
    model: &mut M,
    experiment: &Experiment<T>,
    cfg: &TrainConfig,
    completed_epochs: usize,
) -> Result<TrainReport<T>> {
    train(
        model,
        PairSet::new(&experiment.split.train, &experiment.train_pairs),
        PairSet::new(&experiment.split.validation, &experiment.val_pairs),
        cfg,
        completed_epochs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::OracleEstimator;
    use crate::signals::{prepare_dataset, PreprocessConfig};
    use crate::simulator::{generate_scenario, ScenarioConfig};

    #[test]
    fn oracle_scene_is_matched_exactly() {
        let scene = generate_scenario(&ScenarioConfig {
            duration: 180.0,
            participants: 3,
            non_participants: 2,
            min_track_duration: 30.0,
            seed: 1,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let ds = prepare_dataset(&scene.tracks, &scene.sensors, &PreprocessConfig::default()).unwrap();
        let stats = population_stats(&ds, 100, 10).unwrap();
        let oracle = OracleEstimator::new(label_table(&scene.truth.labels), stats, 100);
        let scores = score_dataset(&ds, &oracle, 1).unwrap();
        assert_eq!(scores.len(), window_count(&ds, 100, 1));
        for s in &scores {
            let same = scene.truth.labels[&*s.track_id].as_deref() == Some(&*s.sensor_id);
            assert_eq!(s.p, if same { 1.0 } else { 0.0 });
        }
        let outcome = match_scores(&scores, &scene.truth.labels, MatchConfig::new(0.1, 0.7)).unwrap();
        let participants = scene.sensors.iter().map(|s| s.participant_id.clone()).collect();
        let eval = evaluate(&outcome, &scene.truth.labels, &scene.tracks, &participants).unwrap();
        assert_eq!(eval.plain.pf, Some(1.0));
        assert_eq!(eval.plain.pp, Some(1.0));
    }

    #[test]
    fn unknown_track_in_scores_is_a_lookup_error() {
        let scores = vec![CorrespondenceScore {
            track_id: "ghost".into(),
            sensor_id: "P".into(),
            step: 0,
            start_t: 0.0,
            p: 1.0,
            r: 1.0,
        }];
        let r = match_scores(&scores, &TruthTable::new(), MatchConfig::default());
        assert!(matches!(r, Err(Error::Lookup(_))));
    }
}

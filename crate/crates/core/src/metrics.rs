//! Participant precision, recall and F1 over final track assignments.
//!
//! Only predictions naming a participant count as participant predictions;
//! `Null` and `Undefined` never equal a label, so undefined participant
//! tracks count against recall. Ratios with an empty denominator are `None`.
//! All functions are generic over the value type so exact rationals can be
//! used.

use std::collections::BTreeSet;

use num_traits::Num;

use crate::matching::Assignment;

/// Ground truth and prediction for one track.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledOutcome<V> {
    pub track_id: String,
    pub predicted: Assignment,
    /// Participant id, `None` for non-participants.
    pub actual: Option<String>,
    /// Track duration in seconds; the weight of time-weighted metrics.
    pub duration: V,
}

impl<V> LabeledOutcome<V> {
    fn predicted_participant<'a>(&'a self, participants: &BTreeSet<String>) -> Option<&'a str> {
        match &self.predicted {
            Assignment::Sensor(m) if participants.contains(m) => Some(m),
            _ => None,
        }
    }

    fn actual_participant<'a>(&'a self, participants: &BTreeSet<String>) -> Option<&'a str> {
        self.actual.as_deref().filter(|y| participants.contains(*y))
    }

    fn correct(&self, participants: &BTreeSet<String>) -> bool {
        matches!(
            (self.predicted_participant(participants), self.actual_participant(participants)),
            (Some(a), Some(b)) if a == b
        )
    }
}

/// PP, PR and PF; `None` marks an undefined value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<V> {
    pub pp: Option<V>,
    pub pr: Option<V>,
    pub pf: Option<V>,
}

fn ratio<V: Num + Copy>(num: V, den: V) -> Option<V> {
    (den != V::zero()).then(|| num / den)
}

fn precision_by<V: Num + Copy>(
    outcomes: &[LabeledOutcome<V>],
    participants: &BTreeSet<String>,
    weight: impl Fn(&LabeledOutcome<V>) -> V,
) -> Option<V> {
    let mut num = V::zero();
    let mut den = V::zero();
    for o in outcomes {
        if o.predicted_participant(participants).is_some() {
            den = den + weight(o);
            if o.correct(participants) {
                num = num + weight(o);
            }
        }
    }
    ratio(num, den)
}

fn recall_by<V: Num + Copy>(
    outcomes: &[LabeledOutcome<V>],
    participants: &BTreeSet<String>,
    weight: impl Fn(&LabeledOutcome<V>) -> V,
) -> Option<V> {
    let mut num = V::zero();
    let mut den = V::zero();
    for o in outcomes {
        if o.actual_participant(participants).is_some() {
            den = den + weight(o);
            if o.correct(participants) {
                num = num + weight(o);
            }
        }
    }
    ratio(num, den)
}

/// Correct participant predictions over all participant predictions.
pub fn participant_precision<V: Num + Copy>(outcomes: &[LabeledOutcome<V>], participants: &BTreeSet<String>) -> Option<V> {
    precision_by(outcomes, participants, |_| V::one())
}

/// Correct participant predictions over all participant tracks.
pub fn participant_recall<V: Num + Copy>(outcomes: &[LabeledOutcome<V>], participants: &BTreeSet<String>) -> Option<V> {
    recall_by(outcomes, participants, |_| V::one())
}

/// Harmonic mean; 0 when both inputs are 0, `None` if either is undefined.
pub fn participant_f1<V: Num + Copy>(pp: Option<V>, pr: Option<V>) -> Option<V> {
    let (pp, pr) = (pp?, pr?);
    let sum = pp + pr;
    if sum == V::zero() {
        Some(V::zero())
    } else {
        Some((V::one() + V::one()) * pp * pr / sum)
    }
}

pub fn evaluate_outcomes<V: Num + Copy>(outcomes: &[LabeledOutcome<V>], participants: &BTreeSet<String>) -> Metrics<V> {
    let pp = participant_precision(outcomes, participants);
    let pr = participant_recall(outcomes, participants);
    Metrics {
        pp,
        pr,
        pf: participant_f1(pp, pr),
    }
}

/// Metrics with every track counted by its duration.
pub fn time_weighted_metrics<V: Num + Copy>(outcomes: &[LabeledOutcome<V>], participants: &BTreeSet<String>) -> Metrics<V> {
    let pp = precision_by(outcomes, participants, |o| o.duration);
    let pr = recall_by(outcomes, participants, |o| o.duration);
    Metrics {
        pp,
        pr,
        pf: participant_f1(pp, pr),
    }
}

/// Prediction tallies reported next to the metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub tracks: usize,
    pub participant_tracks: usize,
    pub predicted_participant: usize,
    pub correct: usize,
    pub null: usize,
    pub undefined: usize,
}

pub fn outcome_counts<V>(outcomes: &[LabeledOutcome<V>], participants: &BTreeSet<String>) -> OutcomeCounts {
    let mut c = OutcomeCounts {
        tracks: outcomes.len(),
        ..OutcomeCounts::default()
    };
    for o in outcomes {
        c.participant_tracks += o.actual_participant(participants).is_some() as usize;
        c.predicted_participant += o.predicted_participant(participants).is_some() as usize;
        c.correct += o.correct(participants) as usize;
        match o.predicted {
            Assignment::Null => c.null += 1,
            Assignment::Undefined => c.undefined += 1,
            Assignment::Sensor(_) => {}
        }
    }
    c
}

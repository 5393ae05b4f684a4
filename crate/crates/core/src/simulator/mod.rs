//! Deterministic synthetic warehouse scenes: camera tracks of participants
//! and visitors, and the inertial streams of participants.
//!
//! Every person follows a latent semi-Markov motion over the whole scene.
//! The camera sees a participant during one presence interval and a visitor
//! during short visits; visible spans are sampled at the camera rate with
//! position noise and then fragmented. Participants' devices record the
//! whole scene with a per-device clock offset.

mod fragment;
mod imu;
mod motion;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{Track, TrackSample};

pub use fragment::fragment_tracks;
pub use imu::{synthesize_imu, GRAVITY};
pub use motion::{follow, simulate_motion, MotionState, MotionTimeline};

/// Scene parameters. Durations in seconds, rates in Hz unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub duration: f64,
    pub participants: usize,
    pub non_participants: usize,
    /// Arena extent (m).
    pub arena: [f64; 2],
    /// Mean walking speed (m/s) and its spread across people.
    pub walk_speed: f64,
    pub walk_speed_jitter: f64,
    /// Relative chance of entering stand, walk, inspect, backward walk when
    /// a state ends.
    pub transition_weights: [f64; 4],
    /// Mean stand and inspect durations.
    pub dwell_stand: f64,
    pub dwell_inspect: f64,
    /// Camera position noise σ (m).
    pub position_noise: f64,
    /// Peak apparent shift of the observed foot point during a squat or
    /// reach, along the facing direction (m).
    pub squat_shift: f64,
    pub camera_rate: f64,
    pub sensor_rate: f64,
    /// Device clock offsets are uniform in ±this (s).
    pub clock_offset: f64,
    pub accel_noise: f64,
    pub gyro_noise: f64,
    /// Stationary σ of device roll and pitch wander (rad).
    pub tilt_wander: f64,
    /// Track cuts per minute of visible time.
    pub fragmentation_rate: f64,
    /// Share of participants visible for the whole scene; the rest are
    /// visible for one interval of at least `presence_min_fraction`.
    pub presence_full_fraction: f64,
    pub presence_min_fraction: f64,
    /// Visits per minute of each visitor, and the median and log-spread of
    /// visit durations.
    pub visit_rate: f64,
    pub visit_median: f64,
    pub visit_log_sigma: f64,
    /// Tracks shorter than this are discarded after fragmentation.
    pub min_track_duration: f64,
    /// Participants 0 and 1 walk side by side.
    pub coordinated_pair: bool,
    /// Prepended to every track and participant id.
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration: 600.0,
            participants: 10,
            non_participants: 5,
            arena: [29.0, 18.0],
            walk_speed: 1.2,
            walk_speed_jitter: 0.15,
            transition_weights: [0.3, 0.3, 0.3, 0.1],
            dwell_stand: 8.0,
            dwell_inspect: 25.0,
            position_noise: 0.05,
            squat_shift: 0.25,
            camera_rate: 5.0,
            sensor_rate: 50.0,
            clock_offset: 0.2,
            accel_noise: 0.3,
            gyro_noise: 0.05,
            tilt_wander: 0.03,
            fragmentation_rate: 0.2,
            presence_full_fraction: 0.5,
            presence_min_fraction: 0.2,
            visit_rate: 0.5,
            visit_median: 24.0,
            visit_log_sigma: 1.0,
            min_track_duration: 0.0,
            coordinated_pair: false,
            id_prefix: String::new(),
            seed: 0,
        }
    }
}

/// Floor area required per person (m²).
const AREA_PER_PERSON: f64 = 4.0;

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| Err(Error::Config { key: key.into(), message });
        let positive = [
            ("duration", self.duration),
            ("walk_speed", self.walk_speed),
            ("dwell_stand", self.dwell_stand),
            ("dwell_inspect", self.dwell_inspect),
            ("camera_rate", self.camera_rate),
            ("sensor_rate", self.sensor_rate),
            ("visit_median", self.visit_median),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(key, format!("must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("walk_speed_jitter", self.walk_speed_jitter),
            ("position_noise", self.position_noise),
            ("squat_shift", self.squat_shift),
            ("clock_offset", self.clock_offset),
            ("accel_noise", self.accel_noise),
            ("gyro_noise", self.gyro_noise),
            ("tilt_wander", self.tilt_wander),
            ("fragmentation_rate", self.fragmentation_rate),
            ("visit_rate", self.visit_rate),
            ("visit_log_sigma", self.visit_log_sigma),
            ("min_track_duration", self.min_track_duration),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(key, format!("must be non-negative, got {v}"));
            }
        }
        if self.participants == 0 {
            return bad("participants", "need at least one participant".into());
        }
        if self.transition_weights.iter().any(|w| !(*w >= 0.0)) || self.transition_weights.iter().sum::<f64>() <= 0.0 {
            return bad("transition_weights", "need non-negative weights with a positive sum".into());
        }
        for (key, v) in [
            ("presence_full_fraction", self.presence_full_fraction),
            ("presence_min_fraction", self.presence_min_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(key, format!("must lie in [0, 1], got {v}"));
            }
        }
        let [w, h] = self.arena;
        let people = (self.participants + self.non_participants) as f64;
        if !(w > 2.0 * 1.5 && h > 2.0 * 1.5) || w * h < AREA_PER_PERSON * people {
            return bad("arena", format!("{w} x {h} m is too small for {people} people"));
        }
        if self.coordinated_pair && self.participants < 2 {
            return bad("coordinated_pair", "needs at least two participants".into());
        }
        Ok(())
    }

    pub fn participant_id(&self, i: usize) -> String {
        format!("{}P{:02}", self.id_prefix, i)
    }
}

/// Labels and latent states of every emitted track.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    /// Track id to participant id, `None` for visitors.
    pub labels: BTreeMap<String, Option<String>>,
    /// Track id to `(time, state)` at each state change within the track.
    pub timelines: BTreeMap<String, Vec<(f64, MotionState)>>,
    /// Participant id to its visible interval.
    pub presence: BTreeMap<String, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub tracks: Vec<Track<f64>>,
    pub sensors: Vec<crate::signals::SensorRecord<f64>>,
    pub truth: GroundTruth,
}

/// Random stream purposes, combined with the person index.
#[derive(Clone, Copy)]
enum Stream {
    Motion = 0,
    Imu = 1,
    Presence = 2,
    Noise = 3,
    Fragment = 4,
}

fn stream(cfg: &ScenarioConfig, person: usize, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(person as u64 * 8 + purpose as u64);
    rng
}

/// Camera samples of `timeline` over `[a, b]` with position noise. A squat
/// or reach deforms the detection box, which moves the observed foot point
/// forward and back.
fn observe(timeline: &MotionTimeline, a: f64, b: f64, cfg: &ScenarioConfig, noise: &mut ChaCha8Rng) -> Vec<TrackSample<f64>> {
    let period = 1.0 / cfg.camera_rate;
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let first = (a / period).ceil() as i64;
    let last = (b / period).floor() as i64;
    (first..=last)
        .map(|k| {
            let t = k as f64 * period;
            let i = timeline.index_at(t);
            let u = timeline.posture[i];
            let shift = if u >= 0.0 {
                cfg.squat_shift * (std::f64::consts::PI * u).sin()
            } else {
                0.0
            };
            let (sin, cos) = timeline.facing[i].sin_cos();
            TrackSample {
                t,
                x: timeline.x[i] + shift * cos + cfg.position_noise * gauss.sample(noise),
                y: timeline.y[i] + shift * sin + cfg.position_noise * gauss.sample(noise),
            }
        })
        .collect()
}

fn duration_of(track: &Track<f64>) -> f64 {
    track.end_t() - track.start_t()
}

/// Generates a full scene. Identical configs give identical scenes.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scene> {
    cfg.validate()?;
    let n = (cfg.duration * cfg.sensor_rate).round() as usize + 1;
    let people = cfg.participants + cfg.non_participants;
    let mut timelines: Vec<MotionTimeline> = (0..people)
        .map(|p| simulate_motion(cfg, n, &mut stream(cfg, p, Stream::Motion)))
        .collect();
    if cfg.coordinated_pair {
        timelines[1] = follow(&timelines[0], 1.0, cfg.arena);
    }

    let mut truth = GroundTruth::default();
    let mut sensors = Vec::with_capacity(cfg.participants);
    let mut raw_tracks: Vec<(usize, Track<f64>)> = Vec::new();
    let mut next_track = 0usize;
    let new_id = |next: &mut usize| {
        let id = format!("{}T{:03}", cfg.id_prefix, *next);
        *next += 1;
        id
    };

    for (p, tl) in timelines.iter().enumerate() {
        let mut presence_rng = stream(cfg, p, Stream::Presence);
        let mut noise_rng = stream(cfg, p, Stream::Noise);
        let intervals: Vec<(f64, f64)> = if p < cfg.participants {
            let (a, b) = if presence_rng.gen_bool(cfg.presence_full_fraction) {
                (0.0, cfg.duration)
            } else {
                let min_len = cfg.presence_min_fraction * cfg.duration;
                let len = presence_rng.gen_range(min_len..=cfg.duration);
                let a = presence_rng.gen_range(0.0..=cfg.duration - len);
                (a, a + len)
            };
            vec![(a, b)]
        } else {
            visits(cfg, &mut presence_rng)
        };
        let label = (p < cfg.participants).then(|| cfg.participant_id(p));
        if let Some(id) = &label {
            let offset = if cfg.clock_offset > 0.0 {
                stream(cfg, p, Stream::Imu).gen_range(-cfg.clock_offset..=cfg.clock_offset)
            } else {
                0.0
            };
            sensors.push(synthesize_imu(id, tl, cfg, offset, &mut stream(cfg, p, Stream::Imu)));
            truth.presence.insert(id.clone(), intervals[0]);
        }
        for (a, b) in intervals {
            let samples = observe(tl, a, b, cfg, &mut noise_rng);
            if samples.len() >= 2 {
                raw_tracks.push((
                    p,
                    Track {
                        track_id: new_id(&mut next_track),
                        samples,
                        label: label.clone(),
                    },
                ));
            }
        }
    }

    let mut tracks = Vec::new();
    for (p, track) in raw_tracks {
        let seed = stream(cfg, p, Stream::Fragment).gen::<u64>();
        let pieces = fragment_tracks(std::slice::from_ref(&track), cfg.fragmentation_rate, seed);
        let mut kept: Vec<Track<f64>> = pieces
            .iter()
            .filter(|t| duration_of(t) >= cfg.min_track_duration)
            .cloned()
            .collect();
        if kept.is_empty() && p < cfg.participants {
            // a participant always keeps its longest visible segment
            if let Some(longest) = pieces.into_iter().max_by(|a, b| duration_of(a).total_cmp(&duration_of(b))) {
                kept.push(longest);
            }
        }
        for t in kept {
            truth.labels.insert(t.track_id.clone(), t.label.clone());
            truth
                .timelines
                .insert(t.track_id.clone(), timelines[p].state_changes(t.start_t(), t.end_t()));
            tracks.push(t);
        }
    }
    Ok(Scene { tracks, sensors, truth })
}

/// Visit intervals of one visitor.
fn visits(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mean = cfg.visit_rate * cfg.duration / 60.0;
    let count = if mean > 0.0 {
        rand_distr::Poisson::new(mean).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let length = LogNormal::new(cfg.visit_median.ln(), cfg.visit_log_sigma).expect("validated visit spread");
    (0..count)
        .map(|_| {
            let len = length.sample(rng).min(cfg.duration);
            let a = rng.gen_range(0.0..=cfg.duration - len);
            (a, a + len)
        })
        .collect()
}

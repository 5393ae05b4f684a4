//! Trajectory and inertial inputs, their derived channels, and the 10 Hz
//! windows fed to the correspondence estimators.
//!
//! Trajectory channels are derived after smoothing positions; sensor channels
//! are computed from raw samples and smoothed afterwards. Every prepared
//! stream lives on a shared absolute grid (`step / rate` seconds) so windows
//! of different streams line up by integer step index.

mod derive;
mod prepare;
mod resample;
mod smooth;
mod window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use derive::{derive_lin_accel_norm, derive_sensor_axis, derive_speed, derive_turn_rate};
pub use prepare::{prepare_dataset, prepare_sensor, prepare_track, PreparedDataset, PreparedSensor, PreparedTrack, PreprocessConfig};
pub use resample::{resample, resample_aligned};
pub use smooth::gaussian_smooth;
pub use window::{make_windows, window_starts, FeatureWindow, WindowBuf};

pub(crate) use derive::wrap_angle;

/// Headings are undefined below this per-step displacement (meters).
pub const DEFAULT_DISPLACEMENT_FLOOR: f64 = 0.01;

/// Default resampling rate (Hz).
pub const DEFAULT_RATE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample<T> {
    pub t: T,
    pub x: T,
    pub y: T,
}

/// Time-stamped 2-D world trajectory of one tracked subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub track_id: String,
    pub samples: Vec<TrackSample<T>>,
    /// Participant identity, `None` for people without a sensor.
    pub label: Option<String>,
}

impl<T: Scalar> Track<T> {
    pub fn new(track_id: impl Into<String>, samples: Vec<TrackSample<T>>, label: Option<String>) -> Result<Self> {
        let track = Self {
            track_id: track_id.into(),
            samples,
            label,
        };
        track.validate()?;
        Ok(track)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::degenerate(format!(
                "track {} has {} samples, need at least 2",
                self.track_id,
                self.samples.len()
            )));
        }
        check_increasing(self.samples.iter().map(|s| s.t), &self.track_id)
    }

    pub fn start_t(&self) -> T {
        self.samples.first().map(|s| s.t).unwrap_or_else(T::zero)
    }

    pub fn end_t(&self) -> T {
        self.samples.last().map(|s| s.t).unwrap_or_else(T::zero)
    }

    pub fn duration(&self) -> T {
        self.end_t() - self.start_t()
    }

    /// Travelled path length in meters.
    pub fn distance(&self) -> T {
        self.samples.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample<T> {
    pub t: T,
    /// Acceleration including gravity, m/s².
    pub accel: [T; 3],
    /// Gravity estimate, m/s².
    pub gravity: [T; 3],
    /// Angular velocity, rad/s.
    pub gyro: [T; 3],
}

/// Inertial streams recorded by one participant's device.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord<T> {
    pub participant_id: String,
    pub samples: Vec<SensorSample<T>>,
}

/// Accepted band for the gravity vector norm.
pub const GRAVITY_NORM_BAND: (f64, f64) = (8.0, 11.0);

impl<T: Scalar> SensorRecord<T> {
    pub fn new(participant_id: impl Into<String>, samples: Vec<SensorSample<T>>) -> Result<Self> {
        let record = Self {
            participant_id: participant_id.into(),
            samples,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::degenerate(format!("sensor record {} is empty", self.participant_id)));
        }
        check_increasing(self.samples.iter().map(|s| s.t), &self.participant_id)?;
        let (lo, hi) = (T::lit(GRAVITY_NORM_BAND.0), T::lit(GRAVITY_NORM_BAND.1));
        for s in &self.samples {
            let g = norm3(s.gravity);
            if !(g >= lo && g <= hi) {
                return Err(Error::invalid(format!(
                    "sensor record {}: gravity norm {} at t={} outside [{}, {}]",
                    self.participant_id, g, s.t, lo, hi
                )));
            }
        }
        Ok(())
    }

    pub fn start_t(&self) -> T {
        self.samples.first().map(|s| s.t).unwrap_or_else(T::zero)
    }

    pub fn end_t(&self) -> T {
        self.samples.last().map(|s| s.t).unwrap_or_else(T::zero)
    }
}

fn check_increasing<T: Scalar>(times: impl Iterator<Item = T>, id: &str) -> Result<()> {
    let mut prev: Option<T> = None;
    for t in times {
        if !t.is_finite() {
            return Err(Error::invalid(format!("{id}: non-finite timestamp")));
        }
        if let Some(p) = prev {
            if t <= p {
                return Err(Error::invalid(format!("{id}: timestamps not strictly increasing at t={t}")));
            }
        }
        prev = Some(t);
    }
    Ok(())
}

#[inline]
pub(crate) fn norm3<T: Scalar>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// The nine estimator input channels, in window order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Speed,
    TurnRate,
    LinAccelNorm,
    AccelX,
    AccelY,
    AccelZ,
    GyroX,
    GyroY,
    GyroZ,
}

impl Channel {
    pub const COUNT: usize = 9;

    /// Window channel order: two trajectory channels, then seven sensor channels.
    pub const ALL: [Channel; 9] = [
        Channel::Speed,
        Channel::TurnRate,
        Channel::LinAccelNorm,
        Channel::AccelX,
        Channel::AccelY,
        Channel::AccelZ,
        Channel::GyroX,
        Channel::GyroY,
        Channel::GyroZ,
    ];

    pub const TRAJECTORY: [Channel; 2] = [Channel::Speed, Channel::TurnRate];

    pub const SENSOR: [Channel; 7] = [
        Channel::LinAccelNorm,
        Channel::AccelX,
        Channel::AccelY,
        Channel::AccelZ,
        Channel::GyroX,
        Channel::GyroY,
        Channel::GyroZ,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_trajectory(self) -> bool {
        matches!(self, Channel::Speed | Channel::TurnRate)
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Speed => "speed",
            Channel::TurnRate => "turn_rate",
            Channel::LinAccelNorm => "lin_accel_norm",
            Channel::AccelX => "accel_x",
            Channel::AccelY => "accel_y",
            Channel::AccelZ => "accel_z",
            Channel::GyroX => "gyro_x",
            Channel::GyroY => "gyro_y",
            Channel::GyroZ => "gyro_z",
        }
    }
}

/// One scalar channel sampled at (possibly irregular) timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSeries<T> {
    pub channel: Channel,
    /// Set once the series sits on a uniform grid.
    pub rate: Option<T>,
    pub times: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Scalar> ChannelSeries<T> {
    pub fn new(channel: Channel, times: Vec<T>, values: Vec<T>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Shape {
                expected: times.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            channel,
            rate: None,
            times,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn span(&self) -> T {
        match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => b - a,
            _ => T::zero(),
        }
    }
}

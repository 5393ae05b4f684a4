use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    derive_lin_accel_norm, derive_sensor_axis, derive_speed, derive_turn_rate, gaussian_smooth, resample_aligned, Channel, ChannelSeries,
    SensorRecord, Track, TrackSample,
};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Common grid rate, Hz.
    pub rate: f64,
    /// Smoothing σ for positions, seconds.
    pub sigma_trajectory: f64,
    /// Smoothing σ for sensor channels, seconds.
    pub sigma_sensor: f64,
    /// Minimum per-step displacement for a defined heading, meters.
    pub displacement_floor: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            rate: super::DEFAULT_RATE,
            sigma_trajectory: 0.5,
            sigma_sensor: 0.2,
            displacement_floor: super::DEFAULT_DISPLACEMENT_FLOOR,
        }
    }
}

/// Speed and turn rate of one track on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTrack<T> {
    pub track_id: Arc<str>,
    pub label: Option<Arc<str>>,
    pub rate: T,
    /// Grid step of the first value (time = step / rate).
    pub start_step: i64,
    pub speed: Vec<T>,
    pub turn_rate: Vec<T>,
}

impl<T: Scalar> PreparedTrack<T> {
    pub fn len(&self) -> usize {
        self.speed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speed.is_empty()
    }

    /// One past the last step.
    pub fn end_step(&self) -> i64 {
        self.start_step + self.len() as i64
    }

    pub fn channel(&self, channel: Channel) -> &[T] {
        match channel {
            Channel::Speed => &self.speed,
            Channel::TurnRate => &self.turn_rate,
            other => panic!("{} is not a trajectory channel", other.name()),
        }
    }
}

/// The seven sensor channels of one record on the shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSensor<T> {
    pub sensor_id: Arc<str>,
    pub rate: T,
    pub start_step: i64,
    /// Ordered as [`Channel::SENSOR`].
    pub channels: [Vec<T>; 7],
}

impl<T: Scalar> PreparedSensor<T> {
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }

    pub fn end_step(&self) -> i64 {
        self.start_step + self.len() as i64
    }

    pub fn channel(&self, channel: Channel) -> &[T] {
        assert!(!channel.is_trajectory(), "{} is not a sensor channel", channel.name());
        &self.channels[channel.index() - 2]
    }
}

/// Smooths positions, derives speed and turn rate, and resamples them onto
/// the shared grid.
pub fn prepare_track<T: Scalar>(track: &Track<T>, cfg: &PreprocessConfig) -> Result<PreparedTrack<T>> {
    track.validate()?;
    if track.samples.len() < 3 {
        return Err(Error::degenerate(format!("track {} has fewer than 3 samples", track.track_id)));
    }
    let sigma = T::lit(cfg.sigma_trajectory);
    let times: Vec<T> = track.samples.iter().map(|s| s.t).collect();
    let xs = ChannelSeries::new(Channel::Speed, times.clone(), track.samples.iter().map(|s| s.x).collect())?;
    let ys = ChannelSeries::new(Channel::Speed, times.clone(), track.samples.iter().map(|s| s.y).collect())?;
    let (xs, ys) = (gaussian_smooth(&xs, sigma)?, gaussian_smooth(&ys, sigma)?);
    let smoothed = Track {
        track_id: track.track_id.clone(),
        samples: times
            .iter()
            .zip(xs.values.iter().zip(&ys.values))
            .map(|(&t, (&x, &y))| TrackSample { t, x, y })
            .collect(),
        label: track.label.clone(),
    };
    let rate = T::lit(cfg.rate);
    let speed = derive_speed(&smoothed)?;
    let turn = derive_turn_rate(&smoothed, T::lit(cfg.displacement_floor))?;
    let (start_step, speed) = resample_aligned(&speed, rate)?;
    let (_, turn) = resample_aligned(&turn, rate)?;
    Ok(PreparedTrack {
        track_id: Arc::from(track.track_id.as_str()),
        label: track.label.as_deref().map(Arc::from),
        rate,
        start_step,
        speed: speed.values,
        turn_rate: turn.values,
    })
}

/// Derives the seven sensor channels, smooths and resamples them.
pub fn prepare_sensor<T: Scalar>(record: &SensorRecord<T>, cfg: &PreprocessConfig) -> Result<PreparedSensor<T>> {
    record.validate()?;
    let sigma = T::lit(cfg.sigma_sensor);
    let rate = T::lit(cfg.rate);
    let mut start = None;
    let mut channels: [Vec<T>; 7] = Default::default();
    for (slot, &channel) in channels.iter_mut().zip(Channel::SENSOR.iter()) {
        let raw = match channel {
            Channel::LinAccelNorm => derive_lin_accel_norm(record),
            axis => derive_sensor_axis(record, axis),
        };
        let (step, series) = resample_aligned(&gaussian_smooth(&raw, sigma)?, rate)?;
        start = Some(step);
        *slot = series.values;
    }
    Ok(PreparedSensor {
        sensor_id: Arc::from(record.participant_id.as_str()),
        rate,
        start_step: start.expect("seven channels"),
        channels,
    })
}

/// Prepared tracks and sensors of one scene.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreparedDataset<T> {
    pub tracks: Vec<PreparedTrack<T>>,
    pub sensors: Vec<PreparedSensor<T>>,
    /// Tracks too short to prepare; they still count in evaluation.
    pub skipped: Vec<String>,
}

impl<T: Scalar> PreparedDataset<T> {
    pub fn sensor(&self, id: &str) -> Option<&PreparedSensor<T>> {
        self.sensors.iter().find(|s| &*s.sensor_id == id)
    }

    pub fn sensor_index(&self, id: &str) -> Option<usize> {
        self.sensors.iter().position(|s| &*s.sensor_id == id)
    }
}

/// Prepares every track and sensor. Tracks that are too short to resample
/// are skipped and listed; any other error aborts.
pub fn prepare_dataset<T: Scalar>(tracks: &[Track<T>], sensors: &[SensorRecord<T>], cfg: &PreprocessConfig) -> Result<PreparedDataset<T>> {
    let mut out = PreparedDataset {
        tracks: Vec::with_capacity(tracks.len()),
        sensors: Vec::with_capacity(sensors.len()),
        skipped: Vec::new(),
    };
    for track in tracks {
        match prepare_track(track, cfg) {
            Ok(p) => out.tracks.push(p),
            Err(Error::DegenerateInput(msg)) => {
                tracing::debug!(track = %track.track_id, %msg, "skipping short track");
                out.skipped.push(track.track_id.clone());
            }
            Err(e) => return Err(e),
        }
    }
    for record in sensors {
        out.sensors.push(prepare_sensor(record, cfg)?);
    }
    let mut ids: Vec<&str> = out.sensors.iter().map(|s| &*s.sensor_id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("duplicate sensor id in dataset"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::SensorSample;

    #[test]
    fn walking_track_prepares_to_grid() {
        let samples = (0..=50)
            .map(|k| {
                let t = k as f64 * 0.2;
                TrackSample { t, x: 1.2 * t, y: 0.0 }
            })
            .collect();
        let track = Track::new("t1", samples, Some("p1".into())).unwrap();
        let p = prepare_track(&track, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.start_step, 0);
        assert_eq!(p.len(), 101);
        // truncated kernel biases positions within 3σ of either end
        let interior = &p.speed[20..81];
        assert!(interior.iter().all(|v| (v - 1.2).abs() < 1e-9));
        assert!(p.speed.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(p.turn_rate.iter().all(|v| v.abs() < 1e-9));
        assert_eq!(p.label.as_deref(), Some("p1"));
    }

    #[test]
    fn sensor_prepares_seven_channels() {
        let samples = (0..=250)
            .map(|k| SensorSample {
                t: 1.0 + k as f64 * 0.02,
                accel: [1.0, 0.0, 9.81],
                gravity: [0.0, 0.0, 9.81],
                gyro: [0.0, 0.0, 0.5],
            })
            .collect();
        let rec = SensorRecord::new("p1", samples).unwrap();
        let p = prepare_sensor(&rec, &PreprocessConfig::default()).unwrap();
        assert_eq!(p.start_step, 10);
        assert_eq!(p.len(), 51);
        assert!(p.channel(Channel::LinAccelNorm).iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(p.channel(Channel::GyroZ).iter().all(|v| (v - 0.5).abs() < 1e-9));
        assert!(p.channel(Channel::AccelZ).iter().all(|v| (v - 9.81).abs() < 1e-9));
    }
}

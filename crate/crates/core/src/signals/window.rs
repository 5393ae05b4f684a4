use super::{Channel, PreparedSensor, PreparedTrack};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A length-`W` slice of the nine channels for one (track, sensor) coupling.
///
/// Borrowed from prepared streams; no channel data is copied. Trajectory and
/// sensor parts usually start at the same step, but training negatives may
/// pair a trajectory slice with a time-shifted sensor slice.
#[derive(Debug, Clone, Copy)]
pub struct FeatureWindow<'a, T> {
    pub track_id: &'a str,
    pub sensor_id: &'a str,
    pub start_step: i64,
    pub sensor_start_step: i64,
    pub start_t: T,
    trajectory: [&'a [T]; 2],
    sensor: [&'a [T]; 7],
}

impl<'a, T: Scalar> FeatureWindow<'a, T> {
    /// Builds a window from explicit channel slices, which must share one length.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        track_id: &'a str,
        sensor_id: &'a str,
        start_step: i64,
        sensor_start_step: i64,
        start_t: T,
        trajectory: [&'a [T]; 2],
        sensor: [&'a [T]; 7],
    ) -> Result<Self> {
        let len = trajectory[0].len();
        for c in trajectory.iter().chain(sensor.iter()) {
            if c.len() != len {
                return Err(Error::Shape {
                    expected: len,
                    got: c.len(),
                });
            }
        }
        Ok(Self {
            track_id,
            sensor_id,
            start_step,
            sensor_start_step,
            start_t,
            trajectory,
            sensor,
        })
    }

    /// Couples `track[track_start..+len]` with `sensor[sensor_start..+len]`.
    /// `None` if either slice falls outside its stream.
    pub fn couple(
        track: &'a PreparedTrack<T>,
        track_start: i64,
        sensor: &'a PreparedSensor<T>,
        sensor_start: i64,
        len: usize,
    ) -> Option<Self> {
        let n = len as i64;
        if track_start < track.start_step
            || track_start + n > track.end_step()
            || sensor_start < sensor.start_step
            || sensor_start + n > sensor.end_step()
        {
            return None;
        }
        let ti = (track_start - track.start_step) as usize;
        let si = (sensor_start - sensor.start_step) as usize;
        let tr = |v: &'a Vec<T>| &v[ti..ti + len];
        let se = |v: &'a Vec<T>| &v[si..si + len];
        Some(Self {
            track_id: &track.track_id,
            sensor_id: &sensor.sensor_id,
            start_step: track_start,
            sensor_start_step: sensor_start,
            start_t: T::from_i64(track_start).expect("step representable") / track.rate,
            trajectory: [tr(&track.speed), tr(&track.turn_rate)],
            sensor: [
                se(&sensor.channels[0]),
                se(&sensor.channels[1]),
                se(&sensor.channels[2]),
                se(&sensor.channels[3]),
                se(&sensor.channels[4]),
                se(&sensor.channels[5]),
                se(&sensor.channels[6]),
            ],
        })
    }

    /// Window length in samples.
    pub fn len(&self) -> usize {
        self.trajectory[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, channel: Channel) -> &'a [T] {
        if channel.is_trajectory() {
            self.trajectory[channel.index()]
        } else {
            self.sensor[channel.index() - 2]
        }
    }

    pub fn trajectory_channels(&self) -> &[&'a [T]; 2] {
        &self.trajectory
    }

    pub fn sensor_channels(&self) -> &[&'a [T]; 7] {
        &self.sensor
    }

    /// All nine channels in [`Channel::ALL`] order.
    pub fn channels(&self) -> [&'a [T]; 9] {
        let [a, b] = self.trajectory;
        let [c, d, e, f, g, h, i] = self.sensor;
        [a, b, c, d, e, f, g, h, i]
    }

    /// Whether trajectory and sensor parts come from the same time span.
    pub fn is_aligned(&self) -> bool {
        self.start_step == self.sensor_start_step
    }
}

/// Owned window storage, for tests and ad-hoc construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBuf<T> {
    pub track_id: String,
    pub sensor_id: String,
    pub start_step: i64,
    pub start_t: T,
    /// Ordered as [`Channel::ALL`].
    pub channels: [Vec<T>; 9],
}

impl<T: Scalar> WindowBuf<T> {
    pub fn new(track_id: &str, sensor_id: &str, channels: [Vec<T>; 9]) -> Self {
        Self {
            track_id: track_id.into(),
            sensor_id: sensor_id.into(),
            start_step: 0,
            start_t: T::zero(),
            channels,
        }
    }

    /// All channels zero.
    pub fn zeros(len: usize) -> Self {
        Self::new("track", "sensor", std::array::from_fn(|_| vec![T::zero(); len]))
    }

    pub fn view(&self) -> FeatureWindow<'_, T> {
        let c = &self.channels;
        FeatureWindow::from_parts(
            &self.track_id,
            &self.sensor_id,
            self.start_step,
            self.start_step,
            self.start_t,
            [&c[0], &c[1]],
            [&c[2], &c[3], &c[4], &c[5], &c[6], &c[7], &c[8]],
        )
        .expect("window channels share one length")
    }

    pub fn channel_mut(&mut self, channel: Channel) -> &mut Vec<T> {
        &mut self.channels[channel.index()]
    }

    pub fn from_view(w: &FeatureWindow<'_, T>) -> Self {
        Self {
            track_id: w.track_id.into(),
            sensor_id: w.sensor_id.into(),
            start_step: w.start_step,
            start_t: w.start_t,
            channels: w.channels().map(|c| c.to_vec()),
        }
    }
}

/// Start steps of every full window inside the temporal intersection.
pub fn window_starts<T: Scalar>(
    track: &PreparedTrack<T>,
    sensor: &PreparedSensor<T>,
    len: usize,
    stride: usize,
) -> impl Iterator<Item = i64> {
    let lo = track.start_step.max(sensor.start_step);
    let hi = track.end_step().min(sensor.end_step());
    let last = hi - len as i64;
    let stride = stride.max(1);
    let range = if len == 0 || last < lo { 0..0 } else { lo..last + 1 };
    range.step_by(stride)
}

/// Sliding windows of length `len` at `stride` over the overlap of `track`
/// and `sensor`. Overlap shorter than `len` gives an empty list.
pub fn make_windows<'a, T: Scalar>(
    track: &'a PreparedTrack<T>,
    sensor: &'a PreparedSensor<T>,
    len: usize,
    stride: usize,
) -> Result<Vec<FeatureWindow<'a, T>>> {
    if track.rate != sensor.rate {
        return Err(Error::invalid(format!(
            "track {} at {} Hz cannot pair with sensor {} at {} Hz",
            track.track_id, track.rate, sensor.sensor_id, sensor.rate
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("window stride must be ≥ 1"));
    }
    Ok(window_starts(track, sensor, len, stride)
        .map(|s| FeatureWindow::couple(track, s, sensor, s, len).expect("start inside overlap"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    pub(crate) fn flat_track(start: i64, len: usize) -> PreparedTrack<f64> {
        PreparedTrack {
            track_id: Arc::from("t"),
            label: None,
            rate: 10.0,
            start_step: start,
            speed: (0..len).map(|i| i as f64).collect(),
            turn_rate: vec![0.0; len],
        }
    }

    pub(crate) fn flat_sensor(start: i64, len: usize) -> PreparedSensor<f64> {
        PreparedSensor {
            sensor_id: Arc::from("s"),
            rate: 10.0,
            start_step: start,
            channels: std::array::from_fn(|c| vec![c as f64; len]),
        }
    }

    #[test]
    fn exact_overlap_gives_one_window() {
        let (t, s) = (flat_track(0, 100), flat_sensor(0, 100));
        for stride in [1, 7, 100, 1000] {
            assert_eq!(make_windows(&t, &s, 100, stride).unwrap().len(), 1);
        }
    }

    #[test]
    fn stride_arithmetic() {
        let (t, s) = (flat_track(5, 110), flat_sensor(0, 400));
        let w = make_windows(&t, &s, 100, 10).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].start_step, 15);
        assert_eq!(w[1].channel(Channel::Speed)[0], 10.0);
        assert_eq!(w[1].channel(Channel::GyroZ)[0], 6.0);
        assert!((w[1].start_t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn short_overlap_is_empty_not_error() {
        let (t, s) = (flat_track(0, 99), flat_sensor(0, 400));
        assert!(make_windows(&t, &s, 100, 1).unwrap().is_empty());
        let far = flat_sensor(500, 400);
        assert!(make_windows(&t, &far, 10, 1).unwrap().is_empty());
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let t = flat_track(0, 100);
        let mut s = flat_sensor(0, 100);
        s.rate = 20.0;
        assert!(make_windows(&t, &s, 10, 1).is_err());
    }

    #[test]
    fn window_buf_round_trips_through_view() {
        let mut buf = WindowBuf::<f64>::zeros(4);
        buf.channel_mut(Channel::LinAccelNorm)[2] = 3.0;
        let v = buf.view();
        assert_eq!(v.len(), 4);
        assert_eq!(v.channel(Channel::LinAccelNorm), &[0.0, 0.0, 3.0, 0.0]);
        assert_eq!(WindowBuf::from_view(&v), buf);
    }

    proptest! {
        #[test]
        fn stride_one_count_matches_enumeration(
            t0 in 0i64..50, tl in 1usize..200, s0 in 0i64..50, sl in 1usize..200, w in 1usize..60,
        ) {
            let (t, s) = (flat_track(t0, tl), flat_sensor(s0, sl));
            let got = make_windows(&t, &s, w, 1).unwrap();
            // oracle: test every candidate start for full containment in both streams
            let oracle = (-10i64..300)
                .filter(|&st| st >= t0 && st + w as i64 <= t0 + tl as i64 && st >= s0 && st + w as i64 <= s0 + sl as i64)
                .count();
            prop_assert_eq!(got.len(), oracle);
            let overlap = (t0 + tl as i64).min(s0 + sl as i64) - t0.max(s0);
            if overlap >= w as i64 {
                prop_assert_eq!(got.len() as i64, overlap - w as i64 + 1);
            }
            for win in &got {
                prop_assert!(win.channels().iter().all(|c| c.len() == w && c.iter().all(|v| v.is_finite())));
            }
        }
    }
}

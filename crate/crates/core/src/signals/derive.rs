use super::{norm3, Channel, ChannelSeries, SensorRecord, Track};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Movement speed per sample: central difference of position in the
/// interior, one-sided at both ends.
pub fn derive_speed<T: Scalar>(track: &Track<T>) -> Result<ChannelSeries<T>> {
    let s = &track.samples;
    if s.len() < 2 {
        return Err(Error::degenerate(format!(
            "speed needs 2 samples, track {} has {}",
            track.track_id,
            s.len()
        )));
    }
    let n = s.len();
    let rate = |a: usize, b: usize| (s[b].x - s[a].x).hypot(s[b].y - s[a].y) / (s[b].t - s[a].t);
    let values = (0..n)
        .map(|i| match i {
            0 => rate(0, 1),
            i if i == n - 1 => rate(n - 2, n - 1),
            i => rate(i - 1, i + 1),
        })
        .collect();
    ChannelSeries::new(Channel::Speed, s.iter().map(|p| p.t).collect(), values)
}

/// Signed heading change per second.
///
/// Headings come from consecutive displacement vectors. A sample whose
/// adjacent displacements are shorter than `displacement_floor` carries 0.
/// End samples repeat their interior neighbour.
pub fn derive_turn_rate<T: Scalar>(track: &Track<T>, displacement_floor: T) -> Result<ChannelSeries<T>> {
    let s = &track.samples;
    if s.len() < 3 {
        return Err(Error::degenerate(format!(
            "turn rate needs 3 samples, track {} has {}",
            track.track_id,
            s.len()
        )));
    }
    let n = s.len();
    // (heading, displacement length) for segment k = sample k -> k+1
    let segments: Vec<(T, T)> = s
        .windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].x - w[0].x, w[1].y - w[0].y);
            (dy.atan2(dx), dx.hypot(dy))
        })
        .collect();
    let two = T::lit(2.0);
    let mut values = vec![T::zero(); n];
    for i in 1..n - 1 {
        let (h0, d0) = segments[i - 1];
        let (h1, d1) = segments[i];
        if d0 < displacement_floor || d1 < displacement_floor {
            continue;
        }
        let dt = (s[i + 1].t - s[i - 1].t) / two;
        values[i] = wrap_angle(h1 - h0) / dt;
    }
    values[0] = values[1];
    values[n - 1] = values[n - 2];
    ChannelSeries::new(Channel::TurnRate, s.iter().map(|p| p.t).collect(), values)
}

/// Wraps an angle into (-π, π].
pub(crate) fn wrap_angle<T: Scalar>(a: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut w = a % two_pi;
    if w > pi {
        w -= two_pi;
    } else if w <= -pi {
        w += two_pi;
    }
    w
}

/// `|accel - gravity|` per sample.
pub fn derive_lin_accel_norm<T: Scalar>(record: &SensorRecord<T>) -> ChannelSeries<T> {
    let values = record
        .samples
        .iter()
        .map(|s| norm3([s.accel[0] - s.gravity[0], s.accel[1] - s.gravity[1], s.accel[2] - s.gravity[2]]))
        .collect();
    ChannelSeries {
        channel: Channel::LinAccelNorm,
        rate: None,
        times: record.samples.iter().map(|s| s.t).collect(),
        values,
    }
}

/// Raw acceleration or angular velocity axis as a channel.
///
/// Panics if `channel` is not one of the six axis channels.
pub fn derive_sensor_axis<T: Scalar>(record: &SensorRecord<T>, channel: Channel) -> ChannelSeries<T> {
    let pick: fn(&super::SensorSample<T>) -> T = match channel {
        Channel::AccelX => |s| s.accel[0],
        Channel::AccelY => |s| s.accel[1],
        Channel::AccelZ => |s| s.accel[2],
        Channel::GyroX => |s| s.gyro[0],
        Channel::GyroY => |s| s.gyro[1],
        Channel::GyroZ => |s| s.gyro[2],
        other => panic!("{} is not a sensor axis channel", other.name()),
    };
    ChannelSeries {
        channel,
        rate: None,
        times: record.samples.iter().map(|s| s.t).collect(),
        values: record.samples.iter().map(pick).collect(),
    }
}

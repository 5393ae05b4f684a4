use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{MotionState, MotionTimeline, ScenarioConfig};
use crate::signals::{SensorRecord, SensorSample};

/// Standard gravity (m/s²).
pub const GRAVITY: f64 = 9.81;

const STEP_FREQUENCY: f64 = 2.0;
const VERTICAL_GAIN: f64 = 1.7;
const FORWARD_GAIN: f64 = 0.4;
const LATERAL_GAIN: f64 = 0.3;
const BURST_AMPLITUDE: f64 = 3.0;
const TILT_REVERSION: f64 = 0.2;

/// Rotates a level-frame vector into a device frame tilted by `roll`
/// (about x) and `pitch` (about y).
fn tilt(v: [f64; 3], roll: f64, pitch: f64) -> [f64; 3] {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let [x, y, z] = v;
    // R = Rx(roll)ᵀ · Ry(pitch)ᵀ
    let x1 = cp * x - sp * z;
    let z1 = sp * x + cp * z;
    [x1, cr * y + sr * z1, -sr * y + cr * z1]
}

/// Inertial stream of the device carried along `timeline`.
///
/// The device frame is x forward (facing), y left, z up, tilted by a slowly
/// wandering roll and pitch. Reported timestamps are shifted by
/// `clock_offset`.
pub fn synthesize_imu(
    participant_id: &str,
    timeline: &MotionTimeline,
    cfg: &ScenarioConfig,
    clock_offset: f64,
    rng: &mut ChaCha8Rng,
) -> SensorRecord<f64> {
    let dt = timeline.dt;
    let accel_noise = Normal::new(0.0, cfg.accel_noise).expect("validated noise");
    let gyro_noise = Normal::new(0.0, cfg.gyro_noise).expect("validated noise");
    let wander = Normal::new(0.0, cfg.tilt_wander * (2.0 * TILT_REVERSION * dt).sqrt()).expect("validated tilt");
    let (mut roll, mut pitch) = (0.0f64, 0.0f64);
    let mut phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let mut samples = Vec::with_capacity(timeline.len());
    for i in 0..timeline.len() {
        let v = timeline.speed[i];
        let rel = timeline.heading[i] - timeline.facing[i];
        // body acceleration in the level, facing-aligned frame
        let (fwd, lat) = (timeline.accel[i], v * timeline.heading_rate[i]);
        let mut body = [fwd * rel.cos() - lat * rel.sin(), fwd * rel.sin() + lat * rel.cos(), 0.0];
        let mut gyro = [0.0, 0.0, timeline.facing_rate[i]];
        if v > 0.2 {
            phase += 2.0 * PI * STEP_FREQUENCY * dt;
            let dir = if timeline.state[i] == MotionState::BackwardWalk {
                -1.0
            } else {
                1.0
            };
            body[0] += dir * FORWARD_GAIN * v * (phase + PI / 2.0).sin();
            body[1] += LATERAL_GAIN * v * (phase / 2.0).sin();
            body[2] += VERTICAL_GAIN * v * phase.sin();
            gyro[0] += 0.3 * v * (phase / 2.0).cos();
        }
        if timeline.posture[i] >= 0.0 {
            let u = 2.0 * PI * timeline.posture[i];
            body[2] += BURST_AMPLITUDE * u.sin();
            body[0] += 0.5 * BURST_AMPLITUDE * (2.0 * u).sin();
            gyro[1] += 1.0 * u.cos();
        }
        roll += -TILT_REVERSION * roll * dt + wander.sample(rng);
        pitch += -TILT_REVERSION * pitch * dt + wander.sample(rng);
        let gravity = tilt([0.0, 0.0, GRAVITY], roll, pitch);
        let lin = tilt(body, roll, pitch);
        let accel = std::array::from_fn(|k| lin[k] + gravity[k] + accel_noise.sample(rng));
        let gyro = std::array::from_fn(|k| gyro[k] + gyro_noise.sample(rng));
        samples.push(SensorSample {
            t: timeline.time(i) + clock_offset,
            accel,
            gravity,
            gyro,
        });
    }
    SensorRecord {
        participant_id: participant_id.to_owned(),
        samples,
    }
}

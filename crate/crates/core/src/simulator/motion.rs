use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::ScenarioConfig;
use crate::signals::wrap_angle;

/// Behavioral state of a simulated person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionState {
    Stand,
    Walk,
    /// Stationary with upper-body motion (squats, reaching).
    Inspect,
    BackwardWalk,
}

impl MotionState {
    pub const ALL: [MotionState; 4] = [
        MotionState::Stand,
        MotionState::Walk,
        MotionState::Inspect,
        MotionState::BackwardWalk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotionState::Stand => "stand",
            MotionState::Walk => "walk",
            MotionState::Inspect => "inspect",
            MotionState::BackwardWalk => "backward_walk",
        }
    }
}

/// Latent motion of one person sampled every `dt` seconds from `t0`.
///
/// `heading` is the direction of travel, `facing` the direction of the body
/// (and device); they differ by π while walking backward.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTimeline {
    pub t0: f64,
    pub dt: f64,
    pub state: Vec<MotionState>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub speed: Vec<f64>,
    pub heading: Vec<f64>,
    pub facing: Vec<f64>,
    /// Rate of change of speed.
    pub accel: Vec<f64>,
    /// Rate of change of heading.
    pub heading_rate: Vec<f64>,
    /// Rate of change of facing.
    pub facing_rate: Vec<f64>,
    /// Progress in `[0, 1)` through a squat or reach, negative outside one.
    pub posture: Vec<f64>,
}

impl MotionTimeline {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Index of the sample nearest to `t`, clamped to the timeline.
    pub fn index_at(&self, t: f64) -> usize {
        (((t - self.t0) / self.dt).round().max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    /// `(start time, state)` at every state change inside `[a, b]`.
    pub fn state_changes(&self, a: f64, b: f64) -> Vec<(f64, MotionState)> {
        let (i0, i1) = (self.index_at(a), self.index_at(b));
        let mut out = vec![(self.time(i0), self.state[i0])];
        for i in i0 + 1..=i1 {
            if self.state[i] != self.state[i - 1] {
                out.push((self.time(i), self.state[i]));
            }
        }
        out
    }
}

const MAX_TURN_RATE: f64 = 1.5;
const TURN_GAIN: f64 = 2.0;
const MAX_ACCEL: f64 = 1.0;
const ARRIVAL_RADIUS: f64 = 0.3;
const BACKWARD_SPEED: f64 = 0.6;
const MARGIN: f64 = 1.0;
/// Squats or reaches per second while inspecting.
const BURST_RATE: f64 = 0.25;
/// Duration of one squat or reach (s).
pub(crate) const BURST_LENGTH: f64 = 1.5;

struct Agent {
    x: f64,
    y: f64,
    v: f64,
    heading: f64,
    facing: f64,
}

/// Semi-Markov waypoint walker inside the arena.
pub fn simulate_motion(cfg: &ScenarioConfig, n: usize, rng: &mut ChaCha8Rng) -> MotionTimeline {
    let dt = 1.0 / cfg.sensor_rate;
    let (w, h) = (cfg.arena[0], cfg.arena[1]);
    let walk_speed = Normal::new(cfg.walk_speed, cfg.walk_speed_jitter)
        .expect("validated jitter")
        .sample(rng)
        .clamp(0.5 * cfg.walk_speed, 1.5 * cfg.walk_speed);
    let stand = Exp::new(1.0 / cfg.dwell_stand).expect("validated dwell");
    let inspect = Exp::new(1.0 / cfg.dwell_inspect).expect("validated dwell");
    let mut a = Agent {
        x: rng.gen_range(MARGIN..w - MARGIN),
        y: rng.gen_range(MARGIN..h - MARGIN),
        v: 0.0,
        heading: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        facing: 0.0,
    };
    a.facing = a.heading;
    let mut tl = MotionTimeline {
        t0: 0.0,
        dt,
        state: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        heading: Vec::with_capacity(n),
        facing: Vec::with_capacity(n),
        accel: Vec::with_capacity(n),
        heading_rate: Vec::with_capacity(n),
        facing_rate: Vec::with_capacity(n),
        posture: Vec::with_capacity(n),
    };
    let mut state = MotionState::Walk;
    let mut target = (rng.gen_range(MARGIN..w - MARGIN), rng.gen_range(MARGIN..h - MARGIN));
    let mut remaining = f64::INFINITY;
    // slow facing drift while stationary
    let mut idle_turn = 0.0;
    let mut burst_left = 0.0;
    for _ in 0..n {
        let moving = matches!(state, MotionState::Walk | MotionState::BackwardWalk);
        let (dx, dy) = (target.0 - a.x, target.1 - a.y);
        let dist = dx.hypot(dy);
        let (accel, omega_heading, omega_facing);
        if moving {
            let desired = dy.atan2(dx);
            let err = wrap_angle(desired - a.heading);
            let omega = (TURN_GAIN * err).clamp(-MAX_TURN_RATE, MAX_TURN_RATE);
            let cruise = if state == MotionState::Walk { walk_speed } else { BACKWARD_SPEED };
            let v_target = (cruise * err.cos().max(0.0)).min(0.8 * dist + 0.05);
            accel = ((v_target - a.v) / dt).clamp(-MAX_ACCEL, MAX_ACCEL);
            omega_heading = omega;
            omega_facing = omega;
        } else {
            accel = ((0.0 - a.v) / dt).clamp(-MAX_ACCEL, MAX_ACCEL);
            if state == MotionState::Inspect && rng.gen_bool((0.3 * dt).min(1.0)) {
                idle_turn = rng.gen_range(-0.8..0.8);
            } else if rng.gen_bool((0.5 * dt).min(1.0)) {
                idle_turn = 0.0;
            }
            omega_heading = 0.0;
            omega_facing = if state == MotionState::Inspect { idle_turn } else { 0.0 };
        }
        let posture = if state == MotionState::Inspect {
            if burst_left <= 0.0 && rng.gen_bool((BURST_RATE * dt).min(1.0)) {
                burst_left = BURST_LENGTH;
            }
            if burst_left > 0.0 {
                let u = (BURST_LENGTH - burst_left) / BURST_LENGTH;
                burst_left -= dt;
                u
            } else {
                -1.0
            }
        } else {
            burst_left = 0.0;
            -1.0
        };
        tl.posture.push(posture);
        tl.state.push(state);
        tl.x.push(a.x);
        tl.y.push(a.y);
        tl.speed.push(a.v);
        tl.heading.push(a.heading);
        tl.facing.push(a.facing);
        tl.accel.push(accel);
        tl.heading_rate.push(omega_heading);
        tl.facing_rate.push(omega_facing);

        a.v = (a.v + accel * dt).max(0.0);
        a.heading = wrap_angle(a.heading + omega_heading * dt);
        a.facing = if moving {
            if state == MotionState::BackwardWalk {
                wrap_angle(a.heading + std::f64::consts::PI)
            } else {
                a.heading
            }
        } else {
            wrap_angle(a.facing + omega_facing * dt)
        };
        a.x = (a.x + a.v * a.heading.cos() * dt).clamp(0.0, w);
        a.y = (a.y + a.v * a.heading.sin() * dt).clamp(0.0, h);

        let done = if moving {
            dist < ARRIVAL_RADIUS && a.v < 0.1
        } else {
            remaining -= dt;
            remaining <= 0.0 && a.v == 0.0
        };
        if done {
            state = next_state(cfg, rng);
            match state {
                MotionState::Walk => {
                    target = (rng.gen_range(MARGIN..w - MARGIN), rng.gen_range(MARGIN..h - MARGIN));
                }
                MotionState::BackwardWalk => {
                    let back = a.facing + std::f64::consts::PI;
                    let d = rng.gen_range(1.0..3.0);
                    target = (
                        (a.x + d * back.cos()).clamp(MARGIN, w - MARGIN),
                        (a.y + d * back.sin()).clamp(MARGIN, h - MARGIN),
                    );
                    a.heading = back;
                }
                MotionState::Stand => remaining = stand.sample(rng),
                MotionState::Inspect => remaining = inspect.sample(rng),
            }
            idle_turn = 0.0;
        }
    }
    tl
}

fn next_state(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> MotionState {
    let w = &cfg.transition_weights;
    let total: f64 = w.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (state, weight) in MotionState::ALL.iter().zip(w) {
        if u < *weight {
            return *state;
        }
        u -= weight;
    }
    MotionState::Walk
}

/// A second walker offset sideways from `lead` by `gap` meters.
pub fn follow(lead: &MotionTimeline, gap: f64, arena: [f64; 2]) -> MotionTimeline {
    let mut tl = lead.clone();
    for i in 0..tl.len() {
        let side = lead.heading[i] + std::f64::consts::FRAC_PI_2;
        tl.x[i] = (lead.x[i] + gap * side.cos()).clamp(0.0, arena[0]);
        tl.y[i] = (lead.y[i] + gap * side.sin()).clamp(0.0, arena[1]);
    }
    tl
}

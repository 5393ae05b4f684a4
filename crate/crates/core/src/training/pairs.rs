use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signals::{window_starts, FeatureWindow, PreparedDataset, PreparedSensor, PreparedTrack};

/// How a training pair was coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    /// Same identity, same time.
    Positive,
    /// Different identity, same time.
    CrossIdentity,
    /// Same identity, windows at least `W` samples apart.
    TimeShift,
}

/// A labeled (track window, sensor window) coupling, by index into a
/// [`PreparedDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairSample {
    pub track: usize,
    pub sensor: usize,
    pub track_start: i64,
    pub sensor_start: i64,
    pub kind: PairKind,
}

impl PairSample {
    pub fn is_positive(&self) -> bool {
        self.kind == PairKind::Positive
    }

    /// 1 for positives, 0 for negatives.
    pub fn target<T: Scalar>(&self) -> T {
        if self.is_positive() {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn window<'a, T: Scalar>(&self, ds: &'a PreparedDataset<T>, len: usize) -> Result<FeatureWindow<'a, T>> {
        let (track, sensor) = match (ds.tracks.get(self.track), ds.sensors.get(self.sensor)) {
            (Some(t), Some(s)) => (t, s),
            _ => return Err(Error::Lookup(format!("pair {self:?} outside dataset"))),
        };
        FeatureWindow::couple(track, self.track_start, sensor, self.sensor_start, len)
            .ok_or_else(|| Error::Lookup(format!("pair {self:?} outside its streams")))
    }
}

/// True if the pair's label agrees with its coupling: positives are aligned
/// same-identity windows; negatives differ in identity or lie `W` apart.
pub fn is_admissible<T: Scalar>(ds: &PreparedDataset<T>, pair: &PairSample, len: usize) -> bool {
    let (Some(track), Some(sensor)) = (ds.tracks.get(pair.track), ds.sensors.get(pair.sensor)) else {
        return false;
    };
    if pair.window(ds, len).is_err() {
        return false;
    }
    let same = track.label.as_deref() == Some(&*sensor.sensor_id);
    let apart = (pair.track_start - pair.sensor_start).abs() >= len as i64;
    match pair.kind {
        PairKind::Positive => same && pair.track_start == pair.sensor_start,
        PairKind::CrossIdentity => track.label.is_some() && !same && pair.track_start == pair.sensor_start,
        PairKind::TimeShift => same && apart,
    }
}

/// Start steps `start + k·stride` of every full window inside one stream.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    start: i64,
    count: i64,
    stride: i64,
}

impl Lattice {
    fn new(start: i64, len: usize, window: usize, stride: usize) -> Self {
        let count = if len < window { 0 } else { ((len - window) / stride + 1) as i64 };
        Self {
            start,
            count,
            stride: stride as i64,
        }
    }

    fn at(&self, k: i64) -> i64 {
        self.start + k * self.stride
    }

    /// Number of lattice points `<= x`.
    fn count_le(&self, x: i64) -> i64 {
        if x < self.start {
            0
        } else {
            ((x - self.start) / self.stride + 1).min(self.count)
        }
    }
}

/// A contiguous run of negative candidates sharing one coupling rule.
#[derive(Debug, Clone, Copy)]
enum Block {
    /// Same-time windows of a track against another participant's sensor.
    Cross {
        track: usize,
        sensor: usize,
        first: i64,
        stride: i64,
    },
    /// One track window against the own sensor's windows `W` or more away.
    Shift {
        track: usize,
        sensor: usize,
        track_start: i64,
        lattice: Lattice,
        low: i64,
        high_from: i64,
    },
}

struct Candidates {
    blocks: Vec<Block>,
    /// `ends[i]` is the cumulative candidate count through block `i`.
    ends: Vec<u64>,
}

impl Candidates {
    fn new() -> Self {
        Self {
            blocks: Vec::new(),
            ends: Vec::new(),
        }
    }

    fn push(&mut self, block: Block, count: u64) {
        if count > 0 {
            self.ends.push(self.total() + count);
            self.blocks.push(block);
        }
    }

    fn total(&self) -> u64 {
        self.ends.last().copied().unwrap_or(0)
    }

    fn get(&self, idx: u64) -> PairSample {
        let b = self.ends.partition_point(|&e| e <= idx);
        let offset = (idx - if b == 0 { 0 } else { self.ends[b - 1] }) as i64;
        match self.blocks[b] {
            Block::Cross {
                track,
                sensor,
                first,
                stride,
            } => {
                let s = first + offset * stride;
                PairSample {
                    track,
                    sensor,
                    track_start: s,
                    sensor_start: s,
                    kind: PairKind::CrossIdentity,
                }
            }
            Block::Shift {
                track,
                sensor,
                track_start,
                lattice,
                low,
                high_from,
            } => {
                let k = if offset < low { offset } else { high_from + offset - low };
                PairSample {
                    track,
                    sensor,
                    track_start,
                    sensor_start: lattice.at(k),
                    kind: PairKind::TimeShift,
                }
            }
        }
    }

    /// `k` distinct candidates drawn uniformly, in enumeration order.
    fn sample(&self, k: u64, rng: &mut ChaCha8Rng) -> Vec<PairSample> {
        let total = self.total();
        let mut picks: Vec<u64> = if k >= total {
            (0..total).collect()
        } else {
            index::sample(rng, total as usize, k as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect()
        };
        picks.sort_unstable();
        picks.into_iter().map(|i| self.get(i)).collect()
    }
}

fn own_sensor<'a, T: Scalar>(ds: &'a PreparedDataset<T>, track: &PreparedTrack<T>) -> Option<(usize, &'a PreparedSensor<T>)> {
    let label = track.label.as_deref()?;
    let idx = ds.sensor_index(label)?;
    Some((idx, &ds.sensors[idx]))
}

/// Builds positives and up to `floor(rho_neg · |positives|)` negatives.
///
/// Negatives are split between cross-identity and time-shift couplings by
/// `cross_fraction`; a shortfall in one source is filled from the other.
/// Unlabeled tracks are excluded.
pub fn build_pairs_with_mix<T: Scalar>(
    ds: &PreparedDataset<T>,
    window: usize,
    stride: usize,
    rho_neg: f64,
    cross_fraction: f64,
    seed: u64,
) -> Result<Vec<PairSample>> {
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be ≥ 1"));
    }
    if !(rho_neg >= 1.0) {
        return Err(Error::invalid(format!("rho_neg {rho_neg} must be ≥ 1")));
    }
    if !(0.0..=1.0).contains(&cross_fraction) {
        return Err(Error::invalid(format!("cross fraction {cross_fraction} outside [0, 1]")));
    }
    let mut positives = Vec::new();
    let mut cross = Candidates::new();
    let mut shift = Candidates::new();
    let w = window as i64;
    for (ti, track) in ds.tracks.iter().enumerate() {
        let Some((own_idx, own)) = own_sensor(ds, track) else {
            continue;
        };
        positives.extend(window_starts(track, own, window, stride).map(|s| PairSample {
            track: ti,
            sensor: own_idx,
            track_start: s,
            sensor_start: s,
            kind: PairKind::Positive,
        }));
        for (si, sensor) in ds.sensors.iter().enumerate() {
            if si == own_idx {
                continue;
            }
            let count = window_starts(track, sensor, window, stride).count() as u64;
            let first = track.start_step.max(sensor.start_step);
            cross.push(
                Block::Cross {
                    track: ti,
                    sensor: si,
                    first,
                    stride: stride as i64,
                },
                count,
            );
        }
        let lattice = Lattice::new(own.start_step, own.len(), window, stride);
        let track_lattice = Lattice::new(track.start_step, track.len(), window, stride);
        for k in 0..track_lattice.count {
            let s = track_lattice.at(k);
            let low = lattice.count_le(s - w);
            let high_from = lattice.count_le(s + w - 1);
            let count = low + (lattice.count - high_from);
            shift.push(
                Block::Shift {
                    track: ti,
                    sensor: own_idx,
                    track_start: s,
                    lattice,
                    low,
                    high_from,
                },
                count as u64,
            );
        }
    }
    if positives.is_empty() {
        return Err(Error::degenerate(
            "no positive pairs: no labeled track overlaps its sensor by a full window",
        ));
    }
    let target = ((rho_neg * positives.len() as f64).floor() as u64).min(cross.total() + shift.total());
    let mut n_cross = ((target as f64) * cross_fraction).round() as u64;
    n_cross = n_cross.min(cross.total());
    let mut n_shift = (target - n_cross).min(shift.total());
    n_cross = (target - n_shift).min(cross.total());
    n_shift = n_shift.min(target - n_cross);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = positives;
    pairs.extend(cross.sample(n_cross, &mut rng));
    pairs.extend(shift.sample(n_shift, &mut rng));
    Ok(pairs)
}

/// [`build_pairs_with_mix`] with an even split between negative sources.
pub fn build_pairs<T: Scalar>(ds: &PreparedDataset<T>, window: usize, stride: usize, rho_neg: f64, seed: u64) -> Result<Vec<PairSample>> {
    build_pairs_with_mix(ds, window, stride, rho_neg, 0.5, seed)
}

/// (positives, negatives) in a pair list.
pub fn class_counts(pairs: &[PairSample]) -> (usize, usize) {
    let pos = pairs.iter().filter(|p| p.is_positive()).count();
    (pos, pairs.len() - pos)
}

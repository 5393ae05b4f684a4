use super::{CacheKey, Estimator, RunningStats, Trainable};
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};
use crate::signals::{Channel, FeatureWindow};

/// Number of cross-modal features per window.
pub const FEATURE_COUNT: usize = 9;

/// Half-width, in samples, of the moving average applied before comparing
/// speed with the acceleration envelope.
const ENVELOPE_HALF_WIDTH: usize = 5;
/// Speed above which a track counts as walking (m/s).
const WALKING_SPEED: f64 = 0.6;
/// Speed below which a track counts as still (m/s).
const STILL_SPEED: f64 = 0.15;
/// Envelope below which a sensor counts as quiet (m/s²).
const QUIET_ACCEL: f64 = 0.9;
/// Envelope above which a sensor counts as active (m/s²).
const ACTIVE_ACCEL: f64 = 1.3;
/// Half-width, in samples, over which activity must persist to count as
/// sustained.
const SUSTAIN_HALF_WIDTH: usize = 15;

/// Cross-modal summary features of one window.
///
/// 0. correlation of smoothed speed with the smoothed linear-acceleration
///    norm
/// 1. strongest |correlation| of turn rate with a gyro axis
/// 2. strongest |correlation| of the speed derivative with an accel axis
/// 3. fraction of samples where the track walks but the sensor is quiet
/// 4. fraction of samples where the track is still but the sensor is active
/// 5. fraction of samples where the track walks
/// 6. fraction of samples where the sensor is active
/// 7. product of 0 and 5
/// 8. fraction of samples where the track is still while the sensor has
///    been active for the surrounding three seconds
///
/// Features are computed on raw channel values and do not depend on the
/// running statistics.
pub fn window_features<T: Scalar>(window: &FeatureWindow<'_, T>) -> [T; FEATURE_COUNT] {
    let speed = moving_average(window.channel(Channel::Speed), ENVELOPE_HALF_WIDTH);
    let envelope = moving_average(window.channel(Channel::LinAccelNorm), ENVELOPE_HALF_WIDTH);
    let raw_speed = window.channel(Channel::Speed);
    let turn = window.channel(Channel::TurnRate);
    let gyro = [Channel::GyroX, Channel::GyroY, Channel::GyroZ].map(|c| window.channel(c));
    let accel = [Channel::AccelX, Channel::AccelY, Channel::AccelZ].map(|c| window.channel(c));

    let strongest = |a: &[T], others: &[&[T]]| others.iter().map(|b| pearson(a, b).abs()).fold(T::zero(), T::max);
    let f_turn = strongest(turn, &gyro);
    let n = raw_speed.len();
    let f_dspeed = if n >= 3 {
        let dspeed: Vec<T> = (1..n - 1).map(|i| raw_speed[i + 1] - raw_speed[i - 1]).collect();
        let inner: Vec<&[T]> = accel.iter().map(|a| &a[1..n - 1]).collect();
        strongest(&dspeed, &inner)
    } else {
        T::zero()
    };

    let fraction = |pred: &dyn Fn(T, T) -> bool| {
        if n == 0 {
            return T::zero();
        }
        let hits = speed.iter().zip(&envelope).filter(|(s, a)| pred(**s, **a)).count();
        T::from_count(hits) / T::from_count(n)
    };
    let (walk, still, quiet, active) = (
        T::lit(WALKING_SPEED),
        T::lit(STILL_SPEED),
        T::lit(QUIET_ACCEL),
        T::lit(ACTIVE_ACCEL),
    );
    let walk_quiet = fraction(&|s, a| s > walk && a < quiet);
    let still_active = fraction(&|s, a| s < still && a > active);
    let walking = fraction(&|s, _| s > walk);
    let sensor_active = fraction(&|_, a| a > active);
    let active_flags: Vec<T> = envelope.iter().map(|&a| if a > active { T::one() } else { T::zero() }).collect();
    let sustained = moving_average(&active_flags, SUSTAIN_HALF_WIDTH);
    let still_sustained = if n == 0 {
        T::zero()
    } else {
        let hits = speed.iter().zip(&sustained).filter(|(s, a)| **s < still && **a >= T::one()).count();
        T::from_count(hits) / T::from_count(n)
    };
    let corr = pearson(&speed, &envelope);
    [
        corr,
        f_turn,
        f_dspeed,
        walk_quiet,
        still_active,
        walking,
        sensor_active,
        corr * walking,
        still_sustained,
    ]
}

/// Centered moving average, truncated at the edges.
fn moving_average<T: Scalar>(v: &[T], half: usize) -> Vec<T> {
    let mut prefix = Vec::with_capacity(v.len() + 1);
    prefix.push(T::zero());
    for &x in v {
        let last = *prefix.last().expect("non-empty prefix");
        prefix.push(last + x);
    }
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(v.len());
            (prefix[hi] - prefix[lo]) / T::from_count(hi - lo)
        })
        .collect()
}

/// Pearson correlation; 0 when either side is (numerically) constant.
fn pearson<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    if n < 2 {
        return T::zero();
    }
    let count = T::from_count(n);
    let ma = a[..n].iter().copied().sum::<T>() / count;
    let mb = b[..n].iter().copied().sum::<T>() / count;
    let (mut cov, mut va, mut vb) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    let denom = (va * vb).sqrt();
    if denom <= T::lit(1e-12) * count {
        T::zero()
    } else {
        (cov / denom).max(-T::one()).min(T::one())
    }
}

/// Logistic regression over [`window_features`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLogistic<T> {
    window_len: usize,
    stats: RunningStats<T>,
    /// Feature weights followed by the bias.
    weights: Vec<T>,
    revision: u64,
}

#[derive(Debug, Clone)]
pub struct LogisticCache<T> {
    key: CacheKey,
    features: [T; FEATURE_COUNT],
    p: T,
}

impl<T: Scalar> FeatureLogistic<T> {
    /// All-zero weights: every window scores 0.5.
    pub fn zeros(window_len: usize, stats: RunningStats<T>) -> Self {
        Self {
            window_len,
            stats,
            weights: vec![T::zero(); FEATURE_COUNT + 1],
            revision: 0,
        }
    }

    pub fn with_weights(window_len: usize, stats: RunningStats<T>, weights: Vec<T>) -> Result<Self> {
        if weights.len() != FEATURE_COUNT + 1 {
            return Err(Error::Shape {
                expected: FEATURE_COUNT + 1,
                got: weights.len(),
            });
        }
        Ok(Self {
            window_len,
            stats,
            weights,
            revision: 0,
        })
    }

    fn logit(&self, features: &[T; FEATURE_COUNT]) -> T {
        let bias = self.weights[FEATURE_COUNT];
        features.iter().zip(&self.weights).fold(bias, |acc, (f, w)| acc + *f * *w)
    }

    fn check_len(&self, window: &FeatureWindow<'_, T>) -> Result<()> {
        if window.len() != self.window_len {
            return Err(Error::Shape {
                expected: self.window_len,
                got: window.len(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> Estimator<T> for FeatureLogistic<T> {
    fn window_len(&self) -> usize {
        self.window_len
    }

    fn stats(&self) -> &RunningStats<T> {
        &self.stats
    }

    fn probability(&self, window: &FeatureWindow<'_, T>) -> Result<T> {
        self.forward(window).map(|(p, _)| p)
    }
}

impl<T: Scalar> Trainable<T> for FeatureLogistic<T> {
    type Cache = LogisticCache<T>;

    fn params(&self) -> &[T] {
        &self.weights
    }

    fn params_mut(&mut self) -> &mut [T] {
        self.revision += 1;
        &mut self.weights
    }

    fn stats_mut(&mut self) -> &mut RunningStats<T> {
        &mut self.stats
    }

    fn forward(&self, window: &FeatureWindow<'_, T>) -> Result<(T, Self::Cache)> {
        self.check_len(window)?;
        let features = window_features(window);
        let z = self.logit(&features);
        if !z.is_finite() {
            return Err(Error::numeric("logistic"));
        }
        let p = logistic(z);
        Ok((
            p,
            LogisticCache {
                key: CacheKey::new(window, self.revision),
                features,
                p,
            },
        ))
    }

    fn backward_into(&self, window: &FeatureWindow<'_, T>, cache: &Self::Cache, upstream: T, grad: &mut [T]) -> Result<()> {
        cache.key.check(window, self.revision)?;
        let g = upstream * cache.p * (T::one() - cache.p);
        for (slot, f) in grad.iter_mut().zip(cache.features.iter()) {
            *slot += g * *f;
        }
        grad[FEATURE_COUNT] += g;
        Ok(())
    }
}

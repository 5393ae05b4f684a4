use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signals::{Channel, FeatureWindow};

/// Lower bound applied to every variance once statistics are frozen.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Per-channel running mean and variance, maintained as an exponential
/// moving average over training batches and frozen afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    mean: [T; 9],
    var: [T; 9],
    momentum: T,
    updates: u64,
    frozen: bool,
}

impl<T: Scalar> RunningStats<T> {
    /// Fresh statistics (mean 0, variance 1) that accept updates.
    pub fn new(momentum: T) -> Self {
        Self {
            mean: [T::zero(); 9],
            var: [T::one(); 9],
            momentum,
            updates: 0,
            frozen: false,
        }
    }

    /// Frozen statistics from explicit moments.
    pub fn from_moments(mean: [T; 9], var: [T; 9]) -> Self {
        let mut s = Self {
            mean,
            var,
            momentum: T::lit(0.1),
            updates: 1,
            frozen: false,
        };
        s.freeze();
        s
    }

    /// Frozen population statistics over every sample of the given windows.
    pub fn from_population<'a>(windows: impl IntoIterator<Item = FeatureWindow<'a, T>>) -> Result<Self> {
        let (mean, var, n) = batch_moments(windows);
        if n == 0 {
            return Err(Error::degenerate("no samples to compute statistics from"));
        }
        Ok(Self::from_moments(mean, var))
    }

    /// Folds one batch into the moving averages. The first batch initializes
    /// the statistics directly.
    pub fn update<'a>(&mut self, batch: impl IntoIterator<Item = FeatureWindow<'a, T>>) -> Result<()> {
        if self.frozen {
            return Err(Error::State("running statistics are frozen".into()));
        }
        let (mean, var, n) = batch_moments(batch);
        if n == 0 {
            return Ok(());
        }
        if self.updates == 0 {
            self.mean = mean;
            self.var = var;
        } else {
            let m = self.momentum;
            let keep = T::one() - m;
            for c in 0..9 {
                self.mean[c] = keep * self.mean[c] + m * mean[c];
                self.var[c] = keep * self.var[c] + m * var[c];
            }
        }
        self.updates += 1;
        Ok(())
    }

    /// Stops further updates and floors every variance.
    pub fn freeze(&mut self) {
        let floor = T::lit(VARIANCE_FLOOR);
        for v in &mut self.var {
            if !(*v > floor) {
                *v = floor;
            }
        }
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn momentum(&self) -> T {
        self.momentum
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn mean(&self, channel: Channel) -> T {
        self.mean[channel.index()]
    }

    pub fn var(&self, channel: Channel) -> T {
        self.var[channel.index()]
    }

    pub fn means(&self) -> &[T; 9] {
        &self.mean
    }

    pub fn vars(&self) -> &[T; 9] {
        &self.var
    }

    /// Rebuilds statistics from persisted parts.
    pub(crate) fn from_parts(mean: [T; 9], var: [T; 9], momentum: T, updates: u64, frozen: bool) -> Self {
        Self {
            mean,
            var,
            momentum,
            updates,
            frozen,
        }
    }
}

/// Population mean and variance per channel across all window samples.
fn batch_moments<'a, T: Scalar>(windows: impl IntoIterator<Item = FeatureWindow<'a, T>>) -> ([T; 9], [T; 9], usize) {
    let mut sum = [T::zero(); 9];
    let mut sq = [T::zero(); 9];
    let mut n = 0usize;
    let windows: Vec<_> = windows.into_iter().collect();
    for w in &windows {
        for (c, ch) in w.channels().iter().enumerate() {
            sum[c] += ch.iter().copied().sum::<T>();
        }
        n += w.len();
    }
    if n == 0 {
        return ([T::zero(); 9], [T::zero(); 9], 0);
    }
    let count = T::from_count(n);
    let mean = sum.map(|s| s / count);
    // second pass around the mean for accuracy
    for w in &windows {
        for (c, ch) in w.channels().iter().enumerate() {
            sq[c] += ch.iter().map(|&v| (v - mean[c]) * (v - mean[c])).sum::<T>();
        }
    }
    (mean, sq.map(|s| s / count), n)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CacheKey, Estimator, RunningStats, Trainable};
use crate::error::{Error, Result};
use crate::scalar::{logistic, Scalar};
use crate::signals::{Channel, FeatureWindow, PreparedSensor, PreparedTrack};

/// Added to running variances before standardizing.
const STANDARDIZE_EPS: f64 = 1e-5;

const CHANNELS: usize = Channel::COUNT;

/// Attention weights, dense pre-activations, dense outputs and probability.
type Head<T> = (Vec<T>, Vec<T>, Vec<T>, T);

/// Layer sizes of [`ConvAttentionNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    /// Input window length in samples.
    pub window: usize,
    /// Kernel of the short convolution path.
    pub kernel_short: usize,
    /// Kernel of the long convolution path.
    pub kernel_long: usize,
    /// Feature maps per path.
    pub maps: usize,
    /// Width of the attention scoring layer.
    pub attention: usize,
    /// Hidden dense units.
    pub hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            window: 300,
            kernel_short: 5,
            kernel_long: 25,
            maps: 16,
            attention: 32,
            hidden: 32,
        }
    }
}

impl Architecture {
    pub fn with_window(window: usize) -> Self {
        Self { window, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kernel_short >= 1
            && self.kernel_short <= self.kernel_long
            && self.kernel_long <= self.window
            && self.maps >= 1
            && self.attention >= 1
            && self.hidden >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("inconsistent architecture {self:?}")))
        }
    }

    /// Per-timestep feature width (both paths concatenated).
    pub fn features(&self) -> usize {
        2 * self.maps
    }

    /// Timesteps after valid convolution with the long kernel.
    pub fn steps(&self) -> usize {
        self.window - self.kernel_long + 1
    }

    /// Short-path input offset that centers it on the long path.
    fn offset(&self) -> usize {
        (self.kernel_long - self.kernel_short) / 2
    }

    pub fn layout(&self) -> Layout {
        let mut at = 0;
        let mut take = |n: usize| {
            let start = at;
            at += n;
            start
        };
        let (m, f, a, h) = (self.maps, self.features(), self.attention, self.hidden);
        let short_w = take(m * CHANNELS * self.kernel_short);
        let short_b = take(m);
        let long_w = take(m * CHANNELS * self.kernel_long);
        let long_b = take(m);
        let att_w = take(a * f);
        let att_b = take(a);
        let att_v = take(a);
        let dense_w = take(h * f);
        let dense_b = take(h);
        let out_w = take(h);
        let out_b = take(1);
        Layout {
            short_w,
            short_b,
            long_w,
            long_b,
            att_w,
            att_b,
            att_v,
            dense_w,
            dense_b,
            out_w,
            out_b,
            total: at,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
///
/// Convolution weights are `[map][channel][tap]`, dense weights `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub short_w: usize,
    pub short_b: usize,
    pub long_w: usize,
    pub long_b: usize,
    pub att_w: usize,
    pub att_b: usize,
    pub att_v: usize,
    pub dense_w: usize,
    pub dense_b: usize,
    pub out_w: usize,
    pub out_b: usize,
    pub total: usize,
}

/// Dual-kernel temporal convolution with attention pooling.
///
/// standardize → {short conv, long conv} → tanh → concat → attention scores
/// `v·tanh(U h + b)` → softmax pooling over time → tanh dense → logistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvAttentionNet<T> {
    arch: Architecture,
    layout: Layout,
    params: Vec<T>,
    stats: RunningStats<T>,
    revision: u64,
}

/// Activations kept from [`Trainable::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    key: CacheKey,
    x: Vec<T>,
    h: Vec<T>,
    e: Vec<T>,
    alpha: Vec<T>,
    z: Vec<T>,
    d: Vec<T>,
    p: T,
}

impl<T: Scalar> ForwardCache<T> {
    /// Attention weights over timesteps.
    pub fn attention(&self) -> &[T] {
        &self.alpha
    }
}

impl<T: Scalar> ConvAttentionNet<T> {
    /// All parameters zero: every window scores 0.5.
    pub fn zeros(arch: Architecture, stats: RunningStats<T>) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        Ok(Self {
            arch,
            layout,
            params: vec![T::zero(); layout.total],
            stats,
            revision: 0,
        })
    }

    /// Glorot-uniform weights and zero biases from a seeded generator.
    pub fn new(arch: Architecture, stats: RunningStats<T>, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(arch, stats)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = net.layout;
        let (m, f, a, h) = (arch.maps, arch.features(), arch.attention, arch.hidden);
        let mut fill = |start: usize, n: usize, fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[start..start + n] {
                *p = T::lit(rng.gen_range(-bound..bound));
            }
        };
        fill(l.short_w, m * CHANNELS * arch.kernel_short, CHANNELS * arch.kernel_short, m);
        fill(l.long_w, m * CHANNELS * arch.kernel_long, CHANNELS * arch.kernel_long, m);
        fill(l.att_w, a * f, f, a);
        fill(l.att_v, a, a, 1);
        fill(l.dense_w, h * f, f, h);
        fill(l.out_w, h, h, 1);
        Ok(net)
    }

    pub fn from_params(arch: Architecture, stats: RunningStats<T>, params: Vec<T>) -> Result<Self> {
        let mut net = Self::zeros(arch, stats)?;
        if params.len() != net.layout.total {
            return Err(Error::Shape {
                expected: net.layout.total,
                got: params.len(),
            });
        }
        net.params = params;
        Ok(net)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn scales(&self) -> [(T, T); CHANNELS] {
        let eps = T::lit(STANDARDIZE_EPS);
        std::array::from_fn(|c| {
            let ch = Channel::ALL[c];
            (self.stats.mean(ch), T::one() / (self.stats.var(ch) + eps).sqrt())
        })
    }

    /// Channel-major standardized copy: channel `c` occupies `[c*len, (c+1)*len)`.
    fn standardize(&self, channels: [&[T]; CHANNELS]) -> Vec<T> {
        let scales = self.scales();
        let len = channels[0].len();
        let mut x = Vec::with_capacity(CHANNELS * len);
        for (c, ch) in channels.iter().enumerate() {
            let (mu, inv) = scales[c];
            x.extend(ch.iter().map(|&v| (v - mu) * inv));
        }
        x
    }

    /// Post-tanh conv features at timestep `tau` of a sequence of length `len`.
    fn conv_at(&self, x: &[T], len: usize, tau: usize, out: &mut [T]) {
        let (a, l, p) = (&self.arch, &self.layout, &self.params);
        let off = a.offset();
        for (path, (w0, b0, k)) in [(l.short_w, l.short_b, a.kernel_short), (l.long_w, l.long_b, a.kernel_long)]
            .into_iter()
            .enumerate()
        {
            let shift = if path == 0 { tau + off } else { tau };
            for o in 0..a.maps {
                let mut acc = p[b0 + o];
                for c in 0..CHANNELS {
                    let w = &p[w0 + (o * CHANNELS + c) * k..][..k];
                    let xs = &x[c * len + shift..][..k];
                    for j in 0..k {
                        acc += w[j] * xs[j];
                    }
                }
                out[path * a.maps + o] = acc.tanh();
            }
        }
    }

    /// Attention hidden activations for one timestep; returns its score.
    fn attend_at(&self, h: &[T], e: &mut [T]) -> T {
        let (a, l, p) = (&self.arch, &self.layout, &self.params);
        let f = a.features();
        let mut score = T::zero();
        for i in 0..a.attention {
            let w = &p[l.att_w + i * f..][..f];
            let mut acc = p[l.att_b + i];
            for j in 0..f {
                acc += w[j] * h[j];
            }
            e[i] = acc.tanh();
            score += p[l.att_v + i] * e[i];
        }
        score
    }

    /// Softmax pooling, dense layer and output for one window's timesteps.
    fn head(&self, h: &[T], scores: &[T]) -> Result<Head<T>> {
        let (a, l, p) = (&self.arch, &self.layout, &self.params);
        let f = a.features();
        let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
        let mut alpha: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
        let total: T = alpha.iter().copied().sum();
        alpha.iter_mut().for_each(|v| *v /= total);
        let mut z = vec![T::zero(); f];
        for (t, &w) in alpha.iter().enumerate() {
            for (zj, &hj) in z.iter_mut().zip(&h[t * f..(t + 1) * f]) {
                *zj += w * hj;
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("attention pooling"));
        }
        let mut d = vec![T::zero(); a.hidden];
        let mut logit = p[l.out_b];
        for (j, dj) in d.iter_mut().enumerate() {
            let w = &p[l.dense_w + j * f..][..f];
            let mut acc = p[l.dense_b + j];
            for i in 0..f {
                acc += w[i] * z[i];
            }
            *dj = acc.tanh();
            logit += p[l.out_w + j] * *dj;
        }
        if !logit.is_finite() {
            return Err(Error::numeric("dense"));
        }
        Ok((alpha, z, d, logistic(logit)))
    }

    fn timesteps(&self, x: &[T], len: usize, count: usize) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        let (f, att) = (self.arch.features(), self.arch.attention);
        let mut h = vec![T::zero(); count * f];
        let mut e = vec![T::zero(); count * att];
        let mut s = vec![T::zero(); count];
        for tau in 0..count {
            self.conv_at(x, len, tau, &mut h[tau * f..(tau + 1) * f]);
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("convolution"));
        }
        for tau in 0..count {
            s[tau] = self.attend_at(&h[tau * f..(tau + 1) * f], &mut e[tau * att..(tau + 1) * att]);
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("attention scores"));
        }
        Ok((h, e, s))
    }

    fn check_len(&self, window: &FeatureWindow<'_, T>) -> Result<()> {
        if window.len() != self.arch.window {
            return Err(Error::Shape {
                expected: self.arch.window,
                got: window.len(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> Estimator<T> for ConvAttentionNet<T> {
    fn window_len(&self) -> usize {
        self.arch.window
    }

    fn stats(&self) -> &RunningStats<T> {
        &self.stats
    }

    fn probability(&self, window: &FeatureWindow<'_, T>) -> Result<T> {
        self.forward(window).map(|(p, _)| p)
    }

    /// Convolution and attention scores are per-timestep, so they are computed
    /// once over the whole overlap and shared by every window.
    fn score_pair(&self, track: &PreparedTrack<T>, sensor: &PreparedSensor<T>, stride: usize) -> Result<Vec<(i64, T)>> {
        let w = self.arch.window;
        let lo = track.start_step.max(sensor.start_step);
        let hi = track.end_step().min(sensor.end_step());
        if hi - lo < w as i64 {
            return Ok(Vec::new());
        }
        let len = (hi - lo) as usize;
        let full = FeatureWindow::couple(track, lo, sensor, lo, len).expect("overlap inside both streams");
        let x = self.standardize(full.channels());
        let steps = self.arch.steps();
        let count = len - self.arch.kernel_long + 1;
        let (h, _, s) = self.timesteps(&x, len, count)?;
        let f = self.arch.features();
        (0..=len - w)
            .step_by(stride.max(1))
            .map(|o| {
                let (_, _, _, p) = self.head(&h[o * f..(o + steps) * f], &s[o..o + steps])?;
                Ok((lo + o as i64, p))
            })
            .collect()
    }
}

impl<T: Scalar> Trainable<T> for ConvAttentionNet<T> {
    type Cache = ForwardCache<T>;

    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        self.revision += 1;
        &mut self.params
    }

    fn stats_mut(&mut self) -> &mut RunningStats<T> {
        self.revision += 1;
        &mut self.stats
    }

    fn forward(&self, window: &FeatureWindow<'_, T>) -> Result<(T, Self::Cache)> {
        self.check_len(window)?;
        let x = self.standardize(window.channels());
        let (h, e, s) = self.timesteps(&x, window.len(), self.arch.steps())?;
        let (alpha, z, d, p) = self.head(&h, &s)?;
        Ok((
            p,
            ForwardCache {
                key: CacheKey::new(window, self.revision),
                x,
                h,
                e,
                alpha,
                z,
                d,
                p,
            },
        ))
    }

    fn backward_into(&self, window: &FeatureWindow<'_, T>, cache: &Self::Cache, upstream: T, grad: &mut [T]) -> Result<()> {
        cache.key.check(window, self.revision)?;
        if grad.len() != self.layout.total {
            return Err(Error::Shape {
                expected: self.layout.total,
                got: grad.len(),
            });
        }
        let (a, l, p) = (&self.arch, &self.layout, &self.params);
        let (f, att, hid, n) = (a.features(), a.attention, a.hidden, a.steps());
        let len = a.window;
        let one = T::one();

        // output and dense layers
        let g_logit = upstream * cache.p * (one - cache.p);
        grad[l.out_b] += g_logit;
        let mut g_z = vec![T::zero(); f];
        for j in 0..hid {
            let dj = cache.d[j];
            grad[l.out_w + j] += g_logit * dj;
            let g_pre = g_logit * p[l.out_w + j] * (one - dj * dj);
            grad[l.dense_b + j] += g_pre;
            let w = &p[l.dense_w + j * f..][..f];
            let gw = &mut grad[l.dense_w + j * f..][..f];
            for i in 0..f {
                gw[i] += g_pre * cache.z[i];
                g_z[i] += g_pre * w[i];
            }
        }

        // attention pooling: z = Σ α_t h_t, α = softmax(s)
        let h = &cache.h;
        let g_alpha: Vec<T> = (0..n).map(|t| (0..f).map(|i| g_z[i] * h[t * f + i]).sum()).collect();
        let weighted: T = (0..n).map(|t| cache.alpha[t] * g_alpha[t]).sum();
        let mut g_h = vec![T::zero(); n * f];
        for t in 0..n {
            let at = cache.alpha[t];
            for i in 0..f {
                g_h[t * f + i] = at * g_z[i];
            }
            let g_s = at * (g_alpha[t] - weighted);
            // s_t = v · tanh(U h_t + b)
            let ht = &h[t * f..][..f];
            for k in 0..att {
                let ek = cache.e[t * att + k];
                grad[l.att_v + k] += g_s * ek;
                let g_pre = g_s * p[l.att_v + k] * (one - ek * ek);
                grad[l.att_b + k] += g_pre;
                let w = &p[l.att_w + k * f..][..f];
                let gw = &mut grad[l.att_w + k * f..][..f];
                for i in 0..f {
                    gw[i] += g_pre * ht[i];
                    g_h[t * f + i] += g_pre * w[i];
                }
            }
        }

        // convolutions
        let off = a.offset();
        for t in 0..n {
            for (path, (w0, b0, k)) in [(l.short_w, l.short_b, a.kernel_short), (l.long_w, l.long_b, a.kernel_long)]
                .into_iter()
                .enumerate()
            {
                let shift = if path == 0 { t + off } else { t };
                for o in 0..a.maps {
                    let idx = t * f + path * a.maps + o;
                    let hv = h[idx];
                    let g_pre = g_h[idx] * (one - hv * hv);
                    grad[b0 + o] += g_pre;
                    for c in 0..CHANNELS {
                        let xs = &cache.x[c * len + shift..][..k];
                        let gw = &mut grad[w0 + (o * CHANNELS + c) * k..][..k];
                        for j in 0..k {
                            gw[j] += g_pre * xs[j];
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

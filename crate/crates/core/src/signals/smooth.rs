use super::ChannelSeries;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gaussian smoothing along time with a kernel truncated at 3σ.
///
/// Weights are evaluated at the actual time offsets, so irregular sampling is
/// handled; at the series ends the truncated kernel is renormalized to sum 1.
pub fn gaussian_smooth<T: Scalar>(series: &ChannelSeries<T>, sigma: T) -> Result<ChannelSeries<T>> {
    if series.is_empty() {
        return Err(Error::degenerate("cannot smooth an empty series"));
    }
    if !(sigma > T::zero()) {
        return Err(Error::invalid(format!("smoothing sigma must be > 0, got {sigma}")));
    }
    let times = &series.times;
    let values = &series.values;
    // slack so grid points at exactly 3σ are not dropped by rounding
    let slack = T::one() + (T::epsilon() * T::lit(1e3)).max(T::lit(1e-9));
    let reach = T::lit(3.0) * sigma * slack;
    let denom = T::lit(2.0) * sigma * sigma;
    let n = values.len();
    let mut out = Vec::with_capacity(n);
    let mut lo = 0;
    for i in 0..n {
        let ti = times[i];
        while times[lo] < ti - reach {
            lo += 1;
        }
        let mut acc = T::zero();
        let mut norm = T::zero();
        for j in lo..n {
            let d = times[j] - ti;
            if d > reach {
                break;
            }
            let w = (-(d * d) / denom).exp();
            acc += w * values[j];
            norm += w;
        }
        out.push(acc / norm);
    }
    Ok(ChannelSeries {
        channel: series.channel,
        rate: series.rate,
        times: times.clone(),
        values: out,
    })
}

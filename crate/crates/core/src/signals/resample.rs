use super::ChannelSeries;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Linear interpolation onto a uniform grid starting at the first timestamp.
///
/// The grid never extends past the last timestamp.
pub fn resample<T: Scalar>(series: &ChannelSeries<T>, rate: T) -> Result<ChannelSeries<T>> {
    check_span(series, rate)?;
    let t0 = series.times[0];
    let span = series.span();
    let count = grid_count(span * rate);
    let times: Vec<T> = (0..count).map(|k| t0 + T::from_count(k) / rate).collect();
    let values = interpolate(series, &times);
    Ok(ChannelSeries {
        channel: series.channel,
        rate: Some(rate),
        times,
        values,
    })
}

/// Resamples onto the absolute grid `k / rate` covering the series.
///
/// Returns the first grid step and the resampled series. Streams resampled
/// this way share step indices, which is what windowing relies on.
pub fn resample_aligned<T: Scalar>(series: &ChannelSeries<T>, rate: T) -> Result<(i64, ChannelSeries<T>)> {
    check_span(series, rate)?;
    let eps = T::lit(1e-9);
    let first = (series.times[0] * rate - eps).ceil();
    let last = (series.times[series.len() - 1] * rate + eps).floor();
    let first_step = first.to_i64().ok_or_else(|| Error::invalid("timestamp out of range"))?;
    let last_step = last.to_i64().ok_or_else(|| Error::invalid("timestamp out of range"))?;
    if last_step < first_step + 1 {
        return Err(Error::degenerate("series covers fewer than 2 grid points"));
    }
    let times: Vec<T> = (first_step..=last_step)
        .map(|k| T::from_i64(k).expect("grid step representable") / rate)
        .collect();
    let values = interpolate(series, &times);
    Ok((
        first_step,
        ChannelSeries {
            channel: series.channel,
            rate: Some(rate),
            times,
            values,
        },
    ))
}

fn check_span<T: Scalar>(series: &ChannelSeries<T>, rate: T) -> Result<()> {
    if !(rate > T::zero()) {
        return Err(Error::invalid(format!("resampling rate must be > 0, got {rate}")));
    }
    if series.len() < 2 || series.span() < T::lit(2.0) / rate {
        return Err(Error::degenerate(format!(
            "series spans {} s, need at least {} s",
            series.span(),
            T::lit(2.0) / rate
        )));
    }
    Ok(())
}

fn grid_count<T: Scalar>(span_steps: T) -> usize {
    (span_steps + T::lit(1e-9)).floor().to_usize().expect("finite span") + 1
}

/// Grid times must be sorted; points outside the sample range clamp to the ends.
fn interpolate<T: Scalar>(series: &ChannelSeries<T>, grid: &[T]) -> Vec<T> {
    let (ts, vs) = (&series.times, &series.values);
    let last = ts.len() - 1;
    let mut j = 0;
    grid.iter()
        .map(|&t| {
            while j < last - 1 && ts[j + 1] <= t {
                j += 1;
            }
            if t <= ts[0] {
                return vs[0];
            }
            if t >= ts[last] {
                return vs[last];
            }
            let frac = (t - ts[j]) / (ts[j + 1] - ts[j]);
            if frac == T::zero() {
                vs[j]
            } else {
                vs[j] + (vs[j + 1] - vs[j]) * frac
            }
        })
        .collect()
}

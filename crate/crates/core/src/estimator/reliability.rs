use super::stats::{RunningStats, VARIANCE_FLOOR};
use crate::scalar::{logistic, mean_var, Scalar};
use crate::signals::{Channel, FeatureWindow};

/// Activity-based reliability of a window.
///
/// `logistic(max(ln(var(speed)/σ̃²_speed), ln(var(lin_accel)/σ̃²_lin_accel)))`
/// with population variances over the window. All four variances are floored
/// at [`VARIANCE_FLOOR`], so the result is defined for constant windows.
pub fn reliability<T: Scalar>(window: &FeatureWindow<'_, T>, stats: &RunningStats<T>) -> T {
    let floor = T::lit(VARIANCE_FLOOR);
    let log_ratio = |channel: Channel| {
        let (_, v) = mean_var(window.channel(channel));
        (v.max(floor) / stats.var(channel).max(floor)).ln()
    };
    logistic(log_ratio(Channel::Speed).max(log_ratio(Channel::LinAccelNorm)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::WindowBuf;
    use proptest::prelude::*;

    fn stats(speed_var: f64, acc_var: f64) -> RunningStats<f64> {
        let mut var = [1.0; 9];
        var[Channel::Speed.index()] = speed_var;
        var[Channel::LinAccelNorm.index()] = acc_var;
        RunningStats::from_moments([0.0; 9], var)
    }

    /// Alternating ±a has population variance a².
    fn alternating(len: usize, a: f64) -> Vec<f64> {
        (0..len).map(|i| if i % 2 == 0 { a } else { -a }).collect()
    }

    fn window(speed: Vec<f64>, acc: Vec<f64>) -> WindowBuf<f64> {
        let len = speed.len();
        let mut w = WindowBuf::zeros(len);
        *w.channel_mut(Channel::Speed) = speed;
        *w.channel_mut(Channel::LinAccelNorm) = acc;
        w
    }

    #[test]
    fn equal_variances_give_one_half() {
        let w = window(alternating(100, 0.5), alternating(100, 2.0));
        let r = reliability(&w.view(), &stats(0.25, 4.0));
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_windows_are_unreliable() {
        let w = window(vec![1.3; 50], vec![0.2; 50]);
        let r = reliability(&w.view(), &stats(0.25, 4.0));
        assert!(r <= 0.01);
        assert!(r >= 0.0);
    }

    #[test]
    fn e_squared_speed_ratio_gives_logistic_two() {
        let e = std::f64::consts::E;
        let w = window(alternating(100, e * 0.5), alternating(100, 2.0));
        let r = reliability(&w.view(), &stats(0.25, 4.0));
        // direct evaluation: 1 / (1 + e^-2)
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((r - expected).abs() < 1e-9);
        assert!((r - 0.8808).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn ignores_non_activity_channels(
            vals in prop::collection::vec(-5.0f64..5.0, 20),
            noise in prop::collection::vec(-50.0f64..50.0, 20),
        ) {
            let base = window(vals.clone(), vals.iter().map(|v| v.abs()).collect());
            let mut other = base.clone();
            for c in [Channel::TurnRate, Channel::AccelX, Channel::AccelZ, Channel::GyroY, Channel::GyroZ] {
                *other.channel_mut(c) = noise.clone();
            }
            let s = stats(0.7, 1.3);
            prop_assert_eq!(reliability(&base.view(), &s), reliability(&other.view(), &s));
        }
    }
}

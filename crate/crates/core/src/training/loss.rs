use crate::scalar::Scalar;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

fn clamp<T: Scalar>(p: T) -> T {
    let eps = T::lit(PROB_CLAMP);
    p.max(eps).min(T::one() - eps)
}

/// `-(w_pos·y·ln p + (1-y)·ln(1-p))` with `p` clamped.
pub fn weighted_bce<T: Scalar>(p: T, y: T, w_pos: T) -> T {
    let p = clamp(p);
    -(w_pos * y * p.ln() + (T::one() - y) * (T::one() - p).ln())
}

/// Derivative of [`weighted_bce`] with respect to `p`, evaluated at the
/// clamped probability.
pub fn weighted_bce_grad<T: Scalar>(p: T, y: T, w_pos: T) -> T {
    let p = clamp(p);
    -w_pos * y / p + (T::one() - y) / (T::one() - p)
}

/// Mean loss of a batch.
pub fn batch_loss<T: Scalar>(ps: &[T], ys: &[T], w_pos: T) -> T {
    let total: T = ps.iter().zip(ys).map(|(&p, &y)| weighted_bce(p, y, w_pos)).sum();
    total / T::from_count(ps.len().max(1))
}

/// Inverse-frequency weight `N_neg / N_pos`; 1 when either class is absent.
pub fn positive_weight<T: Scalar>(n_pos: usize, n_neg: usize) -> T {
    if n_pos == 0 || n_neg == 0 {
        T::one()
    } else {
        T::from_count(n_neg) / T::from_count(n_pos)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        assert!((weighted_bce(0.5, 1.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(weighted_bce(1.0, 1.0, 3.0) < 1e-6);
        assert!(weighted_bce(0.0, 0.0, 3.0) < 1e-6);
        assert!(weighted_bce(0.0f64, 1.0, 1.0).is_finite());
        assert_eq!(positive_weight::<f64>(10, 40), 4.0);
    }

    #[test]
    fn batch_loss_ignores_order() {
        let ps = [0.1, 0.7, 0.4, 0.99];
        let ys = [0.0, 1.0, 1.0, 0.0];
        let a: f64 = batch_loss(&ps, &ys, 2.0);
        let b = batch_loss(&[0.99, 0.4, 0.1, 0.7], &[0.0, 1.0, 0.0, 1.0], 2.0);
        assert!((a - b).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(p in 0.01f64..0.99, y in prop::bool::ANY, w in 0.5f64..64.0) {
            let y = if y { 1.0 } else { 0.0 };
            let h = 1e-6;
            let fd = (weighted_bce(p + h, y, w) - weighted_bce(p - h, y, w)) / (2.0 * h);
            let g = weighted_bce_grad(p, y, w);
            prop_assert!((fd - g).abs() <= 1e-6 * g.abs().max(1.0));
        }
    }
}

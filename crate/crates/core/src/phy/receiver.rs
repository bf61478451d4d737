use crate::codec::ResidualVector;
use crate::error::{invalid, Result};
use crate::scalar::{lit, Scalar};

/// `2·a·y/σ²` for antipodal amplitude `a`; hard ±1 (0 for y = 0) when σ² = 0.
#[inline]
pub(crate) fn axis_llr<T: Scalar>(y: T, amp: T, sigma2: T) -> T {
    if sigma2 == T::zero() {
        if y > T::zero() {
            T::one()
        } else if y < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    } else {
        lit::<T>(2.0) * amp * y / sigma2
    }
}

/// LLRs of the BPSK stream on the I components: `2·√P_d·Re(y)/σ²`.
/// The Q components never enter.
pub fn compute_llr<T: Scalar>(received_i: &[T], p_d: T, sigma2: T) -> Result<Vec<T>> {
    if !(p_d > T::zero()) {
        return Err(invalid("p_d", "digital stream absent (zero power)"));
    }
    if !(sigma2 >= T::zero()) {
        return Err(invalid("sigma2", "must be non-negative"));
    }
    let amp = p_d.sqrt();
    Ok(received_i.iter().map(|&y| axis_llr(y, amp, sigma2)).collect())
}

/// Linear MMSE estimate `r̂ = m/(m² + σ²) · y`; all zeros when `m = 0`.
pub fn mmse_denoise<T: Scalar>(received_q: &[T], m: T, sigma2: T) -> ResidualVector<T> {
    if m == T::zero() {
        return ResidualVector::from_values(vec![T::zero(); received_q.len()]);
    }
    let gain = m / (m * m + sigma2);
    ResidualVector::from_values(received_q.iter().map(|&y| gain * y).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn llr_examples() {
        assert_eq!(compute_llr(&[1.0], 1.0, 1.0).unwrap(), vec![2.0]);
        assert_eq!(compute_llr(&[0.0], 1.0, 1.0).unwrap(), vec![0.0]);
        assert!(compute_llr(&[1.0f64], 0.0, 1.0).is_err());
    }

    #[test]
    fn llr_scales_inversely_with_sigma2() {
        let y = [0.3f64, -1.1, 0.05];
        let a = compute_llr(&y, 2.0, 0.5).unwrap();
        let b = compute_llr(&y, 2.0, 1.5).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert!((x / 3.0 - z).abs() < 1e-12);
        }
    }

    #[test]
    fn mmse_examples() {
        assert_eq!(mmse_denoise(&[0.7], 1.0, 0.0).values(), &[0.7]);
        assert_eq!(mmse_denoise(&[2.0], 1.0, 1.0).values(), &[1.0]);
        let r: f64 = mmse_denoise(&[5.0], 1.0, 1e300).values()[0];
        assert!(r.abs() < 1e-290);
        assert_eq!(mmse_denoise(&[5.0, 1.0], 0.0, 1.0).values(), &[0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn shrinkage_monotone_in_sigma2(y in -10.0f64..10.0, m in 0.01f64..5.0,
                                        s in 0.0f64..10.0, ds in 0.0f64..10.0) {
            let a = mmse_denoise(&[y], m, s).values()[0].abs();
            let b = mmse_denoise(&[y], m, s + ds).values()[0].abs();
            prop_assert!(b <= a);
        }
    }
}

use super::power::PowerPlan;
use super::Complex;
use crate::codec::ResidualVector;
use crate::error::{invalid, Result};
use crate::scalar::{lit, Scalar};

/// A transmitted block of complex baseband symbols and the side information
/// the receiver needs to split and undo it.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolFrame<T> {
    pub symbols: Vec<Complex<T>>,
    /// Symbols whose I component carries a BPSK coded bit.
    pub n_digital: usize,
    /// Symbols whose Q component carries a scaled residual.
    pub n_analog: usize,
    /// Residual normalization factor.
    pub m: T,
    pub plan: PowerPlan<T>,
}

impl<T: Scalar> SymbolFrame<T> {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Mean of |x|² over the whole frame, accumulated in `f64`.
    pub fn mean_power(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols
            .iter()
            .map(|x| x.norm_sqr().to_f64_lossy())
            .sum::<f64>()
            / self.symbols.len() as f64
    }
}

/// `m = sqrt(M · P_a / Σ λ_j)`; zero when `P_a` is zero or every residual is
/// zero (the analog stream is then empty).
pub fn normalization_factor<T: Scalar>(residuals: &ResidualVector<T>, p_a: T) -> Result<T> {
    if !(p_a >= T::zero()) {
        return Err(invalid("p_a", "must be non-negative"));
    }
    let total = residuals.total_power();
    if p_a == T::zero() || total == T::zero() {
        return Ok(T::zero());
    }
    let m = lit::<T>(residuals.len() as f64);
    Ok((m * p_a / total).sqrt())
}

/// `x_i = √P_d · b_i + j · m · r_i` with BPSK `b_i = +1` for bit 0 and `−1`
/// for bit 1. The shorter stream is zero-padded to the longer one.
pub fn modulate_hybrid<T: Scalar>(
    coded_bits: &[u8],
    residuals: &ResidualVector<T>,
    plan: &PowerPlan<T>,
) -> Result<SymbolFrame<T>> {
    let m = normalization_factor(residuals, plan.p_a)?;
    let n_digital = coded_bits.len();
    let n_analog = if m == T::zero() { 0 } else { residuals.len() };
    let len = n_digital.max(n_analog);
    let amp = plan.p_d.sqrt();
    let mut symbols = vec![Complex::new(T::zero(), T::zero()); len];
    for (x, &b) in symbols.iter_mut().zip(coded_bits) {
        x.re = if b == 0 { amp } else { -amp };
    }
    for (x, &r) in symbols.iter_mut().zip(&residuals.values()[..n_analog]) {
        x.im = m * r;
    }
    Ok(SymbolFrame {
        symbols,
        n_digital,
        n_analog,
        m,
        plan: *plan,
    })
}

/// Pure analog mapping of `values` at mean symbol power `p_t`: one value per
/// I component, or two per symbol (I then Q) when `pack_iq` is set. Returns
/// the frame; its `m` is the scale applied to every value.
pub fn modulate_analog<T: Scalar>(values: &[T], p_t: T, pack_iq: bool) -> Result<SymbolFrame<T>> {
    if !(p_t > T::zero()) {
        return Err(invalid("p_t", "must be positive"));
    }
    let residuals = ResidualVector::from_values(values.to_vec());
    // Packing two values per symbol halves the power each component may use.
    let per_component = if pack_iq { p_t / lit(2.0) } else { p_t };
    let m = normalization_factor(&residuals, per_component)?;
    let len = if pack_iq {
        values.len().div_ceil(2)
    } else {
        values.len()
    };
    let mut symbols = vec![Complex::new(T::zero(), T::zero()); len];
    if pack_iq {
        for (x, pair) in symbols.iter_mut().zip(values.chunks(2)) {
            x.re = m * pair[0];
            if let Some(&q) = pair.get(1) {
                x.im = m * q;
            }
        }
    } else {
        for (x, &v) in symbols.iter_mut().zip(values) {
            x.re = m * v;
        }
    }
    Ok(SymbolFrame {
        symbols,
        n_digital: 0,
        n_analog: if m == T::zero() { 0 } else { len },
        m,
        plan: PowerPlan::analog_only(p_t),
    })
}

/// Digital constellations for the digital-only baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modulation {
    Bpsk,
    /// Gray-mapped 4-QAM: first bit on I, second on Q.
    Qam4,
}

impl Modulation {
    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Modulation::Bpsk),
            4 => Ok(Modulation::Qam4),
            _ => Err(invalid("order", format!("unsupported constellation order {order}"))),
        }
    }

    pub fn order(self) -> u32 {
        match self {
            Modulation::Bpsk => 2,
            Modulation::Qam4 => 4,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Bpsk => 1,
            Modulation::Qam4 => 2,
        }
    }

    pub fn symbols_for(self, bits: usize) -> usize {
        bits.div_ceil(self.bits_per_symbol())
    }
}

#[inline]
fn antipodal<T: Scalar>(bit: u8, amp: T) -> T {
    if bit == 0 {
        amp
    } else {
        -amp
    }
}

/// Maps 0/1 bits at mean symbol power `p`. An odd trailing bit under 4-QAM is
/// padded with a zero bit on Q.
pub fn qam_modulate<T: Scalar>(bits: &[u8], modulation: Modulation, p: T) -> Vec<Complex<T>> {
    match modulation {
        Modulation::Bpsk => {
            let amp = p.sqrt();
            bits.iter()
                .map(|&b| Complex::new(antipodal(b, amp), T::zero()))
                .collect()
        }
        Modulation::Qam4 => {
            let amp = (p / lit(2.0)).sqrt();
            bits.chunks(2)
                .map(|pair| {
                    Complex::new(
                        antipodal(pair[0], amp),
                        antipodal(pair.get(1).copied().unwrap_or(0), amp),
                    )
                })
                .collect()
        }
    }
}

/// Per-bit LLRs (`2·a·y/σ²` per axis, positive favours bit 0) for the first
/// `n_bits` bits carried by `received`. With `sigma2 == 0` the LLRs are hard
/// ±1 decisions.
pub fn qam_llr<T: Scalar>(
    received: &[Complex<T>],
    modulation: Modulation,
    p: T,
    sigma2: T,
    n_bits: usize,
) -> Vec<T> {
    let amp = match modulation {
        Modulation::Bpsk => p.sqrt(),
        Modulation::Qam4 => (p / lit(2.0)).sqrt(),
    };
    let axis = |y: T| super::receiver::axis_llr(y, amp, sigma2);
    let mut out: Vec<T> = match modulation {
        Modulation::Bpsk => received.iter().map(|y| axis(y.re)).collect(),
        Modulation::Qam4 => received
            .iter()
            .flat_map(|y| [axis(y.re), axis(y.im)])
            .collect(),
    };
    out.truncate(n_bits);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::plan_power;
    use proptest::prelude::*;

    fn rv(v: &[f64]) -> ResidualVector<f64> {
        ResidualVector::from_values(v.to_vec())
    }

    #[test]
    fn normalization_examples() {
        let m = normalization_factor(&rv(&[1.0, -1.0, 1.0, 1.0]), 2.0).unwrap();
        assert!((m - 2f64.sqrt()).abs() < 1e-15);
        let unit = rv(&[1.0, -1.0, 1.0, -1.0]);
        assert_eq!(normalization_factor(&unit, 1.0).unwrap(), 1.0);
        assert_eq!(normalization_factor(&unit, 0.0).unwrap(), 0.0);
        assert_eq!(normalization_factor(&rv(&[0.0, 0.0]), 3.0).unwrap(), 0.0);
        assert!(normalization_factor(&unit, -1.0).is_err());
    }

    #[test]
    fn single_symbol_example() {
        // P_t = 2, P_th = 1 → P_d = 1, P_a = 1; m = sqrt(1·1/0.25) = 2.
        let plan = plan_power(2.0, 1.0, 1.0).unwrap();
        let frame = modulate_hybrid(&[0], &rv(&[0.5]), &plan).unwrap();
        assert_eq!(frame.m, 2.0);
        assert_eq!(frame.symbols, vec![Complex::new(1.0, 1.0)]);
    }

    #[test]
    fn zero_digital_power_leaves_i_empty() {
        let plan = plan_power(1.0, 1.0, 3.1623).unwrap();
        let frame = modulate_hybrid(&[0, 1, 1], &rv(&[0.3, -0.1, 0.2]), &plan).unwrap();
        assert!(frame.symbols.iter().all(|x| x.re == 0.0));
    }

    #[test]
    fn shorter_stream_is_padded() {
        let plan = plan_power(2.0, 1.0, 1.0).unwrap();
        let frame = modulate_hybrid(&[0, 1, 0, 1, 1, 0], &rv(&[0.1, 0.2, -0.3, 0.4]), &plan).unwrap();
        assert_eq!(frame.len(), 6);
        assert_eq!((frame.n_digital, frame.n_analog), (6, 4));
        assert_eq!(frame.symbols[4].im, 0.0);
        assert_eq!(frame.symbols[5].im, 0.0);

        let frame = modulate_hybrid(&[1, 1], &rv(&[0.1, 0.2, -0.3, 0.4]), &plan).unwrap();
        assert_eq!(frame.len(), 4);
        assert_eq!(frame.symbols[3].re, 0.0);
    }

    #[test]
    fn bpsk_and_qam_maps() {
        assert_eq!(
            qam_modulate(&[0, 1], Modulation::Bpsk, 1.0),
            vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]
        );
        assert_eq!(
            qam_modulate(&[0, 0], Modulation::Qam4, 2.0),
            vec![Complex::new(1.0, 1.0)]
        );
        assert_eq!(
            qam_modulate(&[1, 0, 0, 1], Modulation::Qam4, 2.0),
            vec![Complex::new(-1.0, 1.0), Complex::new(1.0, -1.0)]
        );
        assert!(Modulation::from_order(8).is_err());
        assert_eq!(Modulation::Qam4.symbols_for(10), Modulation::Bpsk.symbols_for(10) / 2);
    }

    #[test]
    fn analog_mapping_power() {
        let v = [0.5, -1.0, 2.0, 0.25, -0.75];
        let frame = modulate_analog(&v, 3.0f64, false).unwrap();
        assert_eq!(frame.len(), 5);
        assert!((frame.mean_power() - 3.0).abs() < 1e-12);
        assert!(frame.symbols.iter().all(|x| x.im == 0.0));
        let packed = modulate_analog(&v[..4], 3.0f64, true).unwrap();
        assert_eq!(packed.len(), 2);
        assert!((packed.mean_power() - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn qam_roundtrip_noiseless(bits in proptest::collection::vec(0u8..2, 0..300)) {
            for modulation in [Modulation::Bpsk, Modulation::Qam4] {
                let syms = qam_modulate(&bits, modulation, 1.7f64);
                let llrs = qam_llr(&syms, modulation, 1.7, 0.0, bits.len());
                let hard: Vec<u8> = llrs.iter().map(|&l| u8::from(l < 0.0)).collect();
                prop_assert_eq!(&hard, &bits);
                let soft = qam_llr(&syms, modulation, 1.7, 0.3, bits.len());
                let hard: Vec<u8> = soft.iter().map(|&l| u8::from(l < 0.0)).collect();
                prop_assert_eq!(&hard, &bits);
            }
        }

        #[test]
        fn full_frame_power_is_total(
            r in proptest::collection::vec(-3.0f64..3.0, 1..400),
            seed in any::<u64>(),
            p_t in 0.1f64..20.0,
            n_0 in 0.01f64..5.0,
        ) {
            prop_assume!(r.iter().any(|&x| x != 0.0));
            let plan = plan_power(p_t, n_0, 3.1623).unwrap();
            let bits: Vec<u8> = (0..r.len()).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
            let frame = modulate_hybrid(&bits, &rv(&r), &plan).unwrap();
            let rel = (frame.mean_power() - p_t).abs() / p_t;
            prop_assert!(rel < 1e-12, "relative error {}", rel);
            let q: f64 = frame.symbols.iter().map(|x| x.im * x.im).sum::<f64>() / r.len() as f64;
            prop_assert!((q - plan.p_a).abs() <= 1e-12 * p_t);
        }
    }
}

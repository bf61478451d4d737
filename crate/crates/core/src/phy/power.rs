use crate::error::{invalid, Result};
use crate::scalar::Scalar;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Split of the symbol power budget between the BPSK stream (`p_d`) and the
/// analog residual stream (`p_a`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerPlan<T> {
    pub p_t: T,
    pub n_0: T,
    /// Required SNR, linear.
    pub gamma_0: T,
    /// Power the digital stream needs: `n_0 · gamma_0`.
    pub p_th: T,
    pub p_d: T,
    pub p_a: T,
}

/// `P_th = N_0·γ₀`; the digital stream gets `P_th` when it fits in `P_t`
/// (boundary inclusive) and nothing otherwise; the analog stream gets the rest.
pub fn plan_power<T: Scalar>(p_t: T, n_0: T, gamma_0: T) -> Result<PowerPlan<T>> {
    for (name, v) in [("p_t", p_t), ("n_0", n_0), ("gamma_0", gamma_0)] {
        if !(v > T::zero() && v.is_finite()) {
            return Err(invalid(name, format!("must be finite and positive, got {v}")));
        }
    }
    let p_th = n_0 * gamma_0;
    let p_d = if p_th <= p_t { p_th } else { T::zero() };
    Ok(PowerPlan {
        p_t,
        n_0,
        gamma_0,
        p_th,
        p_d,
        p_a: p_t - p_d,
    })
}

impl<T: Scalar> PowerPlan<T> {
    /// Plan with the whole budget on the analog stream.
    pub fn analog_only(p_t: T) -> Self {
        Self {
            p_t,
            n_0: T::zero(),
            gamma_0: T::zero(),
            p_th: T::infinity(),
            p_d: T::zero(),
            p_a: p_t,
        }
    }

    /// Plan with the whole budget on the digital stream.
    pub fn digital_only(p_t: T) -> Self {
        Self {
            p_t,
            n_0: T::zero(),
            gamma_0: T::zero(),
            p_th: p_t,
            p_d: p_t,
            p_a: T::zero(),
        }
    }

    pub fn gamma_0_db(&self) -> f64 {
        linear_to_db(self.gamma_0.to_f64_lossy())
    }
}

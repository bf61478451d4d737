//! Uniform quantization, entropy coding of the quantization levels, step-size
//! search against a bit budget, and the residual left for the analog path.

mod cabac;
pub mod container;

pub use container::{Bitstream, DecodeFailure};

use crate::error::{invalid, Error, Result};
use crate::model::ParameterVector;
use crate::scalar::Scalar;

/// Number of candidates in the step-size grid.
pub const GRID_SIZE: usize = 32;
/// The finest grid step is `max|w| / 2^GRID_FINEST_SHIFT`.
pub const GRID_FINEST_SHIFT: i32 = 15;

/// Integer levels on the grid `{k · delta}`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedPayload {
    pub delta: f32,
    pub levels: Vec<i32>,
}

impl QuantizedPayload {
    pub fn count(&self) -> usize {
        self.levels.len()
    }
}

/// `levels[i] = round(w[i] / delta)`, ties away from zero.
pub fn quantize<T: Scalar>(w: &ParameterVector<T>, delta: f32) -> Result<QuantizedPayload> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must be finite and positive, got {delta}")));
    }
    let step = T::from_f32(delta).ok_or_else(|| invalid("delta", "not representable"))?;
    let limit = T::from_i32(i32::MAX).expect("i32 range");
    let levels = w
        .values()
        .iter()
        .enumerate()
        .map(|(index, &v)| {
            // Float::round rounds half away from zero.
            let q = (v / step).round();
            if !q.is_finite() || q.abs() > limit {
                return Err(Error::LevelOverflow { index });
            }
            Ok(q.to_i32().expect("checked range"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedPayload { delta, levels })
}

/// `w̄[i] = levels[i] · delta` as an unstructured vector.
pub fn dequantize<T: Scalar>(q: &QuantizedPayload) -> ParameterVector<T> {
    let step = T::from_f32(q.delta).expect("f32 fits every scalar");
    ParameterVector::from_flat(
        q.levels
            .iter()
            .map(|&l| T::from_i32(l).expect("i32 fits every scalar") * step)
            .collect(),
    )
}

pub fn entropy_encode(q: &QuantizedPayload) -> Bitstream {
    let count = u32::try_from(q.levels.len()).expect("level count fits in u32");
    let payload = cabac::encode_levels(&q.levels);
    container::assemble(q.delta, count, &payload)
}

/// Recovers the payload, or reports why the stream is unusable. Checksum
/// failures are detected before any arithmetic decoding happens.
pub fn entropy_decode(b: &Bitstream) -> std::result::Result<QuantizedPayload, DecodeFailure> {
    let parsed = container::parse(b.bytes())?;
    let levels =
        cabac::decode_levels(parsed.payload, parsed.count as usize).ok_or(DecodeFailure::Payload)?;
    Ok(QuantizedPayload {
        delta: parsed.delta,
        levels,
    })
}

/// Outcome of the step-size search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSelection {
    pub delta: f32,
    /// Encoded container size at `delta`, in bits.
    pub encoded_bits: usize,
    /// Set when even the coarsest grid step exceeds the budget.
    pub budget_miss: bool,
}

/// Candidate steps `Δ₀ · 2^k`, `k = 0..GRID_SIZE`, with
/// `Δ₀ = max|w| / 2^15` rounded to `f32`. An all-zero vector uses `Δ₀ = 1`.
pub fn step_grid<T: Scalar>(w: &ParameterVector<T>) -> Result<Vec<f32>> {
    if w.values().iter().any(|v| !v.is_finite()) {
        return Err(invalid("w", "contains non-finite values"));
    }
    let max_abs = w.max_abs().to_f64_lossy();
    let mut base = (max_abs / f64::from(1u32 << GRID_FINEST_SHIFT)) as f32;
    if !(base > 0.0 && base.is_finite()) {
        base = 1.0;
    }
    Ok((0..GRID_SIZE as i32)
        .map(|k| base * 2f32.powi(k))
        .take_while(|d| d.is_finite())
        .collect())
}

/// Smallest grid step whose encoded container fits in `bit_budget` bits.
/// Every candidate is encoded; rate monotonicity is not assumed.
pub fn select_step_size<T: Scalar>(w: &ParameterVector<T>, bit_budget: usize) -> Result<StepSelection> {
    if bit_budget <= container::OVERHEAD_BITS {
        return Err(invalid(
            "bit_budget",
            format!(
                "{bit_budget} bits does not exceed the {} bit container overhead",
                container::OVERHEAD_BITS
            ),
        ));
    }
    let grid = step_grid(w)?;
    let mut last = None;
    for &delta in &grid {
        let bits = entropy_encode(&quantize(w, delta)?).bit_len();
        if bits <= bit_budget {
            return Ok(StepSelection {
                delta,
                encoded_bits: bits,
                budget_miss: false,
            });
        }
        last = Some((delta, bits));
    }
    let (delta, bits) = last.expect("grid is never empty");
    Ok(StepSelection {
        delta,
        encoded_bits: bits,
        budget_miss: true,
    })
}

/// `r = w − w̄` with per-element power `λ = r²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ResidualVector<T> {
    pub fn from_values(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn powers(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().map(|&r| r * r)
    }

    pub fn total_power(&self) -> T {
        self.powers().sum()
    }
}

pub fn residual<T: Scalar>(
    w: &ParameterVector<T>,
    w_bar: &ParameterVector<T>,
) -> Result<ResidualVector<T>> {
    if w.len() != w_bar.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            actual: w_bar.len(),
        });
    }
    Ok(ResidualVector {
        values: w
            .values()
            .iter()
            .zip(w_bar.values())
            .map(|(&a, &b)| a - b)
            .collect(),
    })
}

//! Rate-1/2 terminated convolutional code with soft-decision Viterbi
//! decoding.
//!
//! LLR sign convention: a positive LLR means coded bit 0 is more likely.

use crate::codec::container;
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Generator pair and constraint length. Generators are written with the
/// most significant bit tapping the current input (octal convention).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvCodeSpec {
    pub constraint_length: u32,
    pub generators: [u32; 2],
}

impl Default for ConvCodeSpec {
    fn default() -> Self {
        Self {
            constraint_length: 8,
            generators: [0o247, 0o371],
        }
    }
}

impl ConvCodeSpec {
    pub fn new(constraint_length: u32, generators: [u32; 2]) -> Result<Self> {
        if !(2..=16).contains(&constraint_length) {
            return Err(invalid("constraint_length", "must lie in 2..=16"));
        }
        let limit = 1u32 << constraint_length;
        if generators.iter().any(|&g| g == 0 || g >= limit) {
            return Err(invalid(
                "generators",
                format!("each must be non-zero and below 2^{constraint_length}"),
            ));
        }
        Ok(Self {
            constraint_length,
            generators,
        })
    }

    pub fn memory(&self) -> usize {
        self.constraint_length as usize - 1
    }

    fn num_states(&self) -> usize {
        1 << self.memory()
    }

    /// Coded length for `n` information bits, including the zero tail.
    pub fn coded_len(&self, n: usize) -> usize {
        2 * (n + self.memory())
    }

    /// Largest information length whose coded form fits in `coded_bits`.
    pub fn max_info_len(&self, coded_bits: usize) -> usize {
        (coded_bits / 2).saturating_sub(self.memory())
    }

    /// Output pair for shift-register contents `reg` (newest bit at the top).
    #[inline]
    fn outputs(&self, reg: u32) -> (u8, u8) {
        (
            ((reg & self.generators[0]).count_ones() & 1) as u8,
            ((reg & self.generators[1]).count_ones() & 1) as u8,
        )
    }
}

/// Encodes `bits` (one 0/1 per `u8`) and appends K−1 zero tail bits so the
/// trellis ends in the all-zero state.
pub fn conv_encode(spec: &ConvCodeSpec, bits: &[u8]) -> Vec<u8> {
    let mem = spec.memory();
    let mut out = Vec::with_capacity(spec.coded_len(bits.len()));
    let mut state = 0u32;
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, mem)) {
        let reg = (u32::from(b & 1) << mem) | state;
        let (c0, c1) = spec.outputs(reg);
        out.push(c0);
        out.push(c1);
        state = reg >> 1;
    }
    out
}

/// Soft-decision Viterbi decoding over the terminated trellis. Returns the
/// information bits (tail removed). Metric ties keep the lower-indexed
/// predecessor.
pub fn viterbi_decode<T: Scalar>(spec: &ConvCodeSpec, llrs: &[T]) -> Result<Vec<u8>> {
    let mem = spec.memory();
    if !llrs.len().is_multiple_of(2) || llrs.len() < 2 * mem {
        return Err(invalid(
            "llrs",
            format!(
                "length {} must be even and at least {}",
                llrs.len(),
                2 * mem
            ),
        ));
    }
    let steps = llrs.len() / 2;
    let n_states = spec.num_states();
    let words = n_states.div_ceil(64);

    // Branch outputs for (state, input) pairs, precomputed.
    let branch: Vec<(u8, u8)> = (0..n_states as u32)
        .flat_map(|s| (0..2u32).map(move |b| (s, b)))
        .map(|(s, b)| spec.outputs((b << mem) | s))
        .collect();

    let mut metric = vec![T::neg_infinity(); n_states];
    metric[0] = T::zero();
    let mut next = vec![T::neg_infinity(); n_states];
    // One decision bit per state per step: which predecessor survived.
    let mut decisions = vec![0u64; steps * words];
    let half = n_states / 2;

    for t in 0..steps {
        let (l0, l1) = (llrs[2 * t], llrs[2 * t + 1]);
        let bm = |c: (u8, u8)| -> T {
            let a = if c.0 == 0 { l0 } else { -l0 };
            let b = if c.1 == 0 { l1 } else { -l1 };
            a + b
        };
        let dec = &mut decisions[t * words..(t + 1) * words];
        let mut best = T::neg_infinity();
        for (ns, slot) in next.iter_mut().enumerate() {
            // ns = (input << (mem-1)) | (s >> 1); predecessors s = 2·(ns mod half) + x.
            let input = ns / half;
            let base = (ns % half) * 2;
            let m0 = metric[base] + bm(branch[base * 2 + input]);
            let m1 = metric[base + 1] + bm(branch[(base + 1) * 2 + input]);
            let (m, pick) = if m1 > m0 { (m1, 1u64) } else { (m0, 0u64) };
            *slot = m;
            dec[ns / 64] |= pick << (ns % 64);
            if m > best {
                best = m;
            }
        }
        if best.is_finite() {
            for m in next.iter_mut() {
                *m -= best;
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }

    // Trace back from the zero state.
    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for t in (0..steps).rev() {
        let dec = &decisions[t * words..(t + 1) * words];
        let pick = ((dec[state / 64] >> (state % 64)) & 1) as usize;
        bits[t] = (state / half) as u8;
        state = (state % half) * 2 + pick;
    }
    bits.truncate(steps - mem);
    Ok(bits)
}

/// Integrity check of a received container given as 0/1 bits.
pub fn checksum_verify(bits: &[u8]) -> bool {
    if bits.is_empty() || !bits.len().is_multiple_of(8) {
        return false;
    }
    container::checksum_ok(container::Bitstream::from_bits(bits).bytes())
}

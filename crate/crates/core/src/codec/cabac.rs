//! Context-adaptive binary arithmetic coding of signed integer levels.
//!
//! Binarization per level:
//! * significance flag (`level != 0`), context chosen by the magnitude class
//!   of the previous level;
//! * sign flag, one adaptive context;
//! * unary "greater than k" flags for k = 1..=[`GT_FLAGS`], one context per k;
//! * remainder above [`GT_FLAGS`] as order-0 exp-Golomb in bypass bins.
//!
//! The arithmetic engine is a carry-propagating 32-bit range coder with
//! 11-bit probabilities adapted by a shift of 5.

const PROB_BITS: u32 = 11;
const PROB_ONE: u16 = 1 << PROB_BITS;
const PROB_INIT: u16 = PROB_ONE / 2;
const ADAPT_SHIFT: u32 = 5;
const TOP: u32 = 1 << 24;

pub(crate) const GT_FLAGS: u32 = 14;
const SIG_CTXS: usize = 3;
/// Longest exp-Golomb prefix the decoder accepts.
const MAX_EG_PREFIX: u32 = 32;

pub(crate) struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
    first: bool,
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
            first: true,
        }
    }

    fn emit(&mut self, byte: u8) {
        // The very first byte is always the initial zero cache; drop it.
        if self.first {
            self.first = false;
        } else {
            self.out.push(byte);
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.emit(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = ((self.low as u32) << 8) as u64;
    }

    fn normalize(&mut self) {
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    pub fn encode_bit(&mut self, prob: &mut u16, bit: bool) {
        let bound = (self.range >> PROB_BITS) * u32::from(*prob);
        if !bit {
            self.range = bound;
            *prob += (PROB_ONE - *prob) >> ADAPT_SHIFT;
        } else {
            self.low += u64::from(bound);
            self.range -= bound;
            *prob -= *prob >> ADAPT_SHIFT;
        }
        self.normalize();
    }

    pub fn encode_bypass(&mut self, bit: bool) {
        self.range >>= 1;
        if bit {
            self.low += u64::from(self.range);
        }
        self.normalize();
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub(crate) struct RangeDecoder<'a> {
    range: u32,
    code: u32,
    input: &'a [u8],
    pos: usize,
    overrun: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> Self {
        let mut dec = Self {
            range: u32::MAX,
            code: 0,
            input,
            pos: 0,
            overrun: 0,
        };
        for _ in 0..4 {
            dec.code = (dec.code << 8) | u32::from(dec.next_byte());
        }
        dec
    }

    fn next_byte(&mut self) -> u8 {
        match self.input.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                b
            }
            None => {
                self.overrun += 1;
                0
            }
        }
    }

    fn normalize(&mut self) {
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | u32::from(self.next_byte());
        }
    }

    pub fn decode_bit(&mut self, prob: &mut u16) -> bool {
        let bound = (self.range >> PROB_BITS) * u32::from(*prob);
        let bit = if self.code < bound {
            self.range = bound;
            *prob += (PROB_ONE - *prob) >> ADAPT_SHIFT;
            false
        } else {
            self.code -= bound;
            self.range -= bound;
            *prob -= *prob >> ADAPT_SHIFT;
            true
        };
        self.normalize();
        bit
    }

    pub fn decode_bypass(&mut self) -> bool {
        self.range >>= 1;
        let bit = self.code >= self.range;
        if bit {
            self.code -= self.range;
        }
        self.normalize();
        bit
    }

    /// True when the decoder read past the end of its input.
    pub fn overran(&self) -> bool {
        self.overrun > 0
    }
}

struct Contexts {
    sig: [u16; SIG_CTXS],
    sign: u16,
    gt: [u16; GT_FLAGS as usize],
}

impl Contexts {
    fn new() -> Self {
        Self {
            sig: [PROB_INIT; SIG_CTXS],
            sign: PROB_INIT,
            gt: [PROB_INIT; GT_FLAGS as usize],
        }
    }
}

#[inline]
fn sig_ctx(prev_abs: u32) -> usize {
    prev_abs.min(SIG_CTXS as u32 - 1) as usize
}

pub(crate) fn encode_levels(levels: &[i32]) -> Vec<u8> {
    let mut enc = RangeEncoder::new();
    let mut ctx = Contexts::new();
    let mut prev_abs = 0u32;
    for &level in levels {
        let abs = level.unsigned_abs();
        enc.encode_bit(&mut ctx.sig[sig_ctx(prev_abs)], abs != 0);
        if abs != 0 {
            enc.encode_bit(&mut ctx.sign, level < 0);
            let mut k = 1;
            while k <= GT_FLAGS {
                let greater = abs > k;
                enc.encode_bit(&mut ctx.gt[(k - 1) as usize], greater);
                if !greater {
                    break;
                }
                k += 1;
            }
            if abs > GT_FLAGS {
                encode_exp_golomb(&mut enc, u64::from(abs - GT_FLAGS - 1));
            }
        }
        prev_abs = abs;
    }
    enc.finish()
}

fn encode_exp_golomb(enc: &mut RangeEncoder, value: u64) {
    let v = value + 1;
    let n = 63 - v.leading_zeros();
    for _ in 0..n {
        enc.encode_bypass(true);
    }
    enc.encode_bypass(false);
    for i in (0..n).rev() {
        enc.encode_bypass((v >> i) & 1 == 1);
    }
}

fn decode_exp_golomb(dec: &mut RangeDecoder<'_>) -> Option<u64> {
    let mut n = 0;
    while dec.decode_bypass() {
        n += 1;
        if n > MAX_EG_PREFIX {
            return None;
        }
    }
    let mut v = 1u64;
    for _ in 0..n {
        v = (v << 1) | u64::from(dec.decode_bypass());
    }
    Some(v - 1)
}

/// Decodes exactly `count` levels, or `None` on malformed input.
pub(crate) fn decode_levels(payload: &[u8], count: usize) -> Option<Vec<i32>> {
    let mut dec = RangeDecoder::new(payload);
    let mut ctx = Contexts::new();
    let mut levels = Vec::with_capacity(count.min(payload.len().saturating_mul(64)));
    let mut prev_abs = 0u32;
    for _ in 0..count {
        let abs = if dec.decode_bit(&mut ctx.sig[sig_ctx(prev_abs)]) {
            let negative = dec.decode_bit(&mut ctx.sign);
            let mut abs = 1u64;
            while abs <= u64::from(GT_FLAGS) && dec.decode_bit(&mut ctx.gt[(abs - 1) as usize]) {
                abs += 1;
            }
            if abs > u64::from(GT_FLAGS) {
                abs += decode_exp_golomb(&mut dec)?;
            }
            // i32::MIN has no positive counterpart but is still a valid level.
            let limit = if negative { 1u64 << 31 } else { (1u64 << 31) - 1 };
            if abs > limit {
                return None;
            }
            let signed = if negative { -(abs as i64) } else { abs as i64 };
            levels.push(signed as i32);
            abs as u32
        } else {
            levels.push(0);
            0
        };
        prev_abs = abs;
        if dec.overrun > 4 {
            return None;
        }
    }
    if dec.overran() {
        return None;
    }
    Some(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sequence() {
        let bytes = encode_levels(&[]);
        assert_eq!(decode_levels(&bytes, 0), Some(vec![]));
    }

    #[test]
    fn extreme_levels_roundtrip() {
        let levels = vec![i32::MIN, i32::MAX, 0, -1, 1, 15, -15, 16, 1 << 20];
        let bytes = encode_levels(&levels);
        assert_eq!(decode_levels(&bytes, levels.len()), Some(levels));
    }

    #[test]
    fn zeros_compress() {
        let bytes = encode_levels(&vec![0; 1000]);
        assert!(bytes.len() * 8 < 1000, "{} bytes", bytes.len());
    }

    #[test]
    fn bypass_bits_roundtrip() {
        let bits: Vec<bool> = (0..500).map(|i| (i * 7 + i / 3) % 5 < 2).collect();
        let mut enc = RangeEncoder::new();
        let mut p = PROB_INIT;
        for (i, &b) in bits.iter().enumerate() {
            if i % 2 == 0 {
                enc.encode_bypass(b);
            } else {
                enc.encode_bit(&mut p, b);
            }
        }
        let bytes = enc.finish();
        let mut dec = RangeDecoder::new(&bytes);
        let mut p = PROB_INIT;
        for (i, &b) in bits.iter().enumerate() {
            let got = if i % 2 == 0 {
                dec.decode_bypass()
            } else {
                dec.decode_bit(&mut p)
            };
            assert_eq!(got, b, "bit {i}");
        }
        assert!(!dec.overran());
    }

    #[test]
    fn garbage_does_not_panic() {
        for seed in 0u8..50 {
            let junk: Vec<u8> = (0..40u8).map(|i| i.wrapping_mul(37).wrapping_add(seed)).collect();
            let _ = decode_levels(&junk, 300);
        }
    }

    proptest! {
        #[test]
        fn roundtrip(levels in proptest::collection::vec(
            prop_oneof![
                6 => Just(0i32),
                3 => -3i32..=3,
                1 => any::<i32>(),
            ], 0..2000)) {
            let bytes = encode_levels(&levels);
            prop_assert_eq!(decode_levels(&bytes, levels.len()), Some(levels));
        }
    }
}

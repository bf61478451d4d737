//! Byte container for an entropy-coded payload.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FANB"
//! 4       1     version (1)
//! 5       4     delta, IEEE-754 binary32, little-endian
//! 9       4     level count, u32 little-endian
//! 13      n     range-coded payload
//! 13+n    4     CRC-32 of bytes [0, 13+n), little-endian
//! ```
//!
//! The CRC is the reflected 0x04C11DB7 polynomial with initial value and
//! final XOR 0xFFFFFFFF (the common "CRC-32").

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FANB";
pub const VERSION: u8 = 1;
pub const HEADER_BYTES: usize = 13;
pub const CHECKSUM_BYTES: usize = 4;
/// Container overhead in bits: header plus trailing checksum.
pub const OVERHEAD_BITS: usize = 8 * (HEADER_BYTES + CHECKSUM_BYTES);

/// Largest level count the decoder will attempt.
pub const MAX_COUNT: u32 = 1 << 28;

/// Why a received bitstream could not be turned back into levels. Every
/// variant means the same thing to a receiver: skip this update.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DecodeFailure {
    #[error("bitstream shorter than header and checksum")]
    Truncated,
    #[error("checksum mismatch")]
    Checksum,
    #[error("bad magic or version")]
    BadHeader,
    #[error("invalid quantization step in header")]
    BadStep,
    #[error("level count does not match the expected parameter count")]
    CountMismatch,
    #[error("arithmetic decoding failed")]
    Payload,
}

/// Serialized container bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstream {
    bytes: Vec<u8>,
}

impl Bitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self { bytes }
    }

    /// Packs 0/1 bits MSB-first; a trailing partial byte is zero-padded.
    pub fn from_bits(bits: &[u8]) -> Self {
        let bytes = bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i)))
            })
            .collect();
        Self { bytes }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }

    /// Unpacks MSB-first into one `u8` (0 or 1) per bit.
    pub fn to_bits(&self) -> Vec<u8> {
        self.bytes
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
            .collect()
    }
}

pub(crate) fn crc32(data: &[u8]) -> u32 {
    crc32fast::hash(data)
}

pub(crate) fn assemble(delta: f32, count: u32, payload: &[u8]) -> Bitstream {
    let mut bytes = Vec::with_capacity(HEADER_BYTES + payload.len() + CHECKSUM_BYTES);
    bytes.extend_from_slice(&MAGIC);
    bytes.push(VERSION);
    bytes.extend_from_slice(&delta.to_le_bytes());
    bytes.extend_from_slice(&count.to_le_bytes());
    bytes.extend_from_slice(payload);
    let crc = crc32(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    Bitstream { bytes }
}

/// True iff the trailing CRC matches everything before it.
pub fn checksum_ok(bytes: &[u8]) -> bool {
    if bytes.len() < HEADER_BYTES + CHECKSUM_BYTES {
        return false;
    }
    let (body, tail) = bytes.split_at(bytes.len() - CHECKSUM_BYTES);
    let stored = u32::from_le_bytes(tail.try_into().expect("4-byte tail"));
    crc32(body) == stored
}

pub(crate) struct Parsed<'a> {
    pub delta: f32,
    pub count: u32,
    pub payload: &'a [u8],
}

pub(crate) fn parse(bytes: &[u8]) -> Result<Parsed<'_>, DecodeFailure> {
    if bytes.len() < HEADER_BYTES + CHECKSUM_BYTES {
        return Err(DecodeFailure::Truncated);
    }
    if !checksum_ok(bytes) {
        return Err(DecodeFailure::Checksum);
    }
    if bytes[..4] != MAGIC || bytes[4] != VERSION {
        return Err(DecodeFailure::BadHeader);
    }
    let delta = f32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
    if !(delta.is_finite() && delta > 0.0) {
        return Err(DecodeFailure::BadStep);
    }
    let count = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes"));
    if count > MAX_COUNT {
        return Err(DecodeFailure::CountMismatch);
    }
    Ok(Parsed {
        delta,
        count,
        payload: &bytes[HEADER_BYTES..bytes.len() - CHECKSUM_BYTES],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_value() {
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn layout_is_bit_exact() {
        let b = assemble(0.5, 3, &[0xAB, 0xCD]);
        let bytes = b.bytes();
        assert_eq!(&bytes[..4], b"FANB");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &0.5f32.to_le_bytes());
        assert_eq!(&bytes[9..13], &[3, 0, 0, 0]);
        assert_eq!(&bytes[13..15], &[0xAB, 0xCD]);
        assert_eq!(&bytes[15..], &crc32(&bytes[..15]).to_le_bytes());
        assert_eq!(b.bit_len(), 8 * 19);
    }

    #[test]
    fn bits_roundtrip() {
        let b = assemble(1.25, 9, &[1, 2, 3, 250]);
        assert_eq!(Bitstream::from_bits(&b.to_bits()), b);
    }

    #[test]
    fn short_input_is_truncated() {
        assert!(matches!(parse(&[0; 10]), Err(DecodeFailure::Truncated)));
        assert!(!checksum_ok(&[]));
    }
}

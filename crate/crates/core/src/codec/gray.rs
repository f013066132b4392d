//! Reflected binary Gray code and plain binary helpers, MSB first.

use super::{CodecError, Result};

/// Widest symbol accepted by the bit helpers.
pub const MAX_BITS: u32 = 32;

fn check_width(m: u32) -> Result<()> {
    if m == 0 || m > MAX_BITS {
        return Err(CodecError::InvalidConfig(format!("bit width must be in 1..={MAX_BITS}, got {m}")));
    }
    Ok(())
}

/// `m`-bit MSB-first representation of `value`.
pub fn value_to_bits(value: u32, m: u32) -> Result<Vec<bool>> {
    check_width(m)?;
    if m < 32 && value >> m != 0 {
        return Err(CodecError::ValueOutOfRange { value, bits: m });
    }
    Ok((0..m).rev().map(|i| (value >> i) & 1 == 1).collect())
}

pub fn bits_to_value(bits: &[bool]) -> Result<u32> {
    if bits.is_empty() {
        return Err(CodecError::EmptyBits);
    }
    check_width(bits.len() as u32)?;
    Ok(bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
}

/// Gray code word of `value`, i.e. the bits of `v ^ (v >> 1)`.
pub fn gray_encode(value: u32, m: u32) -> Result<Vec<bool>> {
    check_width(m)?;
    if m < 32 && value >> m != 0 {
        return Err(CodecError::ValueOutOfRange { value, bits: m });
    }
    value_to_bits(value ^ (value >> 1), m)
}

/// Decimal value of a Gray code word.
pub fn gray_decode(bits: &[bool]) -> Result<u32> {
    let g = bits_to_value(bits)?;
    let mut v = g;
    let mut shift = g >> 1;
    while shift != 0 {
        v ^= shift;
        shift >>= 1;
    }
    Ok(v)
}

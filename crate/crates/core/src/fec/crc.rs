use crate::error::{Error, Result};

/// Bitwise CRC with zero initial register and no final XOR, processed
/// most-significant bit first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrcSpec {
    pub width: usize,
    /// Generator polynomial without its leading term.
    pub poly: u32,
}

impl CrcSpec {
    /// x^16 + x^12 + x^5 + 1.
    pub const CRC16: CrcSpec = CrcSpec {
        width: 16,
        poly: 0x1021,
    };
    /// x^6 + x^5 + 1.
    pub const CRC6: CrcSpec = CrcSpec {
        width: 6,
        poly: 0x21,
    };
    /// x^11 + x^10 + x^9 + x^5 + 1.
    pub const CRC11: CrcSpec = CrcSpec {
        width: 11,
        poly: 0x621,
    };
    /// The 24-bit polynomial used on the 5G downlink control channel.
    pub const CRC24C: CrcSpec = CrcSpec {
        width: 24,
        poly: 0xB2_B117,
    };
    /// Width zero: no parity, every word checks.
    pub const NONE: CrcSpec = CrcSpec { width: 0, poly: 0 };

    pub fn for_width(width: usize) -> Option<CrcSpec> {
        match width {
            0 => Some(Self::NONE),
            6 => Some(Self::CRC6),
            11 => Some(Self::CRC11),
            16 => Some(Self::CRC16),
            24 => Some(Self::CRC24C),
            _ => None,
        }
    }

    /// CRC register after shifting in `bits`.
    pub fn remainder(&self, bits: &[u8]) -> u32 {
        if self.width == 0 {
            return 0;
        }
        let top = 1u32 << (self.width - 1);
        let mask = if self.width == 32 {
            u32::MAX
        } else {
            (1u32 << self.width) - 1
        };
        let mut reg = 0u32;
        for &bit in bits {
            let feedback = ((reg & top) != 0) ^ (bit != 0);
            reg = (reg << 1) & mask;
            if feedback {
                reg ^= self.poly;
            }
        }
        reg
    }

    /// Appends `width` parity bits to `payload`, checking its length.
    pub fn attach(&self, payload: &[u8], expected_len: usize) -> Result<Vec<u8>> {
        if payload.len() != expected_len {
            return Err(Error::Length {
                what: "CRC payload",
                expected: expected_len,
                found: payload.len(),
            });
        }
        let rem = self.remainder(payload);
        let mut out = Vec::with_capacity(payload.len() + self.width);
        out.extend_from_slice(payload);
        out.extend((0..self.width).rev().map(|i| ((rem >> i) & 1) as u8));
        Ok(out)
    }

    /// True when the trailing `width` bits are the CRC of the leading ones.
    pub fn check(&self, word: &[u8]) -> bool {
        if word.len() < self.width {
            return false;
        }
        // A codeword followed by its CRC leaves a zero register.
        self.remainder(word) == 0
    }
}

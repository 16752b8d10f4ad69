use crate::config::SystemConfig;
use crate::error::{Error, Result};

use super::crc::CrcSpec;
use super::reliability::reliability_sequence;

/// Multiplies `bits` in place by the `log2(len)`-fold Kronecker power of
/// `[[1, 0], [1, 1]]` over GF(2). The transform is its own inverse.
pub fn polar_transform(bits: &mut [u8]) {
    let len = bits.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in bits.chunks_exact_mut(2 * half) {
            let (upper, lower) = block.split_at_mut(half);
            for (u, l) in upper.iter_mut().zip(lower.iter()) {
                *u ^= *l;
            }
        }
        half *= 2;
    }
}

/// A CRC-concatenated polar code without rate matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarCode {
    nc: usize,
    payload_len: usize,
    crc: CrcSpec,
    frozen: Vec<bool>,
    info_positions: Vec<usize>,
}

impl PolarCode {
    /// Code of length `nc` carrying `payload_len` bits plus the CRC, with
    /// information bits on the most reliable channels of the 5G sequence.
    pub fn new(nc: usize, payload_len: usize, crc: CrcSpec) -> Result<Self> {
        let k_info = payload_len + crc.width;
        if !nc.is_power_of_two() || !(2..=super::MAX_CODE_LEN).contains(&nc) {
            return Err(Error::InvalidArgument(format!(
                "unsupported code length {nc}"
            )));
        }
        if k_info > nc {
            return Err(Error::InvalidArgument(format!(
                "{k_info} information bits do not fit a length-{nc} code"
            )));
        }
        let order: Vec<usize> = reliability_sequence()?
            .iter()
            .copied()
            .filter(|&q| q < nc)
            .collect();
        let mut frozen = vec![true; nc];
        for &q in &order[nc - k_info..] {
            frozen[q] = false;
        }
        Self::with_frozen(frozen, payload_len, crc)
    }

    /// Code with an explicit frozen mask.
    pub fn with_frozen(frozen: Vec<bool>, payload_len: usize, crc: CrcSpec) -> Result<Self> {
        let nc = frozen.len();
        if !nc.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "unsupported code length {nc}"
            )));
        }
        let info_positions: Vec<usize> = (0..nc).filter(|&i| !frozen[i]).collect();
        if info_positions.len() != payload_len + crc.width {
            return Err(Error::Length {
                what: "unfrozen positions",
                expected: payload_len + crc.width,
                found: info_positions.len(),
            });
        }
        Ok(PolarCode {
            nc,
            payload_len,
            crc,
            frozen,
            info_positions,
        })
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let crc = CrcSpec::for_width(cfg.r)
            .ok_or_else(|| Error::InvalidArgument(format!("no CRC of width {}", cfg.r)))?;
        Self::new(cfg.nc, cfg.payload_bits(), crc)
    }

    pub fn len(&self) -> usize {
        self.nc
    }

    pub fn is_empty(&self) -> bool {
        self.nc == 0
    }

    /// Information length, payload plus CRC.
    pub fn k_info(&self) -> usize {
        self.info_positions.len()
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn crc(&self) -> CrcSpec {
        self.crc
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// Encodes `k_info` information bits (payload and CRC already joined).
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k_info() {
            return Err(Error::Length {
                what: "polar information bits",
                expected: self.k_info(),
                found: info.len(),
            });
        }
        let mut u = vec![0u8; self.nc];
        for (&pos, &bit) in self.info_positions.iter().zip(info) {
            u[pos] = bit;
        }
        polar_transform(&mut u);
        Ok(u)
    }

    /// Attaches the CRC to `payload` and encodes the result.
    pub fn encode_payload(&self, payload: &[u8]) -> Result<Vec<u8>> {
        let info = self.crc.attach(payload, self.payload_len)?;
        self.encode(&info)
    }
}

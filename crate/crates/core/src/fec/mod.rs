//! Channel coding: CRC, polar encoding, CRC-aided list decoding and QPSK.

mod crc;
mod polar;
mod qpsk;
mod reliability;
mod scl;

pub use crc::CrcSpec;
pub use polar::{polar_transform, PolarCode};
pub use qpsk::{qpsk_hard_demap, qpsk_llr, qpsk_map, qpsk_map_into};
pub use reliability::reliability_sequence;
pub use scl::{SclDecoder, SclOutput};

/// Longest code supported by the shipped reliability sequence.
pub const MAX_CODE_LEN: usize = 1024;

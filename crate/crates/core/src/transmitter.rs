//! Per-user encoding and frame assembly.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelRealization;
use crate::codebooks::CodebookSet;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::fec::{qpsk_map, PolarCode};
use crate::linalg::CMatrix;
use crate::rng::random_bits;

/// A message split into its index part `mp` and data part `md`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UserMessage {
    bits: Vec<u8>,
    bp: usize,
    index: usize,
}

impl UserMessage {
    /// Splits a `b`-bit message after its first `bp` bits.
    pub fn split(bits: Vec<u8>, b: usize, bp: usize) -> Result<Self> {
        if bits.len() != b {
            return Err(Error::Length {
                what: "message",
                expected: b,
                found: bits.len(),
            });
        }
        if bp > b || bp > 32 {
            return Err(Error::InvalidArgument(format!(
                "cannot take {bp} index bits from {b}"
            )));
        }
        let index = bits_to_index(&bits[..bp]);
        Ok(UserMessage { bits, bp, index })
    }

    /// Message with the given index and data bits.
    pub fn from_parts(index: usize, bp: usize, md: &[u8]) -> Self {
        let mut bits = index_to_bits(index, bp);
        bits.extend_from_slice(md);
        UserMessage { bits, bp, index }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn mp(&self) -> &[u8] {
        &self.bits[..self.bp]
    }

    pub fn md(&self) -> &[u8] {
        &self.bits[self.bp..]
    }

    /// Zero-based pilot/pattern column, `dec(mp)`.
    pub fn index(&self) -> usize {
        self.index
    }

    /// One-based pilot/pattern index, `dec(mp) + 1`.
    pub fn ind(&self) -> usize {
        self.index + 1
    }
}

/// Big-endian binary to integer: the first bit is the most significant.
pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter()
        .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize)
}

pub fn index_to_bits(index: usize, width: usize) -> Vec<u8> {
    (0..width).rev().map(|i| ((index >> i) & 1) as u8).collect()
}

/// Draws `cfg.ka` messages uniformly from `{0, 1}^B`.
pub fn draw_messages<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Vec<UserMessage> {
    (0..cfg.ka)
        .map(|_| {
            UserMessage::split(random_bits(rng, cfg.b), cfg.b, cfg.bp).expect("drawn with length b")
        })
        .collect()
}

/// A user's length-`n` transmit signal and its two supports.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub signal: Vec<Complex64>,
    /// Active rows of the pilot part, all below `np'`.
    pub pilot_support: Vec<usize>,
    /// Active rows of the data part as absolute frame rows, all at or above `np'`.
    pub data_support: Vec<usize>,
}

impl TxFrame {
    /// Non-zero rows, pilot part first.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.pilot_support.iter().chain(&self.data_support).copied()
    }

    pub fn energy(&self) -> f64 {
        self.signal.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// The encoding chain shared by all users.
#[derive(Debug, Clone)]
pub struct Transmitter<'a> {
    cfg: &'a SystemConfig,
    codebooks: &'a CodebookSet,
    code: &'a PolarCode,
}

impl<'a> Transmitter<'a> {
    pub fn new(cfg: &'a SystemConfig, codebooks: &'a CodebookSet, code: &'a PolarCode) -> Self {
        Transmitter {
            cfg,
            codebooks,
            code,
        }
    }

    /// CRC, polar encoding and QPSK mapping of the data bits.
    pub fn data_symbols(&self, md: &[u8]) -> Result<Vec<Complex64>> {
        let codeword = self.code.encode_payload(md)?;
        qpsk_map(&codeword, self.cfg.pd)
    }

    /// Places pilot `ind` on pilot pattern `ind` and the modulated codeword
    /// on data pattern `ind`.
    pub fn encode_user(&self, msg: &UserMessage) -> Result<TxFrame> {
        let index = msg.index();
        let n_codewords = self.codebooks.pilot.n_codewords();
        if index >= n_codewords {
            return Err(Error::InvalidArgument(format!(
                "index {index} outside a codebook of {n_codewords}"
            )));
        }
        let symbols = self.data_symbols(msg.md())?;
        Ok(self.assemble(index, &symbols))
    }

    /// Frame for pilot/pattern column `index` carrying `symbols`.
    pub fn assemble(&self, index: usize, symbols: &[Complex64]) -> TxFrame {
        let np_prime = self.cfg.np_prime;
        let mut signal = vec![Complex64::default(); self.cfg.n];
        let pilot_support: Vec<usize> = self
            .codebooks
            .pilot_pattern
            .support(index)
            .iter()
            .map(|&r| r as usize)
            .collect();
        for (k, &r) in pilot_support.iter().enumerate() {
            signal[r] = self.codebooks.pilot.entry(k, index);
        }
        let data_support: Vec<usize> = self
            .codebooks
            .data_pattern
            .support(index)
            .iter()
            .map(|&r| np_prime + r as usize)
            .collect();
        for (&r, &s) in data_support.iter().zip(symbols) {
            signal[r] = s;
        }
        TxFrame {
            signal,
            pilot_support,
            data_support,
        }
    }
}

/// Noiseless received signal `sum_i x_i h_i` (`n x M`).
pub fn superimpose(frames: &[TxFrame], channel: &ChannelRealization) -> Result<CMatrix> {
    let h = channel.matrix();
    if frames.len() != h.nrows() {
        return Err(Error::Dimension(format!(
            "{} frames but {} channel rows",
            frames.len(),
            h.nrows()
        )));
    }
    let n = frames.first().map_or(0, |f| f.signal.len());
    let mut y = CMatrix::zeros(n, h.ncols());
    for (i, frame) in frames.iter().enumerate() {
        if frame.signal.len() != n {
            return Err(Error::Dimension("frames of different lengths".into()));
        }
        for t in frame.support() {
            let x = frame.signal[t];
            for m in 0..h.ncols() {
                y[(t, m)] += x * h[(i, m)];
            }
        }
    }
    Ok(y)
}

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gray QPSK: bit pair `(b0, b1)` maps to `sqrt(pd/2) * ((1-2b0) + j(1-2b1))`.
pub fn qpsk_map(bits: &[u8], pd: f64) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::default(); bits.len() / 2];
    qpsk_map_into(bits, pd, &mut out)?;
    Ok(out)
}

pub fn qpsk_map_into(bits: &[u8], pd: f64, out: &mut [Complex64]) -> Result<()> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "QPSK needs an even number of bits, got {}",
            bits.len()
        )));
    }
    if out.len() != bits.len() / 2 {
        return Err(Error::Length {
            what: "QPSK symbol buffer",
            expected: bits.len() / 2,
            found: out.len(),
        });
    }
    let amp = (pd / 2.0).sqrt();
    for (sym, pair) in out.iter_mut().zip(bits.chunks_exact(2)) {
        *sym = Complex64::new(
            amp * (1.0 - 2.0 * pair[0] as f64),
            amp * (1.0 - 2.0 * pair[1] as f64),
        );
    }
    Ok(())
}

/// Bit LLRs of a QPSK symbol observed as `y = gain * x + w`, `w ~ CN(0, noise_var)`.
/// Positive values favour bit 0.
pub fn qpsk_llr(y: Complex64, gain: f64, noise_var: f64, pd: f64) -> Result<(f64, f64)> {
    if !(gain > 0.0) || !(noise_var > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "QPSK demapping needs positive gain and noise variance, got {gain} and {noise_var}"
        )));
    }
    let scale = 2.0 * (2.0 * pd).sqrt() * gain / noise_var;
    Ok((scale * y.re, scale * y.im))
}

/// Sign slicer, inverse of [`qpsk_map`] on clean symbols.
pub fn qpsk_hard_demap(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8])
        .collect()
}

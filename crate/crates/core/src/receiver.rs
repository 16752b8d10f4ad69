//! Iterative multi-user receiver.
//!
//! Activity detection runs once on the pilot part with generalized
//! orthogonal matching pursuit over the extended pilot codebook. Each
//! decoding iteration then estimates the channels of the remaining detected
//! indices by LMMSE on the residual pilot part, combines the data part by
//! MRC, decodes every user with the CRC-aided list decoder, and cancels the
//! decoded users from the residual. Decoding stops when an iteration
//! produces no valid codeword or after `n_max` iterations.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrixView, RowDVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelRealization, ReceivedFrame};
use crate::codebooks::{row_norm, CodebookSet, ExtendedPilotCodebook};
use crate::config::{SicMode, SystemConfig};
use crate::error::{Error, Result};
use crate::fec::{qpsk_llr, PolarCode, SclDecoder};
use crate::linalg::{energy, ridge_solve, CMatrix, RowMajor};
use crate::metrics::channel_mse;
use crate::transmitter::{index_to_bits, Transmitter, TxFrame, UserMessage};

/// Pilot/pattern indices found by the greedy detector, in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DetectedSet {
    pub indices: Vec<usize>,
    /// Indices dropped because their Gram system could not be factored.
    pub skipped: Vec<usize>,
}

impl DetectedSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    /// Index bits of a detected column.
    pub fn index_bits(index: usize, bp: usize) -> Vec<u8> {
        index_to_bits(index, bp)
    }
}

/// Generalized OMP over `A'`.
///
/// Every iteration scores all columns by the row norms of `A'^H Y_res`,
/// adds the best `ceil((Ka + delta) / n_omp)` unselected ones (lowest index
/// first on ties, at most `Ka + delta` in total), and recomputes the
/// residual against the regularized projection onto all selected columns.
///
/// The residual is never formed: with `X` the regularized coefficients of
/// the selected columns `A_S`, `A'^H Y_res = A'^H Y - (A'^H A_S) X`, and
/// `A'^H Y` and the columns of `A'^H A_S` are each computed once.
pub fn gomp_detect(
    yp: DMatrixView<'_, Complex64>,
    ext: &ExtendedPilotCodebook<'_>,
    cfg: &SystemConfig,
) -> Result<DetectedSet> {
    if yp.nrows() != ext.rows() {
        return Err(Error::Dimension(format!(
            "pilot part has {} rows, codebook {}",
            yp.nrows(),
            ext.rows()
        )));
    }
    let n_codewords = ext.n_codewords();
    let budget = (cfg.ka + cfg.delta).min(n_codewords);
    let batch = cfg.omp_batch();
    let yp = yp.clone_owned();
    let base = ext.correlate(&RowMajor::from_matrix(&yp));
    let mut gram: Vec<RowMajor> = Vec::new();
    let mut coef = CMatrix::zeros(0, yp.ncols());
    let mut taken = vec![false; n_codewords];
    let mut found = DetectedSet::default();

    for _ in 0..cfg.n_omp {
        let want = batch.min(budget - found.indices.len());
        if want == 0 {
            break;
        }
        let scores = residual_scores(&base, &gram, &coef);
        let mut candidates: Vec<usize> = (0..n_codewords).filter(|&i| !taken[i]).collect();
        let rank = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
        let want = want.min(candidates.len());
        if want < candidates.len() {
            candidates.select_nth_unstable_by(want, rank);
            candidates.truncate(want);
        }
        candidates.sort_by(rank);
        for &i in &candidates {
            taken[i] = true;
            gram.push(ext.correlate(&RowMajor::from_matrix(&ext.submatrix(&[i]))));
        }
        found.indices.extend_from_slice(&candidates);

        loop {
            let a = ext.submatrix(&found.indices);
            match ridge_solve(&a, &yp, cfg.n0) {
                Ok(x) => {
                    coef = x;
                    break;
                }
                Err(Error::Singular { .. }) if !found.indices.is_empty() => {
                    let dropped = found.indices.pop().expect("non-empty");
                    gram.pop();
                    log::warn!("dropping index {dropped}: regularized Gram matrix not factorable");
                    found.skipped.push(dropped);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(found)
}

/// Row norms of `base - sum_s gram[s] coef[s, :]`.
fn residual_scores(base: &RowMajor, gram: &[RowMajor], coef: &CMatrix) -> Vec<f64> {
    let m = base.cols();
    let coef: Vec<(Vec<f64>, Vec<f64>)> = (0..gram.len())
        .map(|s| {
            let row = coef.row(s);
            (
                row.iter().map(|c| c.re).collect(),
                row.iter().map(|c| c.im).collect(),
            )
        })
        .collect();
    let mut acc_re = vec![0.0; m];
    let mut acc_im = vec![0.0; m];
    (0..base.rows())
        .map(|i| {
            let (br, bi) = base.row(i);
            acc_re.copy_from_slice(br);
            acc_im.copy_from_slice(bi);
            for (g, (xr, xi)) in gram.iter().zip(&coef) {
                let g = g.get(i, 0);
                for (((sr, si), &x_re), &x_im) in
                    acc_re.iter_mut().zip(acc_im.iter_mut()).zip(xr).zip(xi)
                {
                    *sr -= g.re * x_re - g.im * x_im;
                    *si -= g.re * x_im + g.im * x_re;
                }
            }
            row_norm((&acc_re, &acc_im))
        })
        .collect()
}

/// Detector residual `Y - A (A^H A + N0 I)^{-1} A^H Y` for the selected
/// columns `A`.
pub fn projection_residual(a: &CMatrix, y: &CMatrix, n0: f64) -> Result<CMatrix> {
    let coef = ridge_solve(a, y, n0)?;
    Ok(y - a * coef)
}

/// LMMSE channel estimate `(A^H A + N0 I)^{-1} A^H Y_p` for the selected
/// columns of `A'`.
pub fn lmmse_channel_estimate(
    yp: DMatrixView<'_, Complex64>,
    selected: &CMatrix,
    n0: f64,
) -> Result<CMatrix> {
    ridge_solve(selected, &yp.clone_owned(), n0)
}

/// MRC symbol estimates: active data rows of the residual times `h^H`.
pub fn mrc_estimate(
    yd: DMatrixView<'_, Complex64>,
    support: &[u32],
    h: &RowDVector<Complex64>,
) -> Vec<Complex64> {
    support
        .iter()
        .map(|&r| {
            let row = yd.row(r as usize);
            row.iter().zip(h.iter()).map(|(y, g)| y * g.conj()).sum()
        })
        .collect()
}

/// Interference power per antenna left on a user's active data rows after
/// removing noise and the user's own expected contribution, floored at 0.
pub fn residual_interference(
    yd: DMatrixView<'_, Complex64>,
    support: &[u32],
    h: &RowDVector<Complex64>,
    pd: f64,
    n0: f64,
) -> f64 {
    if support.is_empty() {
        return 0.0;
    }
    let m = yd.ncols() as f64;
    let row_energy: f64 = support
        .iter()
        .map(|&r| yd.row(r as usize).norm_squared())
        .sum::<f64>()
        / support.len() as f64;
    (row_energy / m - n0 - pd * h.norm_squared() / m).max(0.0)
}

/// Result of single-user decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserDecode {
    pub md: Vec<u8>,
    pub pass: bool,
}

/// Decodes MRC outputs as a scalar channel with gain `||h||^2` and noise
/// variance `||h||^2 (N0 + I_res)`.
pub fn decode_user(
    symbols: &[Complex64],
    h: &RowDVector<Complex64>,
    interference: f64,
    cfg: &SystemConfig,
    decoder: &SclDecoder,
) -> Result<UserDecode> {
    if symbols.len() != cfg.nd {
        return Err(Error::Length {
            what: "MRC symbol block",
            expected: cfg.nd,
            found: symbols.len(),
        });
    }
    let gain = h.norm_squared();
    if !(gain > 0.0) || !gain.is_finite() {
        return Ok(UserDecode {
            md: vec![0; cfg.payload_bits()],
            pass: false,
        });
    }
    let noise_var = gain * (cfg.n0 + interference);
    let mut llr = Vec::with_capacity(2 * symbols.len());
    for &s in symbols {
        let (l0, l1) = qpsk_llr(s, gain, noise_var, cfg.pd)?;
        llr.push(l0);
        llr.push(l1);
    }
    let out = decoder.decode(&llr, cfg.n_list);
    Ok(UserDecode {
        md: out.payload,
        pass: out.pass,
    })
}

/// Dense `n x K` matrix of reconstructed frames.
pub fn frames_matrix(frames: &[TxFrame], n: usize) -> CMatrix {
    let mut x = CMatrix::zeros(n, frames.len());
    for (c, f) in frames.iter().enumerate() {
        for t in f.support() {
            x[(t, c)] = f.signal[t];
        }
    }
    x
}

/// Subtracts `X_D H_D` using the supplied (pilot-based) channel rows.
pub fn sic_initial(residual: &mut CMatrix, frames: &[TxFrame], channels: &CMatrix) -> Result<()> {
    if frames.len() != channels.nrows() || channels.ncols() != residual.ncols() {
        return Err(Error::Dimension(format!(
            "{} frames, {}x{} channel rows, {} antennas",
            frames.len(),
            channels.nrows(),
            channels.ncols(),
            residual.ncols()
        )));
    }
    for (i, f) in frames.iter().enumerate() {
        for t in f.support() {
            let x = f.signal[t];
            for m in 0..residual.ncols() {
                residual[(t, m)] -= x * channels[(i, m)];
            }
        }
    }
    Ok(())
}

/// Re-estimates the decoded users' channels from their full reconstructed
/// frames, `(X^H X + N0 I)^{-1} X^H Y`, and subtracts `X H_re`.
pub fn sic_reestimated(residual: &mut CMatrix, frames: &[TxFrame], n0: f64) -> Result<CMatrix> {
    let x = frames_matrix(frames, residual.nrows());
    let h_re = ridge_solve(&x, residual, n0)?;
    *residual -= &x * &h_re;
    Ok(h_re)
}

/// Ground truth used only for diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Genie<'a> {
    pub messages: &'a [UserMessage],
    pub channel: &'a ChannelRealization,
}

/// Diagnostics of one decoding iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Detected indices still pending at the start of the iteration.
    pub detected: usize,
    pub decoded: usize,
    /// Energy of the residual after cancellation.
    pub residual_energy: f64,
    /// Channel MSE of the pilot-based estimates of detected true users.
    pub mse: Option<f64>,
    /// Pilot-based estimates of the users decoded in this iteration.
    pub mse_decoded_initial: Option<f64>,
    /// Data-aided re-estimates of the users decoded in this iteration.
    pub mse_decoded_reest: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeOutput {
    /// Recovered messages, unique, in decoding order.
    pub messages: Vec<Vec<u8>>,
    pub detected: DetectedSet,
    pub iterations: Vec<IterationTrace>,
}

impl DecodeOutput {
    /// Iterations that decoded at least one message. The final iteration
    /// that finds nothing only triggers termination and is not counted.
    pub fn iteration_count(&self) -> usize {
        count_iterations(&self.iterations)
    }
}

/// Number of traced iterations with at least one decoded message.
pub fn count_iterations(trace: &[IterationTrace]) -> usize {
    trace.iter().filter(|t| t.decoded > 0).count()
}

/// The receiver for one system configuration.
#[derive(Debug, Clone)]
pub struct Receiver<'a> {
    cfg: &'a SystemConfig,
    codebooks: &'a CodebookSet,
    tx: Transmitter<'a>,
    decoder: SclDecoder,
}

impl<'a> Receiver<'a> {
    pub fn new(cfg: &'a SystemConfig, codebooks: &'a CodebookSet, code: &'a PolarCode) -> Self {
        Receiver {
            cfg,
            codebooks,
            tx: Transmitter::new(cfg, codebooks, code),
            decoder: SclDecoder::new(code.clone(), cfg.scl_kernel),
        }
    }

    pub fn decoder(&self) -> &SclDecoder {
        &self.decoder
    }

    /// Runs detection and the iterative decoding loop on one frame.
    pub fn decode(&self, frame: &ReceivedFrame, genie: Option<Genie<'_>>) -> Result<DecodeOutput> {
        let cfg = self.cfg;
        let np_prime = cfg.np_prime;
        let ext = self.codebooks.extended();
        if frame.matrix().nrows() != cfg.n || frame.np_prime() != np_prime {
            return Err(Error::Dimension(format!(
                "received {} rows split at {}, expected {} split at {}",
                frame.matrix().nrows(),
                frame.np_prime(),
                cfg.n,
                np_prime
            )));
        }
        let detected = gomp_detect(frame.pilot(), &ext, cfg)?;
        let mut pending = detected.indices.clone();
        let mut residual = frame.matrix().clone();
        let mut messages: Vec<Vec<u8>> = Vec::new();
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        let mut iterations = Vec::new();

        let truth = genie.map(GenieIndex::new);

        for iteration in 1..=cfg.n_max {
            if pending.is_empty() {
                break;
            }
            let a_sel = ext.submatrix(&pending);
            let h_est = lmmse_channel_estimate(residual.rows(0, np_prime), &a_sel, cfg.n0)?;
            let yd = residual.rows(np_prime, cfg.n - np_prime);

            let mut decoded: Vec<(usize, UserMessage)> = Vec::new();
            for (row, &index) in pending.iter().enumerate() {
                let h = h_est.row(row).into_owned();
                let support = self.codebooks.data_pattern.support(index);
                let symbols = mrc_estimate(yd, support, &h);
                let interference = residual_interference(yd, support, &h, cfg.pd, cfg.n0);
                let out = decode_user(&symbols, &h, interference, cfg, &self.decoder)?;
                if out.pass {
                    decoded.push((row, UserMessage::from_parts(index, cfg.bp, &out.md)));
                }
            }

            let mse = truth.as_ref().and_then(|t| {
                let pairs: Vec<(usize, usize)> = pending
                    .iter()
                    .enumerate()
                    .filter_map(|(row, &idx)| t.user_by_index(idx).map(|u| (row, u)))
                    .collect();
                channel_mse(&h_est, t.channel(), &pairs)
            });

            if decoded.is_empty() {
                iterations.push(IterationTrace {
                    iteration,
                    detected: pending.len(),
                    decoded: 0,
                    residual_energy: energy(&residual),
                    mse,
                    mse_decoded_initial: None,
                    mse_decoded_reest: None,
                });
                break;
            }

            let frames: Vec<TxFrame> = decoded
                .iter()
                .map(|(_, m)| self.tx.encode_user(m))
                .collect::<Result<_>>()?;
            let h_dec = CMatrix::from_rows(
                &decoded
                    .iter()
                    .map(|(row, _)| h_est.row(*row))
                    .collect::<Vec<_>>(),
            );

            let (mut mse_initial, mut mse_reest) = (None, None);
            if let Some(t) = truth.as_ref() {
                let pairs: Vec<(usize, usize)> = decoded
                    .iter()
                    .enumerate()
                    .filter_map(|(k, (_, m))| t.user_by_message(m.bits()).map(|u| (k, u)))
                    .collect();
                mse_initial = channel_mse(&h_dec, t.channel(), &pairs);
                let h_re = ridge_solve(&frames_matrix(&frames, cfg.n), &residual, cfg.n0)?;
                mse_reest = channel_mse(&h_re, t.channel(), &pairs);
            }

            match cfg.sic_mode {
                SicMode::InitialEstimates => sic_initial(&mut residual, &frames, &h_dec)?,
                SicMode::DataAidedReestimation => {
                    sic_reestimated(&mut residual, &frames, cfg.n0)?;
                }
            }

            let done: HashSet<usize> = decoded.iter().map(|(row, _)| pending[*row]).collect();
            pending.retain(|i| !done.contains(i));
            for (_, m) in &decoded {
                if seen.insert(m.bits().to_vec()) {
                    messages.push(m.bits().to_vec());
                }
            }
            iterations.push(IterationTrace {
                iteration,
                detected: pending.len() + done.len(),
                decoded: decoded.len(),
                residual_energy: energy(&residual),
                mse,
                mse_decoded_initial: mse_initial,
                mse_decoded_reest: mse_reest,
            });
        }

        Ok(DecodeOutput {
            messages,
            detected,
            iterations,
        })
    }
}

/// Lookup from indices and messages to true users.
struct GenieIndex<'a> {
    by_index: HashMap<usize, usize>,
    by_message: HashMap<&'a [u8], usize>,
    channel: &'a CMatrix,
}

impl<'a> GenieIndex<'a> {
    fn new(genie: Genie<'a>) -> Self {
        let mut by_index = HashMap::new();
        let mut collided = HashSet::new();
        for (u, m) in genie.messages.iter().enumerate() {
            if by_index.insert(m.index(), u).is_some() {
                collided.insert(m.index());
            }
        }
        // A collided index has no single true channel.
        by_index.retain(|idx, _| !collided.contains(idx));
        let mut by_message = HashMap::new();
        for (u, m) in genie.messages.iter().enumerate() {
            by_message.entry(m.bits()).or_insert(u);
        }
        GenieIndex {
            by_index,
            by_message,
            channel: genie.channel.matrix(),
        }
    }

    fn user_by_index(&self, index: usize) -> Option<usize> {
        self.by_index.get(&index).copied()
    }

    fn user_by_message(&self, bits: &[u8]) -> Option<usize> {
        self.by_message.get(bits).copied()
    }

    fn channel(&self) -> &CMatrix {
        self.channel
    }
}

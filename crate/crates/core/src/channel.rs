//! Quasi-static Rayleigh MIMO channel and additive noise.

use nalgebra::DMatrixView;
use num_complex::Complex64;
use rand::Rng;

use crate::linalg::CMatrix;
use crate::rng::complex_gaussian;

/// One channel row per active user, fixed over the whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    h: CMatrix,
}

impl ChannelRealization {
    pub fn new(h: CMatrix) -> Self {
        ChannelRealization { h }
    }

    /// `Ka x M` channel matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }
}

/// I.i.d. `CN(0, 1)` coefficients for `ka` users and `m` antennas.
pub fn draw_channel<R: Rng + ?Sized>(ka: usize, m: usize, rng: &mut R) -> ChannelRealization {
    let mut h = CMatrix::zeros(ka, m);
    for i in 0..ka {
        for j in 0..m {
            h[(i, j)] = complex_gaussian(rng, 1.0);
        }
    }
    ChannelRealization { h }
}

/// Adds i.i.d. `CN(0, n0)` noise; `n0 == 0` returns the input unchanged.
pub fn add_noise<R: Rng + ?Sized>(mut signal: CMatrix, n0: f64, rng: &mut R) -> CMatrix {
    if n0 > 0.0 {
        for v in signal.iter_mut() {
            *v += complex_gaussian(rng, n0);
        }
    }
    signal
}

/// The `n x M` received block and its pilot/data split at `np'`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    y: CMatrix,
    np_prime: usize,
}

impl ReceivedFrame {
    pub fn new(y: CMatrix, np_prime: usize) -> Self {
        assert!(np_prime <= y.nrows());
        ReceivedFrame { y, np_prime }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.y
    }

    pub fn into_matrix(self) -> CMatrix {
        self.y
    }

    pub fn np_prime(&self) -> usize {
        self.np_prime
    }

    /// First `np'` rows.
    pub fn pilot(&self) -> DMatrixView<'_, Complex64> {
        self.y.rows(0, self.np_prime)
    }

    /// Last `n - np'` rows.
    pub fn data(&self) -> DMatrixView<'_, Complex64> {
        self.y.rows(self.np_prime, self.y.nrows() - self.np_prime)
    }
}

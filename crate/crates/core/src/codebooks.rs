//! Pilot codebook, transmission patterns and the extended pilot codebook.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::RowMajor;
use crate::rng::{stream, Domain};

#[derive(Debug, Clone, PartialEq)]
enum PilotStorage {
    /// Rows of the `N`-point DFT matrix, scaled by `scale`.
    Dft {
        rows: Vec<usize>,
        twiddles: Vec<Complex64>,
        scale: f64,
    },
    Dense(DMatrix<Complex64>),
}

/// The common `np x N` pilot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotCodebook {
    np: usize,
    n_codewords: usize,
    storage: PilotStorage,
}

impl PilotCodebook {
    /// Sub-sampled DFT codebook: `np` distinct rows of the `N x N` DFT
    /// matrix drawn uniformly from the seeded stream, columns scaled to norm
    /// `sqrt(np * Pp)`.
    pub fn build(cfg: &SystemConfig) -> Result<Self> {
        let n_codewords = cfg.n_codewords();
        if n_codewords < cfg.np {
            return Err(Error::CodebookTooSmall {
                np: cfg.np,
                n_codewords,
            });
        }
        let mut rng = stream(cfg.seed, Domain::PilotRows, 0);
        let rows = loop {
            let mut rows = index::sample(&mut rng, n_codewords, cfg.np).into_vec();
            // Columns i and i + N/2^t coincide unless some row index is odd.
            if n_codewords <= 2 || rows.iter().any(|r| r % 2 == 1) {
                rows.sort_unstable();
                break rows;
            }
        };
        Ok(Self::from_dft_rows(rows, n_codewords, cfg.pp))
    }

    /// Codebook from explicit DFT row indices.
    pub fn from_dft_rows(rows: Vec<usize>, n_codewords: usize, pp: f64) -> Self {
        assert!(n_codewords.is_power_of_two());
        let twiddles = (0..n_codewords)
            .map(|t| {
                Complex64::from_polar(1.0, -std::f64::consts::TAU * t as f64 / n_codewords as f64)
            })
            .collect();
        PilotCodebook {
            np: rows.len(),
            n_codewords,
            storage: PilotStorage::Dft {
                rows,
                twiddles,
                scale: pp.sqrt(),
            },
        }
    }

    /// Codebook from an explicit `np x N` matrix.
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Self {
        PilotCodebook {
            np: matrix.nrows(),
            n_codewords: matrix.ncols(),
            storage: PilotStorage::Dense(matrix),
        }
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn n_codewords(&self) -> usize {
        self.n_codewords
    }

    /// DFT rows in use, if the codebook is DFT based.
    pub fn dft_rows(&self) -> Option<&[usize]> {
        match &self.storage {
            PilotStorage::Dft { rows, .. } => Some(rows),
            PilotStorage::Dense(_) => None,
        }
    }

    #[inline]
    pub fn entry(&self, k: usize, i: usize) -> Complex64 {
        match &self.storage {
            PilotStorage::Dft {
                rows,
                twiddles,
                scale,
            } => twiddles[(rows[k] * i) & (self.n_codewords - 1)] * *scale,
            PilotStorage::Dense(m) => m[(k, i)],
        }
    }

    pub fn column(&self, i: usize) -> Vec<Complex64> {
        (0..self.np).map(|k| self.entry(k, i)).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.np, self.n_codewords, |k, i| self.entry(k, i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Pilot,
    Data,
}

/// Binary `rows x N` pattern matrix with `weight` ones per column, stored as
/// sorted supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatrix {
    kind: PatternKind,
    rows: usize,
    weight: usize,
    n_codewords: usize,
    supports: Vec<u32>,
}

impl PatternMatrix {
    /// Pattern matrix of the given kind sized from the configuration.
    pub fn build(cfg: &SystemConfig, kind: PatternKind) -> Result<Self> {
        let (rows, weight) = match kind {
            PatternKind::Pilot => (cfg.np_prime, cfg.np),
            PatternKind::Data => (cfg.data_part_len(), cfg.nd),
        };
        Self::random(kind, rows, weight, cfg.n_codewords(), cfg.seed)
    }

    /// Every column's support is drawn uniformly without replacement from a
    /// stream keyed by `(seed, kind)`.
    pub fn random(
        kind: PatternKind,
        rows: usize,
        weight: usize,
        n_codewords: usize,
        seed: u64,
    ) -> Result<Self> {
        if weight > rows {
            return Err(Error::PatternWeight { weight, rows });
        }
        let domain = match kind {
            PatternKind::Pilot => Domain::PilotPattern,
            PatternKind::Data => Domain::DataPattern,
        };
        let mut rng = stream(seed, domain, 0);
        let mut supports = Vec::with_capacity(weight * n_codewords);
        for _ in 0..n_codewords {
            let start = supports.len();
            supports.extend(
                index::sample(&mut rng, rows, weight)
                    .iter()
                    .map(|r| r as u32),
            );
            supports[start..].sort_unstable();
        }
        Ok(PatternMatrix {
            kind,
            rows,
            weight,
            n_codewords,
            supports,
        })
    }

    /// Pattern matrix from a row-major `rows x N` 0/1 mask.
    pub fn from_mask(
        kind: PatternKind,
        rows: usize,
        n_codewords: usize,
        mask: &[u8],
    ) -> Result<Self> {
        if mask.len() != rows * n_codewords {
            return Err(Error::Length {
                what: "pattern mask",
                expected: rows * n_codewords,
                found: mask.len(),
            });
        }
        let mut supports = Vec::new();
        let mut weight = None;
        for col in 0..n_codewords {
            let support: Vec<u32> = (0..rows)
                .filter(|&r| mask[r * n_codewords + col] != 0)
                .map(|r| r as u32)
                .collect();
            let expected = *weight.get_or_insert(support.len());
            if support.len() != expected {
                return Err(Error::PatternSupport {
                    column: col,
                    found: support.len(),
                    expected,
                });
            }
            supports.extend(support);
        }
        Ok(PatternMatrix {
            kind,
            rows,
            weight: weight.unwrap_or(0),
            n_codewords,
            supports,
        })
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    pub fn n_codewords(&self) -> usize {
        self.n_codewords
    }

    /// Active rows of column `col` in increasing order.
    #[inline]
    pub fn support(&self, col: usize) -> &[u32] {
        &self.supports[col * self.weight..(col + 1) * self.weight]
    }

    pub fn is_active(&self, row: usize, col: usize) -> bool {
        self.support(col).binary_search(&(row as u32)).is_ok()
    }

    /// Row-major 0/1 mask.
    pub fn to_mask(&self) -> Vec<u8> {
        let mut mask = vec![0u8; self.rows * self.n_codewords];
        for col in 0..self.n_codewords {
            for &r in self.support(col) {
                mask[r as usize * self.n_codewords + col] = 1;
            }
        }
        mask
    }
}

/// `A'`: column `i` carries column `i` of the pilot matrix on the support of
/// pilot pattern `i` (k-th active row gets the k-th pilot symbol) and zeros
/// elsewhere.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedPilotCodebook<'a> {
    pilot: &'a PilotCodebook,
    pattern: &'a PatternMatrix,
}

impl<'a> ExtendedPilotCodebook<'a> {
    pub fn new(pilot: &'a PilotCodebook, pattern: &'a PatternMatrix) -> Result<Self> {
        if pattern.n_codewords() != pilot.n_codewords() {
            return Err(Error::Dimension(format!(
                "pilot codebook has {} columns, pattern matrix {}",
                pilot.n_codewords(),
                pattern.n_codewords()
            )));
        }
        if pattern.weight() != pilot.np() {
            return Err(Error::PatternSupport {
                column: 0,
                found: pattern.weight(),
                expected: pilot.np(),
            });
        }
        Ok(ExtendedPilotCodebook { pilot, pattern })
    }

    /// Length of the pilot part, `np'`.
    pub fn rows(&self) -> usize {
        self.pattern.rows()
    }

    pub fn n_codewords(&self) -> usize {
        self.pilot.n_codewords()
    }

    pub fn pilot(&self) -> &'a PilotCodebook {
        self.pilot
    }

    pub fn pattern(&self) -> &'a PatternMatrix {
        self.pattern
    }

    pub fn column(&self, i: usize) -> Vec<Complex64> {
        let mut col = vec![Complex64::default(); self.rows()];
        for (k, &r) in self.pattern.support(i).iter().enumerate() {
            col[r as usize] = self.pilot.entry(k, i);
        }
        col
    }

    /// Column `i` restricted to its pattern support, in support order.
    pub fn restrict(&self, i: usize) -> Vec<Complex64> {
        let col = self.column(i);
        self.pattern
            .support(i)
            .iter()
            .map(|&r| col[r as usize])
            .collect()
    }

    /// Dense `np' x |indices|` sub-matrix.
    pub fn submatrix(&self, indices: &[usize]) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.rows(), indices.len());
        for (c, &i) in indices.iter().enumerate() {
            for (k, &r) in self.pattern.support(i).iter().enumerate() {
                out[(r as usize, c)] = self.pilot.entry(k, i);
            }
        }
        out
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let all: Vec<usize> = (0..self.n_codewords()).collect();
        self.submatrix(&all)
    }

    /// `A'^H Y` for an `np' x M` signal, as an `N x M` row-major matrix.
    ///
    /// Only the `np` non-zero entries of each column are visited.
    pub fn correlate(&self, y: &RowMajor) -> RowMajor {
        assert_eq!(y.rows(), self.rows(), "pilot part rows");
        let mut out = RowMajor::zeros(self.n_codewords(), y.cols());
        for i in 0..self.n_codewords() {
            let (acc_re, acc_im) = out.row_mut(i);
            for (k, &r) in self.pattern.support(i).iter().enumerate() {
                let a = self.pilot.entry(k, i);
                let (yr, yi) = y.row(r as usize);
                // conj(a) * y, written with zipped slices so the loop vectorizes.
                for (((sr, si), &y_re), &y_im) in
                    acc_re.iter_mut().zip(acc_im.iter_mut()).zip(yr).zip(yi)
                {
                    *sr += a.re * y_re + a.im * y_im;
                    *si += a.re * y_im - a.im * y_re;
                }
            }
        }
        out
    }

    /// Euclidean norms of the rows of `A'^H Y` for an `np' x M` signal.
    pub fn correlation_norms(&self, y: &RowMajor) -> Vec<f64> {
        let c = self.correlate(y);
        (0..c.rows()).map(|i| row_norm(c.row(i))).collect()
    }
}

pub(crate) fn row_norm((re, im): (&[f64], &[f64])) -> f64 {
    re.iter()
        .zip(im)
        .map(|(a, b)| a * a + b * b)
        .sum::<f64>()
        .sqrt()
}

/// Pilot codebook and both pattern matrices of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    pub pilot: PilotCodebook,
    pub pilot_pattern: PatternMatrix,
    pub data_pattern: PatternMatrix,
    pub seed: u64,
}

impl CodebookSet {
    pub fn build(cfg: &SystemConfig) -> Result<Self> {
        Ok(CodebookSet {
            pilot: PilotCodebook::build(cfg)?,
            pilot_pattern: PatternMatrix::build(cfg, PatternKind::Pilot)?,
            data_pattern: PatternMatrix::build(cfg, PatternKind::Data)?,
            seed: cfg.seed,
        })
    }

    pub fn extended(&self) -> ExtendedPilotCodebook<'_> {
        ExtendedPilotCodebook::new(&self.pilot, &self.pilot_pattern)
            .expect("codebook set built with consistent dimensions")
    }

    /// Checks that the set matches the dimensions of `cfg`.
    pub fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        let expect = |what: &str, found: usize, expected: usize| {
            if found == expected {
                Ok(())
            } else {
                Err(Error::Dimension(format!(
                    "{what}: expected {expected}, found {found}"
                )))
            }
        };
        expect("pilot length", self.pilot.np(), cfg.np)?;
        expect("codebook size", self.pilot.n_codewords(), cfg.n_codewords())?;
        expect("pilot part", self.pilot_pattern.rows(), cfg.np_prime)?;
        expect("pilot pattern weight", self.pilot_pattern.weight(), cfg.np)?;
        expect("data part", self.data_pattern.rows(), cfg.data_part_len())?;
        expect("data pattern weight", self.data_pattern.weight(), cfg.nd)?;
        expect(
            "data pattern columns",
            self.data_pattern.n_codewords(),
            cfg.n_codewords(),
        )
    }

    /// Writes the binary dump: a little-endian `u32` header length, a JSON
    /// header, then each section row-major (complex entries as `re, im`
    /// little-endian floats, masks as bytes).
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.pilot.n_codewords();
        let header = DumpHeader {
            format: DUMP_FORMAT.into(),
            version: 1,
            seed: self.seed,
            sections: vec![
                Section {
                    name: "pilot".into(),
                    rows: self.pilot.np(),
                    cols: n,
                    dtype: "complex128".into(),
                },
                Section {
                    name: "pilot_pattern".into(),
                    rows: self.pilot_pattern.rows(),
                    cols: n,
                    dtype: "u8".into(),
                },
                Section {
                    name: "data_pattern".into(),
                    rows: self.data_pattern.rows(),
                    cols: n,
                    dtype: "u8".into(),
                },
            ],
        };
        let json = serde_json::to_vec(&header)?;
        out.write_all(&(json.len() as u32).to_le_bytes())?;
        out.write_all(&json)?;
        let mut buf = Vec::with_capacity(self.pilot.np() * n * 16);
        for k in 0..self.pilot.np() {
            for i in 0..n {
                let v = self.pilot.entry(k, i);
                buf.extend_from_slice(&v.re.to_le_bytes());
                buf.extend_from_slice(&v.im.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        out.write_all(&self.pilot_pattern.to_mask())?;
        out.write_all(&self.data_pattern.to_mask())?;
        Ok(())
    }

    /// Reads a dump written by [`CodebookSet::dump`]; `complex64` pilot
    /// sections are accepted as well.
    pub fn load<R: Read>(mut input: R) -> Result<Self> {
        let mut len = [0u8; 4];
        input.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        input.read_exact(&mut json)?;
        let header: DumpHeader = serde_json::from_slice(&json)?;
        if header.format != DUMP_FORMAT || header.version != 1 {
            return Err(Error::Dump(format!(
                "unknown format {} v{}",
                header.format, header.version
            )));
        }
        let [pilot, pilot_pattern, data_pattern] = header.sections.as_slice() else {
            return Err(Error::Dump("expected three sections".into()));
        };
        let matrix = match pilot.dtype.as_str() {
            "complex128" => {
                let mut raw = vec![0u8; pilot.rows * pilot.cols * 16];
                input.read_exact(&mut raw)?;
                let vals: Vec<Complex64> = raw
                    .chunks_exact(16)
                    .map(|c| {
                        Complex64::new(
                            f64::from_le_bytes(c[..8].try_into().unwrap()),
                            f64::from_le_bytes(c[8..].try_into().unwrap()),
                        )
                    })
                    .collect();
                DMatrix::from_row_slice(pilot.rows, pilot.cols, &vals)
            }
            "complex64" => {
                let mut raw = vec![0u8; pilot.rows * pilot.cols * 8];
                input.read_exact(&mut raw)?;
                let vals: Vec<Complex64> = raw
                    .chunks_exact(8)
                    .map(|c| {
                        Complex64::new(
                            f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                            f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
                        )
                    })
                    .collect();
                DMatrix::from_row_slice(pilot.rows, pilot.cols, &vals)
            }
            other => return Err(Error::Dump(format!("unsupported pilot dtype {other}"))),
        };
        let mut read_mask = |s: &Section, kind| -> Result<PatternMatrix> {
            if s.dtype != "u8" {
                return Err(Error::Dump(format!(
                    "unsupported pattern dtype {}",
                    s.dtype
                )));
            }
            let mut mask = vec![0u8; s.rows * s.cols];
            input.read_exact(&mut mask)?;
            PatternMatrix::from_mask(kind, s.rows, s.cols, &mask)
        };
        let set = CodebookSet {
            pilot: PilotCodebook::from_matrix(matrix),
            pilot_pattern: read_mask(pilot_pattern, PatternKind::Pilot)?,
            data_pattern: read_mask(data_pattern, PatternKind::Data)?,
            seed: header.seed,
        };
        ExtendedPilotCodebook::new(&set.pilot, &set.pilot_pattern)?;
        if set.data_pattern.n_codewords() != set.pilot.n_codewords() {
            return Err(Error::Dump(
                "data pattern column count differs from the pilot codebook".into(),
            ));
        }
        Ok(set)
    }
}

const DUMP_FORMAT: &str = "odma-ura-codebooks";

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    format: String,
    version: u32,
    seed: u64,
    sections: Vec<Section>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Section {
    name: String,
    rows: usize,
    cols: usize,
    dtype: String,
}

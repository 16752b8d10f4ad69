//! System parameters and their consistency rules.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channel re-estimation policy used when cancelling decoded users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SicMode {
    /// Subtract with the pilot-based channel estimates.
    InitialEstimates,
    /// Re-estimate the channels of the decoded users from their
    /// reconstructed frames, then subtract.
    DataAidedReestimation,
}

impl SicMode {
    pub fn label(self) -> &'static str {
        match self {
            SicMode::InitialEstimates => "initial",
            SicMode::DataAidedReestimation => "reest",
        }
    }
}

/// Check-node update used inside the list decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SclKernel {
    /// Sign-min approximation; additions and comparisons only.
    #[default]
    MinSum,
    /// Exact box-plus and exact path-metric increments.
    Exact,
}

/// Every scalar parameter of one simulated system.
///
/// Field names follow the JSON configuration format one-to-one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Frame length in channel uses.
    pub n: usize,
    /// Message bits per user.
    pub b: usize,
    /// Leading message bits that select the pilot and the patterns.
    pub bp: usize,
    /// Pilot sequence length.
    pub np: usize,
    /// Length of the pilot part of the frame.
    pub np_prime: usize,
    /// Polar code length.
    pub nc: usize,
    /// CRC bits.
    pub r: usize,
    /// Data symbols per user (`nc / 2`).
    pub nd: usize,
    /// Receive antennas.
    pub m: usize,
    /// Active users per frame.
    pub ka: usize,
    /// Total user population, reported only.
    pub kt: usize,
    /// Noise variance per complex entry.
    pub n0: f64,
    /// Average pilot symbol power.
    pub pp: f64,
    /// Average data symbol power.
    pub pd: f64,
    /// Over-selection margin of the greedy detector.
    pub delta: usize,
    pub n_omp: usize,
    pub n_max: usize,
    pub n_list: usize,
    /// Target per-user probability of error.
    pub epsilon: f64,
    pub sic_mode: SicMode,
    pub seed: u64,
    #[serde(default)]
    pub scl_kernel: SclKernel,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::massive_mimo(100)
    }
}

impl SystemConfig {
    /// Full-size setting with a 50-antenna receiver; `Bp`, `np` and `np'`
    /// follow the load-dependent choices used for the published curves.
    pub fn massive_mimo(ka: usize) -> Self {
        let (np, np_prime) = match ka {
            0..=600 => (600, 1000),
            601..=800 => (800, 1200),
            _ => (1000, 1300),
        };
        SystemConfig {
            n: 3200,
            b: 100,
            bp: if ka < 800 { 15 } else { 16 },
            np,
            np_prime,
            nc: 1024,
            r: 16,
            nd: 512,
            m: 50,
            ka,
            kt: 10 * ka,
            n0: 1.0,
            pp: 1.0,
            pd: 1.0,
            delta: 10,
            n_omp: 4,
            n_max: 16,
            n_list: 128,
            epsilon: 0.05,
            sic_mode: SicMode::DataAidedReestimation,
            seed: 0,
            scl_kernel: SclKernel::MinSum,
        }
    }

    /// Full-size setting with an 8-antenna receiver.
    pub fn multi_antenna(ka: usize) -> Self {
        SystemConfig {
            bp: 15,
            np: 800,
            np_prime: 1200,
            m: 8,
            epsilon: 0.1,
            ..Self::massive_mimo(ka)
        }
    }

    /// Desk-scale setting: 800 channel uses, 64-bit messages, length-256
    /// polar code.
    pub fn scaled(ka: usize, m: usize) -> Self {
        SystemConfig {
            n: 800,
            b: 64,
            bp: 12,
            np: 128,
            np_prime: 256,
            nc: 256,
            r: 16,
            nd: 128,
            m,
            ka,
            kt: 10 * ka,
            n0: 1.0,
            pp: 1.0,
            pd: 1.0,
            delta: 10,
            n_omp: 4,
            n_max: 16,
            n_list: 32,
            epsilon: 0.1,
            sic_mode: SicMode::DataAidedReestimation,
            seed: 0,
            scl_kernel: SclKernel::MinSum,
        }
    }

    /// Small setting for smoke runs and tests: 256 codewords, length-128
    /// polar code, 200 channel uses.
    pub fn small(ka: usize, m: usize) -> Self {
        SystemConfig {
            n: 200,
            b: 32,
            bp: 8,
            np: 32,
            np_prime: 64,
            nc: 128,
            nd: 64,
            delta: 4,
            n_max: 8,
            n_list: 8,
            ..Self::scaled(ka, m)
        }
    }

    /// Number of pilot codewords and transmission patterns, `2^Bp`.
    pub fn n_codewords(&self) -> usize {
        1usize << self.bp
    }

    /// Data bits carried by the polar codeword, `B - Bp`.
    pub fn payload_bits(&self) -> usize {
        self.b - self.bp
    }

    /// Polar information length including the CRC, `B - Bp + r`.
    pub fn k_info(&self) -> usize {
        self.b - self.bp + self.r
    }

    /// Length of the data part of the frame.
    pub fn data_part_len(&self) -> usize {
        self.n - self.np_prime
    }

    /// Detections added per greedy iteration, `ceil((Ka + delta) / n_omp)`.
    pub fn omp_batch(&self) -> usize {
        (self.ka + self.delta).div_ceil(self.n_omp.max(1))
    }

    pub fn validate(&self) -> ValidationReport {
        let mut v = Vec::new();
        let positive: [(&'static str, usize); 11] = [
            ("n", self.n),
            ("b", self.b),
            ("np", self.np),
            ("np_prime", self.np_prime),
            ("nc", self.nc),
            ("nd", self.nd),
            ("m", self.m),
            ("ka", self.ka),
            ("delta", self.delta),
            ("n_omp", self.n_omp),
            ("n_max", self.n_max),
        ];
        for (name, value) in positive {
            if value == 0 {
                v.push(Violation::NotPositive(name));
            }
        }
        if self.n_list == 0 {
            v.push(Violation::NotPositive("n_list"));
        }
        if self.bp == 0 {
            v.push(Violation::NotPositive("bp"));
        }
        for (name, value) in [("n0", self.n0), ("pp", self.pp), ("pd", self.pd)] {
            if !(value > 0.0 && value.is_finite()) {
                v.push(Violation::NotPositive(name));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            v.push(Violation::TargetOutOfRange);
        }
        if self.np > self.np_prime {
            v.push(Violation::PilotPartTooShort);
        }
        if self.np_prime >= self.n {
            v.push(Violation::NoDataPart);
        } else if self.nd > self.n - self.np_prime {
            v.push(Violation::DataPartTooShort);
        }
        if 2 * self.nd != self.nc {
            v.push(Violation::SymbolCountMismatch);
        }
        if !self.nc.is_power_of_two() || self.nc < 2 || self.nc > crate::fec::MAX_CODE_LEN {
            v.push(Violation::CodeLength);
        }
        if self.bp > 32 {
            v.push(Violation::IndexBitsTooLarge);
        }
        if self.bp >= self.b {
            v.push(Violation::NoPayload);
        } else if self.k_info() > self.nc {
            v.push(Violation::RateAboveOne);
        }
        if crate::fec::CrcSpec::for_width(self.r).is_none() {
            v.push(Violation::UnsupportedCrc);
        }
        ValidationReport { violations: v }
    }

    /// Validates and converts violations into an error.
    pub fn check(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(report.violations))
        }
    }

    /// `(np*Pp + nd*Pd) / (B*N0)`, linear and in dB.
    pub fn energy_per_bit(&self) -> EnergyPerBit {
        let linear =
            (self.np as f64 * self.pp + self.nd as f64 * self.pd) / (self.b as f64 * self.n0);
        EnergyPerBit {
            linear,
            db: 10.0 * linear.log10(),
        }
    }

    /// Sets `pp` and `pd` so that the energy per bit is `ebn0_db` and a
    /// fraction `pilot_fraction` of the per-user energy goes to the pilot.
    pub fn with_energy_split(&self, ebn0_db: f64, pilot_fraction: f64) -> SystemConfig {
        let total = 10f64.powf(ebn0_db / 10.0) * self.b as f64 * self.n0;
        SystemConfig {
            pp: pilot_fraction * total / self.np as f64,
            pd: (1.0 - pilot_fraction) * total / self.nd as f64,
            ..self.clone()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPerBit {
    pub linear: f64,
    pub db: f64,
}

/// One broken consistency rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NotPositive(&'static str),
    PilotPartTooShort,
    NoDataPart,
    DataPartTooShort,
    SymbolCountMismatch,
    CodeLength,
    IndexBitsTooLarge,
    NoPayload,
    RateAboveOne,
    UnsupportedCrc,
    TargetOutOfRange,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPositive(field) => write!(f, "{field} must be strictly positive"),
            Violation::PilotPartTooShort => f.write_str("pilot part shorter than pilot sequence"),
            Violation::NoDataPart => f.write_str("pilot part leaves no room for data"),
            Violation::DataPartTooShort => f.write_str("data part shorter than the QPSK block"),
            Violation::SymbolCountMismatch => f.write_str("QPSK symbol count mismatch"),
            Violation::CodeLength => {
                f.write_str("polar code length must be a power of two in 2..=1024")
            }
            Violation::IndexBitsTooLarge => f.write_str("at most 32 index bits are supported"),
            Violation::NoPayload => f.write_str("index bits leave no data bits"),
            Violation::RateAboveOne => f.write_str("payload plus CRC exceeds the code length"),
            Violation::UnsupportedCrc => f.write_str("no CRC polynomial for this width"),
            Violation::TargetOutOfRange => f.write_str("target error rate must lie in (0, 1]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

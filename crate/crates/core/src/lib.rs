//! Link-level simulator for on-off division multiple access (ODMA) based
//! unsourced random access with a multi-antenna base station.
//!
//! Every active user splits its message into an index part, which selects a
//! pilot sequence and two sparse transmission patterns, and a data part,
//! which is CRC-protected, polar encoded and QPSK modulated. The receiver
//! detects active pilots and patterns jointly with generalized orthogonal
//! matching pursuit, estimates channels by LMMSE, combines by MRC, decodes
//! with a CRC-aided list decoder and cancels decoded users iteratively.

pub mod channel;
pub mod codebooks;
pub mod config;
pub mod error;
pub mod fec;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod receiver;
pub mod rng;
pub mod transmitter;

pub use config::{SclKernel, SicMode, SystemConfig, ValidationReport, Violation};
pub use error::{Error, Result};

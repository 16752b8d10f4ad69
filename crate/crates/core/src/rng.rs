//! Seeded random streams.
//!
//! Every random quantity in a simulation is drawn from a ChaCha stream keyed
//! by `(seed, domain, index)`. ChaCha is counter based, so a trial can be
//! replayed in isolation and trials can be distributed over any number of
//! threads without changing their draws.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct domains never share key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    PilotRows,
    PilotPattern,
    DataPattern,
    Messages,
    Channel,
    Noise,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::PilotRows => 0x7069_6c6f_7472_6f77,
            Domain::PilotPattern => 0x7070_6174_7465_726e,
            Domain::DataPattern => 0x6470_6174_7465_726e,
            Domain::Messages => 0x6d65_7373_6167_6573,
            Domain::Channel => 0x6368_616e_6e65_6c00,
            Domain::Noise => 0x6e6f_6973_6500_0000,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Returns the stream for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain.tag()));
    rng.set_stream(index);
    rng
}

/// Draws one circularly-symmetric complex Gaussian sample of the given
/// variance with the Box-Muller transform (each quadrature gets half).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    let radius = (-u1.ln() * variance).sqrt();
    let (sin, cos) = (std::f64::consts::TAU * u2).sin_cos();
    Complex64::new(radius * cos, radius * sin)
}

/// Draws `len` uniform bits as 0/1 bytes.
pub fn random_bits<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random::<bool>() as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_replayable_and_distinct() {
        let a: Vec<u64> = (0..4)
            .map(|_| stream(7, Domain::Noise, 3).random())
            .collect();
        let b: Vec<u64> = (0..4)
            .map(|_| stream(7, Domain::Noise, 3).random())
            .collect();
        assert_eq!(a, b);
        let mut x = stream(7, Domain::Noise, 3);
        let mut y = stream(7, Domain::Noise, 4);
        let mut z = stream(7, Domain::Channel, 3);
        let first = x.random::<u64>();
        assert_ne!(first, y.random::<u64>());
        assert_ne!(first, z.random::<u64>());
    }

    #[test]
    fn box_muller_moments() {
        let mut rng = stream(1, Domain::Noise, 0);
        let n = 200_000;
        let (mut re2, mut im2, mut cross) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = complex_gaussian(&mut rng, 3.0);
            re2 += z.re * z.re;
            im2 += z.im * z.im;
            cross += z.re * z.im;
        }
        let n = n as f64;
        assert!((re2 / n - 1.5).abs() < 0.03);
        assert!((im2 / n - 1.5).abs() < 0.03);
        assert!((cross / n).abs() < 0.02);
    }
}

//! Deterministic random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream keyed by the
//! master seed and selected by `(purpose, a, b)`, so toggling one effect
//! (noise, imperfections) never shifts the draws of another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Pulses = 1,
    Noise = 2,
    Yaw = 3,
    Position = 4,
    City = 5,
    Calibration = 6,
    Scenario = 7,
    Sources = 8,
}

pub fn stream(seed: u64, purpose: Purpose, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = ((purpose as u64) << 56) | ((a & 0x0fff_ffff) << 28) | (b & 0x0fff_ffff);
    rng.set_stream(id);
    rng
}

/// Seed for Monte-Carlo trial `trial` derived from a master seed.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master.wrapping_add(trial.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Circularly-symmetric complex normal sample with total variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

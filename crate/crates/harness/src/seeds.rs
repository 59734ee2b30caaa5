//! Per-run seed derivation: `base ⊕ mix(run, scheme, purpose)`, so each run's
//! random stream is fixed by the config alone and independent of scheduling.

use metrology_core::infer::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Shots = 1,
    CalibrationAngles = 2,
    CalibrationShots = 3,
    Bootstrap = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(base: u64, index: u64, scheme: Scheme, purpose: Purpose) -> u64 {
    let h = splitmix64(splitmix64(splitmix64(index) ^ scheme.copies() as u64) ^ purpose as u64);
    base ^ h
}

/// Seed for one point of a θ sweep. The point at the config's own `theta_true`
/// keeps `base`, so it reproduces a plain simulation there.
pub fn for_point(base: u64, theta: (f64, f64), theta_true: (f64, f64)) -> u64 {
    if theta == theta_true {
        return base;
    }
    base ^ splitmix64(splitmix64(theta.0.to_bits()) ^ theta.1.to_bits().rotate_left(17))
}

//! Seed derivation. Every random consumer gets its own ChaCha stream keyed by
//! the root seed and a fixed purpose tag, so adding draws to one purpose
//! never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    Init = 2,
    Bank = 3,
    Train = 4,
    Sample = 5,
    Eval = 6,
    Feature = 7,
    Oracle = 8,
    Heldout = 9,
}

/// RNG for `purpose` under `seed`; `sub` separates repeated uses (e.g. epochs).
pub fn derive(seed: u64, purpose: Purpose, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ sub);
    rng
}

pub fn normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn fill_normal<R: rand::Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = StandardNormal.sample(rng);
    }
}

//! Per-stream seeding. Every stochastic draw in a campaign comes from its
//! own generator, keyed by (master seed, purpose, index, sub-index), so the
//! output does not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_SPECTRUM: u64 = 1;
pub const TAG_RINGDOWN: u64 = 2;
pub const TAG_TIMESERIES: u64 = 3;
pub const TAG_READOUT: u64 = 4;
pub const TAG_BACKACTION: u64 = 5;
pub const TAG_PHASE: u64 = 6;
pub const TAG_THERMOMETER: u64 = 7;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, tag: u64, i: u64, j: u64) -> u64 {
    let mut h = splitmix(master);
    for v in [tag, i, j] {
        h = splitmix(h ^ v);
    }
    h
}

pub fn stream(master: u64, tag: u64, i: u64, j: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, tag, i, j))
}

//! Seeded random streams. Each concern (placement, shadowing, traffic) draws
//! from its own ChaCha stream so that changing how often one concern samples
//! never shifts the numbers another concern sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Shadowing = 2,
    Traffic = 3,
}

pub fn stream(master_seed: u64, tag: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(tag as u64);
    rng
}

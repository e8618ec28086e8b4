//! Seeded random streams.
//!
//! Each run owns one 64-bit seed. Independent purposes (weight init, hidden
//! noise, split perturbations, ...) draw from distinct ChaCha streams of that
//! seed, so consuming more or fewer numbers in one stream never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Init,
    Noise,
    Split,
    Probe,
    /// Free-form stream for Monte-Carlo checks and tests.
    Aux(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 0,
            Stream::Noise => 1,
            Stream::Split => 2,
            Stream::Probe => 3,
            Stream::Aux(k) => 0x1_0000_0000 | u64::from(k),
        }
    }
}

/// Generator for `stream` of run `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

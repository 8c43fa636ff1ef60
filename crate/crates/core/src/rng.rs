//! Seeded, stream-split random sources.
//!
//! Every stochastic consumer draws from its own ChaCha stream keyed by
//! `(seed, stream id)`, so results never depend on scheduling order or on
//! how many draws another consumer made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const GEOMETRY: u64 = 1;
pub const SHADOWING: u64 = 2;
pub const ASSOCIATION: u64 = 3;
pub const PROBE: u64 = 4;
/// Monte Carlo chunk `k` uses stream `MONTE_CARLO + k`.
pub const MONTE_CARLO: u64 = 1 << 32;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

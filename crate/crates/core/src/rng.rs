use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A reproducible random stream: ChaCha8 keyed by `seed`, positioned on
/// stream `stream`. Identical `(seed, stream)` pairs give identical draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Child stream for sub-task `index`. Children of distinct parents or
    /// indices do not collide for indices below 2^32.
    pub fn child(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: self
                .stream
                .wrapping_mul(0x1_0000_0000)
                .wrapping_add(index)
                .wrapping_add(1),
        }
    }
}

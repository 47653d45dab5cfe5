//! Explicit, splittable random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A `(seed, stream)` pair naming one ChaCha8 keystream.
///
/// The same pair always yields the same draws on every platform, so
/// replicates can be scheduled in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Instantiate the generator at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// An independent child stream, e.g. for the noise calibration nested
    /// inside one replicate.
    pub fn child(&self, index: u64) -> Self {
        let seed = splitmix64(self.seed ^ splitmix64(self.stream.wrapping_add(0x5851_F42D_4C95_7F2D)));
        Self { seed, stream: index }
    }
}

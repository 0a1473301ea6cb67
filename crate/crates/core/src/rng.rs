//! Seeded, splittable randomness. Every stream is derived from one 64-bit
//! seed plus a counter, so streams never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SeedStream {
    seed: u64,
    next: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, next: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of streams handed out so far.
    pub fn count(&self) -> u64 {
        self.next
    }

    /// Next independent generator.
    pub fn fork(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.next);
        self.next += 1;
        rng
    }
}

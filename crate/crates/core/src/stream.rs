//! Counter-based random streams.
//!
//! Every random quantity in this crate is addressed by a coordinate triple
//! `(run, step, draw)` under a single master seed. A stream is derived by
//! hashing the coordinates into a ChaCha8 key, so the values drawn at a
//! coordinate are a pure function of `(master_seed, run, step, draw)` and
//! never depend on execution order or thread count. This is what makes
//! paired comparisons across optimizers and parallel Monte Carlo exact.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Address of one random stream: Monte Carlo run, iteration (or trial), and
/// a per-point draw index within that iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub run: u64,
    pub step: u64,
    pub draw: u64,
}

impl StreamKey {
    pub fn new(run: u64, step: u64, draw: u64) -> Self {
        Self { run, step, draw }
    }

    /// Key for per-point sample `k` of chunk `j` when a batch is split into
    /// chunks of `chunk_size` points. The draw lane is the flat batch index
    /// `j * chunk_size + k`, so two optimizers that split the same batch
    /// differently still consume the identical underlying draws.
    pub fn chunk_sample(run: u64, step: u64, chunk: u64, sample: u64, chunk_size: u64) -> Self {
        Self {
            run,
            step,
            draw: chunk * chunk_size + sample,
        }
    }
}

/// Derives independent ChaCha8 streams from a master seed and a [`StreamKey`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngFactory {
    master_seed: u64,
}

impl RngFactory {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// The stream at `key`. Distinct keys give statistically independent
    /// ChaCha8 streams; the same key always gives bit-identical output.
    pub fn stream(&self, key: StreamKey) -> ChaCha8Rng {
        let mut s = mix64(self.master_seed ^ 0x6A09_E667_F3BC_C908);
        for coord in [key.run, key.step, key.draw] {
            s = mix64(s.wrapping_add(GOLDEN) ^ coord);
        }
        let mut seed = [0u8; 32];
        for (i, word) in seed.chunks_exact_mut(8).enumerate() {
            s = s.wrapping_add(GOLDEN);
            word.copy_from_slice(&mix64(s ^ (i as u64)).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

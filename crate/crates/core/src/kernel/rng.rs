//! Deterministic random streams addressed by a master seed and an index path.
//!
//! A stream's identity is a 64-bit key mixed from `(seed, path)`. Child
//! streams are derived from the key, never from the live generator state, so
//! the draws a replication sees do not depend on which worker ran it or in
//! what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PATH_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(key: u64, index: u64) -> u64 {
    splitmix64(key ^ splitmix64(index.wrapping_add(PATH_SALT)))
}

#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path: &[u64]) -> Self {
        let key = path
            .iter()
            .fold(splitmix64(master_seed), |key, &idx| mix(key, idx));
        Self::from_key(key)
    }

    fn from_key(key: u64) -> Self {
        let mut seed = [0u8; 32];
        let mut s = key;
        for chunk in seed.chunks_exact_mut(8) {
            s = splitmix64(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        Self {
            key,
            rng: ChaCha8Rng::from_seed(seed),
        }
    }

    /// A fresh stream one level below this one on the path.
    pub fn child(&self, index: u64) -> Self {
        Self::from_key(mix(self.key, index))
    }

    pub fn key(&self) -> u64 {
        self.key
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

//! Keyed random streams.
//!
//! Every random draw in the toolkit comes from an [`RngStream`] derived from a
//! root seed and a [`StreamKey`]. The root seed fixes the ChaCha key and the
//! stream key selects the ChaCha stream (nonce), so the same `(seed, key)`
//! always reproduces the same sequence, distinct keys give independent
//! sequences, and replicates can run on any thread in any order.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Identifies one logical stream below a root seed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub replicate: u64,
    pub tag: String,
    pub phase: u64,
}

impl StreamKey {
    pub fn new(replicate: u64, tag: impl Into<String>, phase: u64) -> Self {
        Self {
            replicate,
            tag: tag.into(),
            phase,
        }
    }

    fn stream_id(&self) -> u64 {
        let mut h = splitmix64(self.replicate ^ 0x6a09_e667_f3bc_c908);
        h = splitmix64(h ^ fnv1a(self.tag.as_bytes()));
        splitmix64(h ^ self.phase.rotate_left(17))
    }
}

/// A deterministic random stream owned by one task at a time.
#[derive(Debug)]
pub struct RngStream {
    root: u64,
    key: StreamKey,
    inner: ChaCha8Rng,
}

/// Derives the stream for `key` below `root`.
pub fn derive_stream(root: u64, key: StreamKey) -> RngStream {
    let mut seed = [0u8; 32];
    let mut state = root;
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut inner = ChaCha8Rng::from_seed(seed);
    inner.set_stream(key.stream_id());
    RngStream { root, key, inner }
}

impl RngStream {
    pub fn new(root: u64, replicate: u64, tag: &str, phase: u64) -> Self {
        derive_stream(root, StreamKey::new(replicate, tag, phase))
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    pub fn key(&self) -> &StreamKey {
        &self.key
    }

    /// A sibling stream with the same root and replicate but a different tag.
    pub fn sibling(&self, tag: &str, phase: u64) -> RngStream {
        derive_stream(self.root, StreamKey::new(self.key.replicate, tag, phase))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over an empty range");
        // Lemire's multiply-shift; bias is below 2^-64 * n.
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

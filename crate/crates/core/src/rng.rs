//! Counter-based hashing for the landscape and ChaCha streams for replicas.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of (seed, x); two rounds so nearby seeds decorrelate.
#[inline]
pub fn hash2(seed: u64, x: u64) -> u64 {
    let k = mix64(seed.wrapping_add(GOLDEN));
    mix64(k ^ mix64(x.wrapping_mul(GOLDEN).wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Map 64 random bits to the open interval (0, 1).
#[inline]
pub fn open01(bits: u64) -> f64 {
    // the top value rounds to 1.0; pull it back to the largest double below 1
    (((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)).min(1.0 - f64::EPSILON / 2.0)
}

/// Replica stream: ChaCha8 keyed by the master seed, stream id = replica.
#[derive(Clone, Debug)]
pub struct RngStream {
    pub seed: u64,
    pub replica: u64,
    pub draws: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replica);
        RngStream { seed, replica, draws: 0, rng }
    }

    /// A stream for a named sub-purpose of the same replica.
    pub fn derived(seed: u64, tag: u64, replica: u64) -> Self {
        Self::new(hash2(seed, tag), replica)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.draws += 1;
        self.rng.next_u64()
    }

    /// Uniform on (0, 1), never 0 or 1.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        open01(self.next_u64())
    }

    /// Unit-mean exponential, −ln U.
    #[inline]
    pub fn exp1(&mut self) -> f64 {
        -libm::log(self.uniform())
    }

    /// Uniform integer in 0..k (multiply-shift).
    #[inline]
    pub fn below(&mut self, k: u64) -> u64 {
        ((self.next_u64() as u128 * k as u128) >> 64) as u64
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }
    fn next_u64(&mut self) -> u64 {
        RngStream::next_u64(self)
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let b = RngStream::next_u64(self).to_le_bytes();
            chunk.copy_from_slice(&b[..chunk.len()]);
        }
    }
}

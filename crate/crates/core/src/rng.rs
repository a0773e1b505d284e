//! Counter-based random streams.
//!
//! A stream is identified by a master seed and a key path such as
//! `[domain, cell, replication]`. The key path is folded into a 64-bit
//! stream id with the SplitMix64 finalizer, and draw `n` of the stream is
//! `mix(id + (n + 1) * GAMMA)`. Because every draw is a pure function of
//! `(id, n)`, streams can be created anywhere without coordination and any
//! draw can be addressed directly with [`RngStream::at`]. State arithmetic
//! is integer-only, so output is identical on every platform.

use rand_core::RngCore;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0x6A09_E667_F3BC_C909;
const KEY_SALT: u64 = 0xBB67_AE85_84CA_A73B;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a master seed and a key path into a stream id.
pub fn stream_id(seed: u64, key: &[u64]) -> u64 {
    key.iter().fold(mix64(seed ^ SEED_SALT), |h, &k| {
        mix64(h.wrapping_add(GAMMA) ^ mix64(k.wrapping_add(KEY_SALT)))
    })
}

#[inline]
fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    id: u64,
    counter: u64,
}

impl RngStream {
    pub fn derive(seed: u64, key: &[u64]) -> Self {
        Self {
            id: stream_id(seed, key),
            counter: 0,
        }
    }

    /// Child stream keyed under this one. Does not advance `self`.
    pub fn child(&self, key: &[u64]) -> Self {
        Self::derive(self.id, key)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Draw `n` of the stream without touching the cursor.
    #[inline]
    pub fn at(&self, n: u64) -> u64 {
        mix64(self.id.wrapping_add(n.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    /// Uniform on [0, 1) at draw `n`, 53 bits of mantissa.
    #[inline]
    pub fn uniform_at(&self, n: u64) -> f64 {
        to_unit(self.at(n))
    }

    /// Uniform on [0, 1), 53 bits of mantissa.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        to_unit(self.next_u64())
    }

    /// Uniform on (0, 1]; safe to raise to negative powers.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let v = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        v
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

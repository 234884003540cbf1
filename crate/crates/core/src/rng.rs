//! Reproducible random streams.
//!
//! Every chain owns private streams derived from `(master seed, replica,
//! role)`. The master seed is expanded into a ChaCha8 key; the replica index
//! and role are packed into ChaCha's 64-bit stream id, so each
//! `(replica, role)` pair addresses a disjoint counter space under the same
//! key. Derivation is pure: the same triple always yields the same sequence,
//! independent of thread scheduling or the order in which replicas run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which part of a chain consumes the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamRole {
    /// Innovations `U` multiplying the diffusion coefficient.
    Brownian = 0,
    /// Poisson counts and jump sizes.
    Jumps = 1,
    /// Gaussian surrogate `Λ` for the removed small jumps.
    Wiener = 2,
    /// Anything else (reservoir sampling, fixtures).
    Auxiliary = 3,
}

const ROLE_BITS: u32 = 2;

#[derive(Debug, Clone)]
pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn derive(master_seed: u64, replica: u64, role: StreamRole) -> Self {
        assert!(
            replica < (1u64 << (64 - ROLE_BITS)),
            "replica index {replica} out of range"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream((replica << ROLE_BITS) | role as u64);
        Stream(rng)
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::derive(seed, 0, StreamRole::Auxiliary)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }
}

impl RngCore for Stream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// The three streams a chain consumes.
#[derive(Debug, Clone)]
pub struct ChainStreams {
    pub brownian: Stream,
    pub jumps: Stream,
    pub wiener: Stream,
}

impl ChainStreams {
    pub fn derive(master_seed: u64, replica: u64) -> Self {
        ChainStreams {
            brownian: Stream::derive(master_seed, replica, StreamRole::Brownian),
            jumps: Stream::derive(master_seed, replica, StreamRole::Jumps),
            wiener: Stream::derive(master_seed, replica, StreamRole::Wiener),
        }
    }
}

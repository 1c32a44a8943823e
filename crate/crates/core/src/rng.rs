//! Seed derivation and PRNG streams.
//!
//! Every random consumer (weight init, dropout, shuffling, validation split,
//! synthetic data) draws from its own ChaCha8 stream. Stream seeds are the first
//! eight bytes of `SHA-256(master_seed_le || label_1 || 0xff || label_2 || ...)`,
//! so turning one consumer on or off never shifts another consumer's sequence and
//! per-fold seeds do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Prng = ChaCha8Rng;

/// Label for one component of a derived seed.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(s: &'a str) -> Self {
        SeedPart::Str(s)
    }
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Int(v)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(v: usize) -> Self {
        SeedPart::Int(v as u64)
    }
}

pub fn derive_seed(master: u64, parts: &[SeedPart<'_>]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        match part {
            SeedPart::Str(s) => {
                hasher.update([0x01]);
                hasher.update(s.as_bytes());
            }
            SeedPart::Int(v) => {
                hasher.update([0x02]);
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.update([0xff]);
    }
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

pub fn stream(seed: u64) -> Prng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for a named consumer under `master`.
pub fn named_stream(master: u64, parts: &[SeedPart<'_>]) -> Prng {
    stream(derive_seed(master, parts))
}

//! Counter-based, splittable random streams.
//!
//! A stream is a `(key, counter)` pair. Draw `n` of a stream is
//! `mix(key + n * GAMMA)` with the SplitMix64 finalizer, so the state is two
//! words, trivially checkpointed, and the output of one stream never depends
//! on how often any other stream was used. Child streams are derived from a
//! parent key and a name, e.g. `root.split("replay")`.

use crate::codec::{Decoder, Encoder};
use crate::Result;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    key: u64,
    counter: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            key: mix(seed ^ 0x7472_7131_7365_6564),
            counter: 0,
        }
    }

    /// Derives an independent stream. Splitting does not advance `self`.
    pub fn split(&self, name: &str) -> Rng {
        Rng {
            key: mix(self.key ^ mix(fnv1a64(name.as_bytes()))),
            counter: 0,
        }
    }

    /// Derives an independent stream indexed by an integer (episode, seed, ...).
    pub fn split_index(&self, index: u64) -> Rng {
        Rng {
            key: mix(self.key.wrapping_add(mix(index ^ 0x6964_7800))),
            counter: 0,
        }
    }

    pub fn state(&self) -> (u64, u64) {
        (self.key, self.counter)
    }

    pub fn from_state(key: u64, counter: u64) -> Self {
        Rng { key, counter }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key.wrapping_add(self.counter.wrapping_mul(GAMMA)));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`, unbiased (Lemire's multiply-and-reject).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "Rng::below(0)");
        let mut m = (self.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform integer in `0..=max`.
    pub fn inclusive(&mut self, max: u64) -> u64 {
        if max == u64::MAX {
            self.next_u64()
        } else {
            self.below(max + 1)
        }
    }

    /// Uniform real on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.key);
        enc.u64(self.counter);
    }

    pub fn decode(dec: &mut Decoder<'_>) -> Result<Self> {
        Ok(Rng {
            key: dec.u64()?,
            counter: dec.u64()?,
        })
    }
}

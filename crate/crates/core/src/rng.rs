//! Seeded random streams. Every corruption owns one stream; draws are
//! consumed in a fixed order so a `(seed, call sequence)` pair always
//! reproduces the same output.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Identifier of the generator behind [`RandomStream`]. Bump when the
/// derivation of draws changes, since that invalidates generated datasets.
pub const ALGORITHM_ID: &str = "chacha8-v1";

pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm_id(&self) -> &'static str {
        ALGORITHM_ID
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi); returns `lo` when the interval is empty.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        let v = lo + (hi - lo) * self.unit();
        if v >= hi {
            lo
        } else {
            v
        }
    }

    /// Normal draw via Box-Muller; consumes exactly two words.
    pub fn gaussian(&mut self, mean: f64, stddev: f64) -> f64 {
        debug_assert!(stddev >= 0.0);
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        mean + stddev * z
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// +1.0 or -1.0 with equal probability.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.coin() {
            1.0
        } else {
            -1.0
        }
    }

    /// Uniform integer in [0, n) (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// `k` distinct indices from [0, n) in draw order (sparse partial
    /// Fisher-Yates, O(k) memory).
    pub fn choose_without_replacement(&mut self, n: usize, k: usize) -> Result<Vec<usize>> {
        if k > n {
            return Err(Error::InvalidArgument(format!(
                "cannot choose {k} distinct items from {n}"
            )));
        }
        let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(k);
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let j = i + self.below(n - i);
            let vj = *swapped.get(&j).unwrap_or(&j);
            let vi = *swapped.get(&i).unwrap_or(&i);
            swapped.insert(j, vi);
            out.push(vj);
        }
        Ok(out)
    }
}

/// Stable per-(frame, kind, severity) seed so any frame can be regenerated
/// independently of the others.
pub fn derive_seed(base: u64, frame_id: &str, kind: &str, severity: u8) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    eat(&base.to_le_bytes());
    eat(frame_id.as_bytes());
    eat(&[0xff]);
    eat(kind.as_bytes());
    eat(&[0xff, severity]);
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

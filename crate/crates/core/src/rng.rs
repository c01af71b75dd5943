//! Counter-seeded random streams.
//!
//! A stream is the pair `(master_seed, stream_index)`. The master seed keys a
//! ChaCha8 generator and the index selects one of its 2^64 independent
//! streams, so a replication draws the same numbers no matter which worker
//! thread runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Stream for replication `rep` of experiment `experiment`.
    pub fn for_replication(master_seed: u64, experiment: u64, rep: u64) -> Self {
        Self::new(master_seed, stream_hash(&[experiment, rep]))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit mix of a tuple of integers.
pub fn stream_hash(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x51_7CC1_B727_220A_u64, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Stable hash of a label, for deriving experiment ids from names.
pub fn label_hash(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_same_draws() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..16).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..16).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut r = RngStream::new(7, 4).rng();
            (0..16).map(|_| r.random()).collect()
        };
        assert_ne!(a, c);
    }

    #[test]
    fn streams_are_uncorrelated() {
        let n = 20_000;
        let mut r1 = RngStream::for_replication(1, 0, 0).rng();
        let mut r2 = RngStream::for_replication(1, 0, 1).rng();
        let xs: Vec<f64> = (0..n).map(|_| r1.random::<f64>() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| r2.random::<f64>() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        // var of U(-1/2,1/2) is 1/12; correlation SE is 1/sqrt(n)
        let corr = cov * 12.0;
        assert!(corr.abs() < 5.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn hash_is_order_sensitive() {
        assert_ne!(stream_hash(&[1, 2]), stream_hash(&[2, 1]));
        assert_eq!(stream_hash(&[1, 2]), stream_hash(&[1, 2]));
        assert_ne!(label_hash("m1"), label_hash("m2"));
    }
}

//! Deterministic stream splitting.
//!
//! Every random stream is addressed by a path of labels and indices below one
//! root seed. The ChaCha8 key of a stream is the SHA-256 digest of
//! `root || label || index || label || index ...`, so streams are independent of
//! the order in which they are requested and adding replicas never moves an
//! existing one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// A node in the stream tree.
#[derive(Clone, Debug)]
pub struct Seeder {
    key: [u8; 32],
}

impl Seeder {
    pub fn new(root: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"wfren/root");
        h.update(root.to_le_bytes());
        Seeder { key: h.finalize().into() }
    }

    /// Child node for `(label, index)`.
    pub fn derive(&self, label: &str, index: u64) -> Seeder {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Seeder { key: h.finalize().into() }
    }

    /// Generator for the stream at `(label, index)` below this node.
    pub fn rng(&self, label: &str, index: u64) -> StreamRng {
        ChaCha8Rng::from_seed(self.derive(label, index).key)
    }

    /// Replica stream `r`: the ChaCha stream id selects the replica, so no
    /// hashing happens per replica.
    pub fn replica(&self, r: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(r);
        rng
    }

    /// Generator seeded directly from this node.
    pub fn to_rng(&self) -> StreamRng {
        ChaCha8Rng::from_seed(self.key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_path_same_stream() {
        let a: Vec<u64> = Seeder::new(7).rng("x", 3).random_iter().take(4).collect();
        let b: Vec<u64> = Seeder::new(7).rng("x", 3).random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_paths_differ() {
        let s = Seeder::new(7);
        let first = |mut r: StreamRng| r.random::<u64>();
        assert_ne!(first(s.rng("x", 3)), first(s.rng("x", 4)));
        assert_ne!(first(s.rng("x", 3)), first(s.rng("y", 3)));
        assert_ne!(first(s.rng("ab", 0)), first(s.derive("a", 0).rng("b", 0)));
        assert_ne!(first(Seeder::new(7).to_rng()), first(Seeder::new(8).to_rng()));
        assert_ne!(first(s.replica(0)), first(s.replica(1)));
        assert_eq!(first(s.replica(0)), first(s.to_rng()));
    }
}

//! Reproducible, partitioned random streams.
//!
//! A stream is a ChaCha8 keystream selected by `(seed, stream_id)`. Streams
//! with distinct ids under the same seed never overlap, and the same pair
//! yields the same bits on every platform regardless of thread layout. Work
//! items derive their stream from their *index*, never from scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Identifies one reproducible random stream.
///
/// Stream ids are laid out as `namespace:16 | group:16 | index:32`. The
/// namespace is the low 16 bits of a caller-chosen base id; `group` is used
/// for (replicate, level) pairs and `index` for the path or particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, stream_id: 0 }
    }

    pub fn with_stream(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// A fresh namespace under the same seed. Only the low 16 bits of
    /// `namespace` are significant.
    pub fn namespace(&self, namespace: u16) -> Self {
        RngStream {
            seed: self.seed,
            stream_id: u64::from(namespace) << 48,
        }
    }

    /// Child stream for work item `index` of `group`.
    pub fn child(&self, group: u16, index: u32) -> Self {
        let ns = self.stream_id & 0xFFFF_0000_0000_0000;
        RngStream {
            seed: self.seed,
            stream_id: ns | (u64::from(group) << 32) | u64::from(index),
        }
    }

    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_stream_same_bits() {
        let s = RngStream::new(7).child(3, 11);
        let a: Vec<u64> = (0..16).map({
            let mut r = s.rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..16).map({
            let mut r = s.rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_first_word() {
        // Pins the stream layout; a change here breaks reproducibility of
        // every stored experiment.
        let mut r = RngStream::new(42).child(1, 2).rng();
        let first: u64 = r.random();
        let mut again = RngStream::with_stream(42, (1u64 << 32) | 2).rng();
        assert_eq!(first, again.random::<u64>());
    }

    #[test]
    fn children_differ() {
        let base = RngStream::new(1);
        let a: u64 = base.child(0, 0).rng().random();
        let b: u64 = base.child(0, 1).rng().random();
        let c: u64 = base.child(1, 0).rng().random();
        let d: u64 = base.namespace(1).child(0, 0).rng().random();
        assert!(a != b && a != c && b != c && a != d);
    }

    #[test]
    fn child_layout() {
        let s = RngStream::new(5).namespace(0xABCD).child(0x12, 0x3456);
        assert_eq!(s.stream_id, 0xABCD_0012_0000_3456);
    }
}

//! Reproducible, splittable random streams.
//!
//! A stream is addressed by `(seed, worker, index)`. The seed and worker id
//! are packed verbatim into the ChaCha8 key and the index selects the ChaCha
//! stream, so distinct addresses never share a keystream. Batch samplers use
//! the worker id as a logical stream family and the index as the sample
//! number, which makes every draw independent of the thread count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const KEY_TAG: [u8; 16] = *b"dirichlet-mc/v1\0";

/// Address of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub seed: u64,
    pub worker: u64,
    pub index: u64,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    inner: ChaCha8Rng,
}

/// Map `(seed, worker, index)` to its stream.
pub fn derive_substream(seed: u64, worker: u64, index: u64) -> RngStream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&worker.to_le_bytes());
    key[16..].copy_from_slice(&KEY_TAG);
    let mut inner = ChaCha8Rng::from_seed(key);
    inner.set_stream(index);
    RngStream {
        id: StreamId {
            seed,
            worker,
            index,
        },
        inner,
    }
}

impl RngStream {
    pub fn id(&self) -> StreamId {
        self.id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
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

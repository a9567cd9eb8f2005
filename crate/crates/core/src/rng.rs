//! Counter-addressable random streams.
//!
//! Every stream is a ChaCha8 keystream selected by `(master_seed, stream_id)`.
//! The 64-bit stream selector of ChaCha gives non-overlapping sequences, and
//! the word position makes any point of a stream directly addressable, so a
//! replica's output never depends on which worker ran it or in what order.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// A splittable random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        RngStream {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Position in 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn seek(&mut self, position: u128) {
        self.inner.set_word_pos(position);
    }

    /// A fresh stream under the same master seed, keyed by this stream and `tag`.
    pub fn split(&self, tag: u64) -> RngStream {
        RngStream::new(self.master_seed, mix64(self.stream_id ^ mix64(tag)))
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id of replica `replica` of the experiment named `tag`.
///
/// FNV-1a over the tag bytes followed by two rounds of mixing; stable across
/// platforms and toolchains, unlike `std::hash`.
pub fn stream_id(tag: &str, replica: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix64(mix64(h) ^ replica)
}

/// Hands out replica streams under one master seed and remembers which
/// stream families were used, for the run manifest.
#[derive(Debug)]
pub struct StreamSource {
    master_seed: u64,
    used: Mutex<BTreeMap<String, u64>>,
}

impl StreamSource {
    pub fn new(master_seed: u64) -> Self {
        StreamSource {
            master_seed,
            used: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, tag: &str, replica: u64) -> RngStream {
        self.note(tag, replica + 1);
        RngStream::new(self.master_seed, stream_id(tag, replica))
    }

    fn note(&self, tag: &str, count: u64) {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        let entry = used.entry(tag.to_string()).or_insert(0);
        *entry = (*entry).max(count);
    }

    /// Stream families used so far: tag and number of replicas.
    pub fn usage(&self) -> BTreeMap<String, u64> {
        self.used.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Runs `f` once per replica in parallel, each on its own stream.
    /// Results come back ordered by replica index.
    pub fn replicate<T, F>(&self, tag: &str, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, &mut RngStream) -> T + Sync + Send,
    {
        self.note(tag, count);
        let seed = self.master_seed;
        (0..count)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, stream_id(tag, r));
                f(r, &mut rng)
            })
            .collect()
    }

    /// Draws `total` values, `CHUNK` per stream, in parallel. The result does
    /// not depend on the number of workers.
    pub fn draw<T, F>(&self, tag: &str, total: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut RngStream) -> T + Sync + Send,
    {
        const CHUNK: usize = 4096;
        let chunks = total.div_ceil(CHUNK) as u64;
        let parts = self.replicate(tag, chunks, |c, rng| {
            let start = c as usize * CHUNK;
            let len = CHUNK.min(total - start);
            (0..len).map(|_| f(rng)).collect::<Vec<T>>()
        });
        parts.into_iter().flatten().collect()
    }

    /// Fallible variant of [`StreamSource::draw`].
    pub fn try_draw<T, E, F>(&self, tag: &str, total: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(&mut RngStream) -> Result<T, E> + Sync + Send,
    {
        self.draw(tag, total, f).into_iter().collect()
    }
}

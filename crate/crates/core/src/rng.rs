//! Counter-based random streams.
//!
//! Every random quantity in the crate is a pure function of a 64-bit key and
//! an element index: the value at index `i` is read from a ChaCha8 keystream at
//! a fixed word offset, so it never depends on how many other values were drawn
//! or on the iteration order. Noise at a frequency is therefore identical for
//! any sampling mask, and grid generation may run in any order.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words consumed per element (two u64 = four u32 words).
const WORDS_PER_ELEMENT: u128 = 4;

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child key from a master seed and a path of tags.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019))))
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1): never returns 0 so the log in Box-Muller is finite.
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Keyed stream positioned at element granularity.
pub struct CounterStream {
    rng: ChaCha8Rng,
}

impl CounterStream {
    pub fn new(key: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(key),
        }
    }

    /// Moves to the start of element `index`.
    pub fn seek(&mut self, index: u64) {
        self.rng.set_word_pos(index as u128 * WORDS_PER_ELEMENT);
    }

    /// Reads the two raw words of the current element and advances.
    #[inline]
    fn next_element(&mut self) -> (u64, u64) {
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Uniform in (0,1) for the current element; advances one element.
    pub fn next_uniform(&mut self) -> f64 {
        unit_open(self.next_element().0)
    }

    /// Pair of independent standard normals (Box-Muller); advances one element.
    pub fn next_normal_pair(&mut self) -> (f64, f64) {
        let (a, b) = self.next_element();
        let r = (-2.0 * unit_open(a).ln()).sqrt();
        let t = std::f64::consts::TAU * unit_open(b);
        (r * t.cos(), r * t.sin())
    }
}

/// Standard normal pair for element `index` of stream `key`.
pub fn normal_pair_at(key: u64, index: u64) -> (f64, f64) {
    let mut s = CounterStream::new(key);
    s.seek(index);
    s.next_normal_pair()
}

/// Uniform (0,1) variate for element `index` of stream `key`.
pub fn uniform_at(key: u64, index: u64) -> f64 {
    let mut s = CounterStream::new(key);
    s.seek(index);
    s.next_uniform()
}

/// `len` normal pairs for elements `0..len`, identical to calling
/// [`normal_pair_at`] per index.
pub fn normal_pairs(key: u64, len: usize) -> Vec<(f64, f64)> {
    let mut s = CounterStream::new(key);
    (0..len).map(|_| s.next_normal_pair()).collect()
}

/// `len` uniforms for elements `0..len`.
pub fn uniforms(key: u64, len: usize) -> Vec<f64> {
    let mut s = CounterStream::new(key);
    (0..len).map(|_| s.next_uniform()).collect()
}

/// A seeded general-purpose generator for sampling tasks (pair selection etc).
pub fn seeded(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}

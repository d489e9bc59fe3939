//! Deterministic random-number plumbing.
//!
//! Every stochastic stage draws from its own substream derived from the
//! master seed, a stage label, and an index. Substreams are independent of
//! each other and of the parallelism degree, which keeps outputs byte-stable:
//! the seed bytes are `SHA-256(master_le || 0 || label || 0 || index_le)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// The RNG used everywhere; fixed algorithm so streams are stable across
/// platforms and releases.
pub type Stream = rand_chacha::ChaCha12Rng;

/// Derive the substream for `(master, label, index)`.
pub fn substream(master: u64, label: &str, index: u64) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    Stream::from_seed(digest)
}

/// Derive a plain integer seed (for operations that take `seed: u64`).
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Stream seeded directly from an integer (already-derived seeds).
pub fn stream_from(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// Pack a (layout, inner) index pair into one substream index.
pub fn pack_index(layout: usize, inner: usize) -> u64 {
    ((layout as u64) << 32) | (inner as u64 & 0xffff_ffff)
}

/// One draw of a circularly-symmetric complex Gaussian CN(0, `var`):
/// real and imaginary parts are independent N(0, var/2).
pub fn complex_gaussian(rng: &mut Stream, var: f64) -> Complex64 {
    let scale = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

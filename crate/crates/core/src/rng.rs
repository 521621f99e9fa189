//! Seed lineage and per-slot random streams.
//!
//! Every random quantity in the crate is drawn from a stream whose seed is a
//! pure function of a master seed and a path of integer labels. Streams are
//! never shared between slots, so the order in which worker threads visit
//! slots cannot change any draw.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used for every stream in the crate.
pub type Stream = Xoshiro256PlusPlus;

/// Label namespaces for [`derive_seed`].
pub mod domain {
    pub const SLOTS: u64 = 0x51_07;
    pub const INIT: u64 = 0x1A_17;
    pub const GUARD: u64 = 0x6A_4D;
    pub const REPLICA: u64 = 0x4E_91;
    pub const CELL: u64 = 0xCE_11;
    pub const BOOTSTRAP: u64 = 0xB0_07;
    pub const TRUTH: u64 = 0x7A_0E;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and `label` without touching any stream.
#[inline]
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(label.wrapping_add(GOLDEN_GAMMA)))
}

/// Derives a seed along a path of labels.
pub fn derive_path(parent: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(parent, |seed, &l| derive_seed(seed, l))
}

/// A fresh stream for `seed`.
pub fn stream(seed: u64) -> Stream {
    Stream::seed_from_u64(seed)
}

/// The dedicated stream of slot `slot` under `master_seed`.
pub fn slot_stream(master_seed: u64, slot: u64) -> Stream {
    stream(derive_path(master_seed, &[domain::SLOTS, slot]))
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    ((rng.next_u64() >> 11) as f64 + 0.5) * SCALE
}

//! Deterministic seed derivation.
//!
//! Experiment harnesses fan one root seed out into many independent
//! child seeds (one per replica, per trajectory, per trial). The rule is
//! fixed so that parallel and sequential execution assign identical seeds:
//! `child = splitmix64(seed XOR index * PHI64)` where `PHI64` is the
//! 64-bit golden-ratio constant.

const PHI64: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive the child seed for `index` under root `seed`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(PHI64);
    z = z.wrapping_add(PHI64);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

//! Per-drop seed derivation.
//!
//! Drop `d` of a run with master seed `s` uses
//! `drop_seed(s, d) = splitmix64(s ^ splitmix64(d))` to seed a ChaCha8 stream.
//! The seed depends only on `(s, d)`, so results do not depend on how drops
//! are spread across worker threads.

/// One step of the SplitMix64 output function applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn drop_seed(master_seed: u64, drop_index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(drop_index))
}

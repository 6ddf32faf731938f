//! Counter-based expansion of one global seed into independent substreams.
//!
//! Every stochastic task (input generation, per-block frequency draws,
//! measurement noise, per-segment multistart jitter, predictive draws) owns a
//! substream keyed by `(domain, index)`. Substream seeds depend only on the
//! global seed and the key, never on execution order, which keeps the whole
//! pipeline independent of the worker count.

/// Named substream domains.
pub mod domain {
    pub const GWN_INPUT: u64 = 1;
    pub const FREQUENCY_DRAWS: u64 = 2;
    pub const MEASUREMENT_NOISE: u64 = 3;
    pub const SEGMENT_MULTISTART: u64 = 4;
    pub const PREDICTIVE_DRAWS: u64 = 5;
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the substream seed for `(domain, index)` under `seed`.
pub fn substream(seed: u64, domain: u64, index: u64) -> u64 {
    mix(mix(mix(seed) ^ domain) ^ index)
}

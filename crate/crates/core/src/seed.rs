//! Counter-based seed derivation.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded through
//! [`derive_seed`]. The derivation is a fixed chain of SplitMix64 finalizers:
//!
//! ```text
//! derive_seed(base, domain, index) = mix(mix(mix(base) ^ domain) ^ index)
//! ```
//!
//! with `mix` the SplitMix64 output function (golden-gamma increment followed
//! by the 30/27/31 xor-shift-multiply finalizer). The domain constants below
//! separate trace indices, channel stages and sweep cells. Changing any of
//! these changes every generated trace, so they are frozen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TRACE_DOMAIN: u64 = 0x7472_6163_6500_0001;
pub const STAGE_DOMAIN: u64 = 0x7374_6167_6500_0002;
pub const CELL_DOMAIN: u64 = 0x6365_6c6c_0000_0003;
pub const TRIAL_DOMAIN: u64 = 0x7472_6961_6c00_0004;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn derive_seed(base: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ domain) ^ index)
}

/// Seed of trace `t` within a trace set generated from `master`.
pub fn trace_seed(master: u64, t: u64) -> u64 {
    derive_seed(master, TRACE_DOMAIN, t)
}

/// Seed of channel stage `stage` (position in the stage order) for one trace.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    derive_seed(seed, STAGE_DOMAIN, stage)
}

/// Seed of an independent Monte Carlo trial.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    derive_seed(master, TRIAL_DOMAIN, trial)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

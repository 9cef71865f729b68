//! Seeded random number generation.
//!
//! Every random draw in the crate goes through [`Rng`], a ChaCha8 stream cipher
//! generator. Seeds are expanded with [`derive_seed`] so that independent parts of
//! an experiment (data, initialization, fold assignment) use unrelated streams.

use rand::SeedableRng;

/// The generator used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Name recorded in run manifests so results can be replicated elsewhere.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64), normals via rand_distr 0.5 StandardNormal";

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a tag using the splitmix64 finalizer.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

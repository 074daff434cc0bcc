//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`). The 64-bit
//! seed is expanded into the 256-bit ChaCha key by `SeedableRng::seed_from_u64`
//! (a PCG32 expansion fixed by `rand_core`), so draws are identical across
//! platforms and thread counts. Labeled sub-streams reuse the same key and
//! select the ChaCha stream number from the FNV-1a hash of the label, which
//! gives independent, reproducible streams for e.g. batch selection versus
//! instance generation under a single user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SihtRng = ChaCha8Rng;

/// Stream for `seed` on the default (zero) ChaCha stream.
pub fn seeded_rng(seed: u64) -> SihtRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for `seed` on the ChaCha stream selected by `label`.
pub fn substream(seed: u64, label: &str) -> SihtRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

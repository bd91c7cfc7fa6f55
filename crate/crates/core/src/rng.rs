use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used for initialization, sampling and augmentation.
pub type SpRng = ChaCha8Rng;

pub fn seed_rng(seed: u64) -> SpRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for a sub-stream identified by `(seed, stream, index)`.
///
/// Streams let independent consumers (initialization, sample order, per-sample
/// augmentation) draw from the same run seed without depending on each other's
/// consumption.
pub fn derive_rng(seed: u64, stream: u64, index: u64) -> SpRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(index)));
    rng.set_stream(stream);
    rng
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

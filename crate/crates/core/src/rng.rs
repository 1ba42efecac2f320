//! Counter-based random streams.
//!
//! Every Monte Carlo unit (a scenario row, a back-test day) draws from its own
//! ChaCha stream selected by `(seed, stream id)`, so results are identical no
//! matter how rows are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `id` of the generator keyed by `seed`.
pub fn substream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derives a child seed for a labelled sub-computation, e.g. one back-test day.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform on the open interval (0, 1).
pub(crate) fn open01<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Unit exponential by inversion.
pub(crate) fn exp1<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    -open01(rng).ln()
}

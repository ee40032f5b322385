use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

/// Which count series a random stream belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Local = 0,
    Global = 1,
}

/// Subset index reserved for the reference measurement.
pub const REFERENCE_SUBSET: u32 = u32::MAX;

/// Independent random stream for one (delay, subset, series) cell. Streams depend
/// only on their coordinates, so evaluation order never changes a draw.
pub fn stream_rng(seed: u64, delay_index: u32, subset_index: u32, kind: StreamKind) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    // injective for delay indices below 2³¹
    let stream = (u64::from(delay_index) << 33) | (u64::from(subset_index) << 1) | kind as u64;
    rng.set_stream(stream);
    rng
}

/// Poisson draw with mean `expected`. Non-positive means give 0.
pub fn sample_counts<R: Rng + ?Sized>(expected: f64, rng: &mut R) -> u64 {
    if !(expected > 0.0) {
        return 0;
    }
    match Poisson::new(expected) {
        Ok(dist) => {
            let x: f64 = dist.sample(rng);
            x as u64
        }
        // beyond the sampler's range the relative shot noise is negligible
        Err(_) => expected.round() as u64,
    }
}

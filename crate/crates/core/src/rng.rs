//! Named random sub-streams derived from a single run seed.
//!
//! Every consumer of randomness gets its own ChaCha stream so that changing
//! how much randomness one stage uses never shifts another stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    /// Weight initialisation.
    Init = 1,
    /// Poisson encoding of training inputs.
    Encoding = 2,
    /// Dataset pairing and shuffles.
    Pairing = 3,
    /// Synthetic spectrogram noise.
    Synthetic = 4,
    /// Poisson encoding during evaluation and synthesis.
    Evaluation = 5,
    /// Poisson encoding while extracting hidden-state maps.
    Hidden = 6,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

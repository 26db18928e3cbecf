//! Seeded random streams. Every chain owns its streams; nothing is shared.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::state::GraphState;

pub type ChainRng = ChaCha8Rng;

/// Stream ids used by the sampler so that ancestral noise and controller
/// draws never interleave.
pub const NOISE_STREAM: u64 = 0;
pub const CONTROL_STREAM: u64 = 1;

pub fn seeded(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// i.i.d. standard normal on every free coordinate: the feature block and the
/// strict upper triangle (mirrored implicitly), zero diagonal.
pub fn standard_normal_state<R: Rng + ?Sized>(n: usize, f: usize, rng: &mut R) -> GraphState {
    let mut g = GraphState::zeros(n, f);
    for v in g.as_mut_slice() {
        *v = rng.sample(StandardNormal);
    }
    g
}

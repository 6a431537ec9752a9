use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every draw in the simulator.
pub type SimRng = ChaCha8Rng;

/// A (seed, stream-id) pair naming one independent ChaCha stream.
///
/// Each frame trial gets its own stream id, so the draws of a trial do not
/// depend on which worker runs it or in which order trials are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream id for frame `frame` of the sweep point with `ka` active users.
    pub fn for_frame(seed: u64, ka: usize, frame: u64) -> Self {
        Self::new(seed, ((ka as u64) << 32) | (frame & 0xffff_ffff))
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

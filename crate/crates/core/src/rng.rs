//! Counter-addressed random streams.
//!
//! Every random draw in a run is addressed by `(seed, stream, step)`. The
//! stream selects an independent ChaCha8 keystream and the step selects a
//! fixed-size window inside it, so the numbers an agent sees at step `t` do
//! not depend on what any other agent drew, on how many draws earlier steps
//! consumed, or on which thread executes the run.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::Scalar;

/// 32-bit words reserved per coordinate per step. A standard normal draw
/// consumes two words except on the rare ziggurat rejections.
const WORDS_PER_COORD: u128 = 16;

const ORACLE_TAG: u64 = 1 << 63;
const WARM_START_TAG: u64 = 1 << 62;
const AUX_TAG: u64 = 1 << 61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    /// Gradient noise of agent `k` (0 is the main agent).
    Agent(usize),
    /// Noise of the bias oracle.
    Oracle,
    /// Extra first-round gradient samples of agent `k` used to warm-start
    /// the bias estimate.
    WarmStart(usize),
    /// Anything else a caller needs (random initial points in tests, ...).
    Aux(u64),
}

impl StreamId {
    fn word(self) -> u64 {
        match self {
            StreamId::Agent(k) => k as u64,
            StreamId::Oracle => ORACLE_TAG,
            StreamId::WarmStart(k) => WARM_START_TAG | k as u64,
            StreamId::Aux(v) => AUX_TAG | (v & (AUX_TAG - 1)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
    window: u128,
}

impl NoiseStream {
    /// Stream for draws of dimension `dim` per step.
    pub fn new(seed: u64, id: StreamId, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id.word());
        Self {
            rng,
            window: WORDS_PER_COORD * dim.max(1) as u128,
        }
    }

    /// Positions the stream at the start of the window for `step`.
    pub fn at(&mut self, step: u64) -> &mut Self {
        self.rng.set_word_pos(step as u128 * self.window);
        self
    }

    pub fn standard_normal<T: Scalar>(&mut self) -> T {
        let z: f64 = self.rng.sample(StandardNormal);
        T::lit(z)
    }
}

impl RngCore for NoiseStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_windows_are_independent_of_consumption() {
        let mut a = NoiseStream::new(7, StreamId::Agent(0), 1);
        let mut b = NoiseStream::new(7, StreamId::Agent(0), 1);
        // a draws a lot at step 3, b draws nothing; both agree at step 4.
        a.at(3);
        for _ in 0..5 {
            let _: f64 = a.standard_normal();
        }
        let x: f64 = a.at(4).standard_normal();
        let y: f64 = b.at(4).standard_normal();
        assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn streams_differ() {
        let x: f64 = NoiseStream::new(1, StreamId::Agent(0), 1).at(0).standard_normal();
        let y: f64 = NoiseStream::new(1, StreamId::Agent(1), 1).at(0).standard_normal();
        let z: f64 = NoiseStream::new(1, StreamId::Oracle, 1).at(0).standard_normal();
        let w: f64 = NoiseStream::new(2, StreamId::Agent(0), 1).at(0).standard_normal();
        assert_ne!(x, y);
        assert_ne!(x, z);
        assert_ne!(x, w);
    }
}

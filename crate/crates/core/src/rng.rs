//! Seeded random streams.
//!
//! Each station owns independent streams per purpose, all derived from the
//! run's master seed through ChaCha's native stream selector. Adding a
//! station never shifts the draws seen by the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{SimError, SimResult};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Backoff = 1,
    Arrival = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamId {
    pub station: u32,
    pub purpose: Purpose,
}

impl StreamId {
    fn as_u64(self) -> u64 {
        ((self.station as u64) << 8) | self.purpose as u64
    }
}

#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id.as_u64());
        RngStream { rng }
    }

    /// Uniform integer on the inclusive interval `[lo, hi]`.
    pub fn draw_uniform_int(&mut self, lo: u64, hi: u64) -> SimResult<u64> {
        if lo > hi {
            return Err(SimError::EmptyInterval { lo, hi });
        }
        Ok(self.rng.gen_range(lo..=hi))
    }

    /// Exponential duration with the given mean, rounded to the nearest
    /// microsecond and never shorter than one microsecond.
    pub fn draw_exponential(&mut self, mean: SimTime) -> SimTime {
        debug_assert!(mean > SimTime::ZERO);
        // 1 - u lies in (0, 1], keeping ln finite.
        let u: f64 = 1.0 - self.rng.gen::<f64>();
        let x = -(mean.as_us() as f64) * u.ln();
        SimTime::from_us((x.round() as u64).max(1))
    }
}

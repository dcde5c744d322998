//! Frame arrival processes.
//!
//! Every station buffers at most one frame. Saturated sources refill the
//! buffer the instant it empties; URLLC sources wait an exponential gap after
//! each service completion (delivery or drop) before the next frame appears.

use serde::{Deserialize, Serialize};

use crate::medium::StaId;
use crate::rng::{Purpose, RngStream, StreamId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceConfig {
    Saturated,
    ExpAfterSuccess { mean_interarrival: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceOutcome {
    Delivered,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextArrival {
    /// Enqueue a new frame now.
    Immediate,
    At(SimTime),
}

#[derive(Debug, Clone)]
pub struct TrafficSource {
    config: SourceConfig,
    rng: RngStream,
}

impl TrafficSource {
    pub fn new(config: SourceConfig, sta: StaId, seed: u64) -> Self {
        TrafficSource {
            config,
            rng: RngStream::new(
                seed,
                StreamId {
                    station: sta.0,
                    purpose: Purpose::Arrival,
                },
            ),
        }
    }

    pub fn config(&self) -> SourceConfig {
        self.config
    }

    /// First arrival: t=0 for saturated sources, uniform in `[0, mean)`
    /// otherwise so that stations do not start in lockstep.
    pub fn first_arrival(&mut self) -> SimTime {
        match self.config {
            SourceConfig::Saturated => SimTime::ZERO,
            SourceConfig::ExpAfterSuccess { mean_interarrival } => {
                let hi = mean_interarrival.as_us().saturating_sub(1);
                SimTime::from_us(
                    self.rng
                        .draw_uniform_int(0, hi)
                        .expect("interval is never empty"),
                )
            }
        }
    }

    /// Called when the head frame leaves the station. Drops regenerate the
    /// same way as deliveries so a source never goes silent.
    pub fn on_service_complete(&mut self, _outcome: ServiceOutcome, at: SimTime) -> NextArrival {
        match self.config {
            SourceConfig::Saturated => NextArrival::Immediate,
            SourceConfig::ExpAfterSuccess { mean_interarrival } => {
                NextArrival::At(at + self.rng.draw_exponential(mean_interarrival))
            }
        }
    }
}

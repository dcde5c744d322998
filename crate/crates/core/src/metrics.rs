//! Per-run statistics.
//!
//! Frame counters and delay samples only include frames that arrived after
//! the warm-up boundary. Regular throughput counts payload delivered after
//! warm-up; per-attempt counters (collisions, preemptions) count attempts
//! whose airtime ended after warm-up.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::edca::Role;
use crate::medium::{StaId, TxOutcome};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Legacy,
    Proposed,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Legacy => "legacy",
            Scheme::Proposed => "proposed",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "legacy" => Some(Scheme::Legacy),
            "proposed" => Some(Scheme::Proposed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFate {
    Delivered(SimTime),
    Dropped(SimTime),
}

/// Terminal state of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub sta: StaId,
    pub role: Role,
    pub arrival: SimTime,
    pub fate: FrameFate,
    pub payload_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scheme: Scheme,
    pub m: u32,
    pub n: u32,
    pub seed: u64,
    pub sim_duration: SimTime,
    pub warmup: SimTime,
}

#[derive(Debug, Clone, Copy, Default)]
struct ClassCounters {
    arrivals: u64,
    delivered: u64,
    dropped: u64,
    collided: u64,
    preempted: u64,
}

#[derive(Debug, Clone)]
pub struct MetricsCollector {
    meta: RunMeta,
    regular: ClassCounters,
    urllc: ClassCounters,
    urllc_delays: Vec<u64>,
    regular_bits: u64,
    per_station_delivered: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mean_us: f64,
    pub median_us: u64,
    pub p95_us: u64,
    pub p99_us: u64,
    pub max_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub meta: RunMeta,
    /// Absent when no URLLC frame was delivered.
    pub urllc_delay: Option<DelayStats>,
    pub urllc_arrivals: u64,
    pub urllc_delivered: u64,
    pub urllc_dropped: u64,
    pub urllc_collided: u64,
    pub regular_throughput_bps: f64,
    pub regular_arrivals: u64,
    pub regular_delivered: u64,
    pub regular_dropped: u64,
    pub regular_preempted: u64,
    pub regular_collided: u64,
    pub channel_busy_fraction: f64,
    pub per_station_delivered: Vec<u64>,
}

pub const CSV_HEADER: &str = "scheme,M,N,seed,urllc_delay_mean_us,urllc_delay_p99_us,urllc_delivered,urllc_dropped,urllc_collided,regular_throughput_bps,regular_delivered,regular_preempted,channel_busy_fraction,sim_duration_us,warmup_us";

/// Nearest-rank percentile of an ascending slice, `pct` in (0, 100].
pub fn nearest_rank(sorted: &[u64], pct: u32) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len() as u64;
    let rank = ((pct as u64 * n).div_ceil(100)).clamp(1, n);
    Some(sorted[rank as usize - 1])
}

impl MetricsCollector {
    pub fn new(meta: RunMeta, stations: usize) -> Self {
        MetricsCollector {
            meta,
            regular: ClassCounters::default(),
            urllc: ClassCounters::default(),
            urllc_delays: Vec::new(),
            regular_bits: 0,
            per_station_delivered: vec![0; stations],
        }
    }

    fn counters(&mut self, role: Role) -> &mut ClassCounters {
        match role {
            Role::Regular => &mut self.regular,
            Role::Urllc => &mut self.urllc,
        }
    }

    fn measured(&self, t: SimTime) -> bool {
        t >= self.meta.warmup
    }

    pub fn record_arrival(&mut self, role: Role, at: SimTime) {
        if self.measured(at) {
            self.counters(role).arrivals += 1;
        }
    }

    pub fn record_frame(&mut self, rec: FrameRecord) {
        if let (Role::Regular, FrameFate::Delivered(t)) = (rec.role, rec.fate) {
            if self.measured(t) {
                self.regular_bits += rec.payload_bits;
            }
        }
        if !self.measured(rec.arrival) {
            return;
        }
        match rec.fate {
            FrameFate::Delivered(t) => {
                self.counters(rec.role).delivered += 1;
                if let Some(c) = self.per_station_delivered.get_mut(rec.sta.0 as usize) {
                    *c += 1;
                }
                if rec.role == Role::Urllc {
                    self.urllc_delays.push((t - rec.arrival).as_us());
                }
            }
            FrameFate::Dropped(_) => self.counters(rec.role).dropped += 1,
        }
    }

    /// One data transmission attempt finished (naturally or by abort).
    pub fn record_attempt(&mut self, role: Role, outcome: TxOutcome, end: SimTime) {
        if !self.measured(end) {
            return;
        }
        match outcome {
            TxOutcome::Collided => self.counters(role).collided += 1,
            TxOutcome::Aborted => self.counters(role).preempted += 1,
            TxOutcome::Clean | TxOutcome::InFlight => {}
        }
    }

    /// `busy_time` is the main-channel busy time inside the measurement window.
    pub fn finalize(mut self, busy_time: SimTime) -> RunSummary {
        let interval = self
            .meta
            .sim_duration
            .saturating_sub(self.meta.warmup)
            .as_us();
        let per_sec = |x: u64| {
            if interval == 0 {
                0.0
            } else {
                x as f64 * 1e6 / interval as f64
            }
        };
        self.urllc_delays.sort_unstable();
        let d = &self.urllc_delays;
        let urllc_delay = if d.is_empty() {
            None
        } else {
            let sum: u64 = d.iter().sum();
            Some(DelayStats {
                mean_us: sum as f64 / d.len() as f64,
                median_us: nearest_rank(d, 50).unwrap(),
                p95_us: nearest_rank(d, 95).unwrap(),
                p99_us: nearest_rank(d, 99).unwrap(),
                max_us: *d.last().unwrap(),
            })
        };
        RunSummary {
            meta: self.meta,
            urllc_delay,
            urllc_arrivals: self.urllc.arrivals,
            urllc_delivered: self.urllc.delivered,
            urllc_dropped: self.urllc.dropped,
            urllc_collided: self.urllc.collided,
            regular_throughput_bps: per_sec(self.regular_bits),
            regular_arrivals: self.regular.arrivals,
            regular_delivered: self.regular.delivered,
            regular_dropped: self.regular.dropped,
            regular_preempted: self.regular.preempted,
            regular_collided: self.regular.collided,
            channel_busy_fraction: if interval == 0 {
                0.0
            } else {
                busy_time.as_us() as f64 / interval as f64
            },
            per_station_delivered: self.per_station_delivered,
        }
    }
}

impl RunSummary {
    /// One CSV line (no trailing newline) matching [`CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        let m = &self.meta;
        let mut row = String::new();
        let _ = write!(row, "{},{},{},{},", m.scheme.as_str(), m.m, m.n, m.seed);
        match &self.urllc_delay {
            Some(d) => {
                let _ = write!(row, "{},{},", d.mean_us, d.p99_us);
            }
            None => row.push_str(",,"),
        }
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{}",
            self.urllc_delivered,
            self.urllc_dropped,
            self.urllc_collided,
            self.regular_throughput_bps,
            self.regular_delivered,
            self.regular_preempted,
            self.channel_busy_fraction,
            m.sim_duration.as_us(),
            m.warmup.as_us(),
        );
        row
    }
}

//! JSONL run traces.
//!
//! Each line is one JSON object with the event time `t` (microseconds), an
//! `ev` discriminator and event-specific fields. The first line of a trace is
//! always a `run` header and the last an `end` marker. A trace carries enough
//! information to rebuild the run's CSV row, see [`replay`].

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edca::Role;
use crate::medium::{FrameKind, StaId, TxOutcome};
use crate::metrics::{FrameFate, FrameRecord, MetricsCollector, RunMeta, RunSummary};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub t: u64,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ev", rename_all = "kebab-case")]
pub enum TraceEvent {
    Run {
        #[serde(flatten)]
        meta: RunMeta,
        stations: u32,
        detection_delay: SimTime,
        regular_payload_bits: u64,
        urllc_payload_bits: u64,
    },
    Arrival {
        sta: StaId,
        class: Role,
        frame: u64,
    },
    /// Emitted when the airtime ends: naturally, by abort, or at run end.
    Tx {
        tx: u64,
        sta: StaId,
        kind: FrameKind,
        start: u64,
        end: u64,
        outcome: TxOutcome,
    },
    ToneOn {
        sta: StaId,
        fast_path: bool,
    },
    ToneOff {
        sta: StaId,
    },
    Preempt {
        sta: StaId,
        tx: u64,
    },
    Delivered {
        sta: StaId,
        class: Role,
        frame: u64,
        arrival: u64,
    },
    Dropped {
        sta: StaId,
        class: Role,
        frame: u64,
        arrival: u64,
    },
    End,
}

pub struct TraceSink {
    out: Box<dyn Write + Send>,
}

impl TraceSink {
    pub fn new(out: Box<dyn Write + Send>) -> Self {
        TraceSink { out }
    }

    pub fn emit(&mut self, t: SimTime, event: TraceEvent) -> io::Result<()> {
        let line = TraceLine {
            t: t.as_us(),
            event,
        };
        serde_json::to_writer(&mut self.out, &line)?;
        self.out.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("trace does not start with a run header")]
    MissingHeader,
    #[error("trace has no end marker")]
    Truncated,
}

/// Length of the union of half-open intervals, clipped to `[lo, hi)`.
pub fn union_measure(intervals: &mut [(u64, u64)], lo: u64, hi: u64) -> u64 {
    intervals.sort_unstable();
    let mut total = 0;
    let mut cur: Option<(u64, u64)> = None;
    for &(s, e) in intervals.iter() {
        let (s, e) = (s.max(lo), e.min(hi));
        if s >= e {
            continue;
        }
        match cur {
            Some((cs, ce)) if s <= ce => cur = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                cur = Some((s, e));
            }
            None => cur = Some((s, e)),
        }
    }
    if let Some((cs, ce)) = cur {
        total += ce - cs;
    }
    total
}

/// Rebuilds a run summary from its trace alone.
pub fn replay(reader: impl BufRead) -> Result<RunSummary, ReplayError> {
    let mut lines = reader.lines().enumerate();
    let (meta, stations, regular_bits, urllc_bits) = match lines.next() {
        Some((i, line)) => {
            let parsed: TraceLine =
                serde_json::from_str(&line?).map_err(|source| ReplayError::Parse {
                    line: i + 1,
                    source,
                })?;
            match parsed.event {
                TraceEvent::Run {
                    meta,
                    stations,
                    regular_payload_bits,
                    urllc_payload_bits,
                    ..
                } => (meta, stations, regular_payload_bits, urllc_payload_bits),
                _ => return Err(ReplayError::MissingHeader),
            }
        }
        None => return Err(ReplayError::MissingHeader),
    };

    let mut collector = MetricsCollector::new(meta, stations as usize);
    let mut airtime = Vec::new();
    let mut ended = false;
    for (i, line) in lines {
        let parsed: TraceLine =
            serde_json::from_str(&line?).map_err(|source| ReplayError::Parse {
                line: i + 1,
                source,
            })?;
        let t = SimTime::from_us(parsed.t);
        match parsed.event {
            TraceEvent::Arrival { class, .. } => collector.record_arrival(class, t),
            TraceEvent::Tx {
                kind,
                start,
                end,
                outcome,
                ..
            } => {
                airtime.push((start, end));
                let role = match kind {
                    FrameKind::RegularData => Some(Role::Regular),
                    FrameKind::UrllcData => Some(Role::Urllc),
                    FrameKind::Ack => None,
                };
                if let Some(role) = role {
                    collector.record_attempt(role, outcome, SimTime::from_us(end));
                }
            }
            TraceEvent::Delivered {
                sta,
                class,
                arrival,
                ..
            }
            | TraceEvent::Dropped {
                sta,
                class,
                arrival,
                ..
            } => {
                let fate = if matches!(parsed.event, TraceEvent::Delivered { .. }) {
                    FrameFate::Delivered(t)
                } else {
                    FrameFate::Dropped(t)
                };
                collector.record_frame(FrameRecord {
                    sta,
                    role: class,
                    arrival: SimTime::from_us(arrival),
                    fate,
                    payload_bits: match class {
                        Role::Regular => regular_bits,
                        Role::Urllc => urllc_bits,
                    },
                });
            }
            TraceEvent::End => ended = true,
            _ => {}
        }
    }
    if !ended {
        return Err(ReplayError::Truncated);
    }
    let busy = union_measure(&mut airtime, meta.warmup.as_us(), meta.sim_duration.as_us());
    Ok(collector.finalize(SimTime::from_us(busy)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Scheme;

    #[test]
    fn line_format() {
        let line = TraceLine {
            t: 1294,
            event: TraceEvent::Delivered {
                sta: StaId(3),
                class: Role::Urllc,
                frame: 17,
                arrival: 1000,
            },
        };
        let json = serde_json::to_string(&line).unwrap();
        assert_eq!(
            json,
            r#"{"t":1294,"ev":"delivered","sta":3,"class":"urllc","frame":17,"arrival":1000}"#
        );
        assert_eq!(serde_json::from_str::<TraceLine>(&json).unwrap(), line);
    }

    #[test]
    fn run_header_round_trips() {
        let line = TraceLine {
            t: 0,
            event: TraceEvent::Run {
                meta: RunMeta {
                    scheme: Scheme::Legacy,
                    m: 5,
                    n: 10,
                    seed: 3,
                    sim_duration: SimTime::from_secs(1),
                    warmup: SimTime::ZERO,
                },
                stations: 15,
                detection_delay: SimTime::ZERO,
                regular_payload_bits: 1,
                urllc_payload_bits: 2,
            },
        };
        let json = serde_json::to_string(&line).unwrap();
        assert!(json.contains(r#""scheme":"legacy""#), "{json}");
        assert_eq!(serde_json::from_str::<TraceLine>(&json).unwrap(), line);
    }

    #[test]
    fn union_of_intervals() {
        let mut v = vec![(0, 10), (5, 15), (20, 30), (30, 31), (40, 40)];
        assert_eq!(union_measure(&mut v, 0, 100), 26);
        assert_eq!(union_measure(&mut v, 8, 25), 12);
    }

    #[test]
    fn replay_rejects_bad_input() {
        assert!(matches!(replay(&b""[..]), Err(ReplayError::MissingHeader)));
        assert!(matches!(
            replay(&b"{\"t\":0,\"ev\":\"end\"}\n"[..]),
            Err(ReplayError::MissingHeader)
        ));
        assert!(matches!(
            replay(&b"not json\n"[..]),
            Err(ReplayError::Parse { line: 1, .. })
        ));
    }
}

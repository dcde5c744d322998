//! Shared main data channel and the narrowband control channel.
//!
//! The main channel uses a no-capture collision model: a transmission is
//! clean iff its half-open airtime interval `[start, end)` intersects no other
//! transmission. Aborted transmissions keep their truncated interval for
//! overlap purposes. The control channel only carries the busy tone; any
//! number of stations may assert it at once.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StaId(pub u32);

impl fmt::Display for StaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sta{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameKind {
    RegularData,
    UrllcData,
    /// ACK sent by the access point for the exchange owned by `sta`.
    Ack,
}

impl FrameKind {
    pub fn is_data(self) -> bool {
        !matches!(self, FrameKind::Ack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TxOutcome {
    Clean,
    Collided,
    Aborted,
    /// Still on air when the run ended; the interval is truncated there.
    InFlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelTransition {
    None,
    IdleToBusy,
    BusyToIdle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmission {
    pub tx_id: TxId,
    pub sta: StaId,
    pub kind: FrameKind,
    pub start: SimTime,
    pub duration: SimTime,
    pub aborted_at: Option<SimTime>,
}

impl Transmission {
    pub fn planned_end(&self) -> SimTime {
        self.start + self.duration
    }

    /// End of the airtime actually used.
    pub fn end(&self) -> SimTime {
        self.aborted_at.unwrap_or_else(|| self.planned_end())
    }
}

#[derive(Debug)]
struct ActiveTx {
    tx: Transmission,
    overlaps: Vec<TxId>,
}

#[derive(Debug, Default)]
pub struct BusyToneRegister {
    /// Asserting stations and the instant each raised its tone.
    asserting: BTreeMap<StaId, SimTime>,
    since: Option<SimTime>,
}

impl BusyToneRegister {
    pub fn is_busy(&self) -> bool {
        !self.asserting.is_empty()
    }

    pub fn is_asserting(&self, sta: StaId) -> bool {
        self.asserting.contains_key(&sta)
    }

    /// True if some tone raised strictly before `now` is still on. Tones
    /// raised at `now` itself were not yet sensible to a station deciding at
    /// the same instant.
    pub fn asserted_before(&self, now: SimTime) -> bool {
        self.asserting.values().any(|&at| at < now)
    }

    /// Instant of the most recent idle-to-busy transition, if busy.
    pub fn busy_since(&self) -> Option<SimTime> {
        self.since
    }

    pub fn asserters(&self) -> usize {
        self.asserting.len()
    }
}

#[derive(Debug)]
pub struct Medium {
    active: BTreeMap<TxId, ActiveTx>,
    data_sender: BTreeMap<StaId, TxId>,
    next_tx: u64,
    busy_since: Option<SimTime>,
    measure_from: SimTime,
    busy_measured: SimTime,
    tones: BusyToneRegister,
}

impl Medium {
    /// `measure_from` is the start of the window over which busy time is
    /// accumulated (the warm-up boundary).
    pub fn new(measure_from: SimTime) -> Self {
        Medium {
            active: BTreeMap::new(),
            data_sender: BTreeMap::new(),
            next_tx: 0,
            busy_since: None,
            measure_from,
            busy_measured: SimTime::ZERO,
            tones: BusyToneRegister::default(),
        }
    }

    pub fn is_main_busy(&self) -> bool {
        !self.active.is_empty()
    }

    pub fn is_control_busy(&self) -> bool {
        self.tones.is_busy()
    }

    pub fn tones(&self) -> &BusyToneRegister {
        &self.tones
    }

    pub fn transmission(&self, tx: TxId) -> Option<&Transmission> {
        self.active.get(&tx).map(|a| &a.tx)
    }

    /// Main-channel busy time accumulated inside the measurement window.
    pub fn busy_time(&self) -> SimTime {
        self.busy_measured
    }

    pub fn begin_transmission(
        &mut self,
        sta: StaId,
        kind: FrameKind,
        duration: SimTime,
        now: SimTime,
    ) -> SimResult<(TxId, ChannelTransition)> {
        if kind.is_data() && self.data_sender.contains_key(&sta) {
            return Err(SimError::violation(
                now,
                format!("{sta} started a second transmission while on air"),
            ));
        }
        let tx_id = TxId(self.next_tx);
        self.next_tx += 1;

        let mut overlaps = Vec::new();
        for (id, other) in self.active.iter_mut() {
            // [s, e) and [now, ..) intersect iff e > now.
            if other.tx.planned_end() > now {
                other.overlaps.push(tx_id);
                overlaps.push(*id);
            }
        }

        let transition = if self.active.is_empty() {
            self.busy_since = Some(now);
            ChannelTransition::IdleToBusy
        } else {
            ChannelTransition::None
        };
        if kind.is_data() {
            self.data_sender.insert(sta, tx_id);
        }
        self.active.insert(
            tx_id,
            ActiveTx {
                tx: Transmission {
                    tx_id,
                    sta,
                    kind,
                    start: now,
                    duration,
                    aborted_at: None,
                },
                overlaps,
            },
        );
        Ok((tx_id, transition))
    }

    /// Cuts a transmission short at `at`, which must equal `now`.
    pub fn abort_transmission(
        &mut self,
        tx_id: TxId,
        at: SimTime,
        now: SimTime,
    ) -> SimResult<(Transmission, ChannelTransition)> {
        if at != now {
            return Err(SimError::violation(
                now,
                format!("abort requested for {at}"),
            ));
        }
        let Some(mut entry) = self.active.remove(&tx_id) else {
            return Err(SimError::violation(
                now,
                format!("abort of inactive transmission {}", tx_id.0),
            ));
        };
        if at > entry.tx.planned_end() {
            return Err(SimError::violation(now, "abort after planned end"));
        }
        entry.tx.aborted_at = Some(at);
        // Partners that started at or after the cut no longer overlap.
        for partner in &entry.overlaps {
            if let Some(p) = self.active.get_mut(partner) {
                if p.tx.start >= at {
                    p.overlaps.retain(|id| *id != tx_id);
                }
            }
        }
        let transition = self.release(&entry.tx, now);
        Ok((entry.tx, transition))
    }

    /// Completes a transmission at its planned end and classifies it.
    pub fn end_transmission(
        &mut self,
        tx_id: TxId,
        now: SimTime,
    ) -> SimResult<(Transmission, TxOutcome, ChannelTransition)> {
        let Some(entry) = self.active.remove(&tx_id) else {
            return Err(SimError::violation(
                now,
                format!("end of inactive transmission {}", tx_id.0),
            ));
        };
        if entry.tx.planned_end() != now {
            return Err(SimError::violation(
                now,
                format!("transmission {} ended off schedule", tx_id.0),
            ));
        }
        let outcome = if entry.overlaps.is_empty() {
            TxOutcome::Clean
        } else {
            TxOutcome::Collided
        };
        let transition = self.release(&entry.tx, now);
        Ok((entry.tx, outcome, transition))
    }

    fn release(&mut self, tx: &Transmission, now: SimTime) -> ChannelTransition {
        if tx.kind.is_data() {
            self.data_sender.remove(&tx.sta);
        }
        if self.active.is_empty() {
            self.close_busy_period(now);
            ChannelTransition::BusyToIdle
        } else {
            ChannelTransition::None
        }
    }

    fn close_busy_period(&mut self, now: SimTime) {
        if let Some(since) = self.busy_since.take() {
            let from = since.max(self.measure_from);
            if now > from {
                self.busy_measured += now - from;
            }
        }
    }

    pub fn busy_tone_set(
        &mut self,
        sta: StaId,
        on: bool,
        now: SimTime,
    ) -> SimResult<ChannelTransition> {
        let was_busy = self.tones.is_busy();
        if on {
            if self.tones.asserting.insert(sta, now).is_some() {
                return Err(SimError::violation(
                    now,
                    format!("{sta} already asserts the tone"),
                ));
            }
            if was_busy {
                Ok(ChannelTransition::None)
            } else {
                self.tones.since = Some(now);
                Ok(ChannelTransition::IdleToBusy)
            }
        } else {
            if self.tones.asserting.remove(&sta).is_none() {
                return Err(SimError::violation(
                    now,
                    format!("{sta} is not asserting the tone"),
                ));
            }
            if self.tones.is_busy() {
                Ok(ChannelTransition::None)
            } else {
                self.tones.since = None;
                Ok(ChannelTransition::BusyToIdle)
            }
        }
    }

    /// Closes the run: returns transmissions still on air, truncated at `now`,
    /// and folds the open busy period into the busy-time total.
    pub fn finish(&mut self, now: SimTime) -> Vec<Transmission> {
        self.close_busy_period(now);
        let open: Vec<Transmission> = std::mem::take(&mut self.active)
            .into_values()
            .map(|a| {
                let mut tx = a.tx;
                tx.duration = now - tx.start;
                tx
            })
            .collect();
        self.data_sender.clear();
        open
    }
}

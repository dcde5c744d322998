//! EDCA channel access for a single-AC station.
//!
//! A station draws a backoff from `[0, CW]`, waits until the main channel has
//! been idle for AIFS, then counts one slot per idle slot time. Any busy
//! period freezes the counter; counting restarts only after another full
//! AIFS of idle. The countdown is evaluated in closed form: the simulator
//! schedules a single expiry event at `start + counter * slot` and, when the
//! channel turns busy first, [`slots_elapsed`] tells how many boundaries
//! passed.

use serde::{Deserialize, Serialize};

use crate::engine::EventHandle;
use crate::error::{SimError, SimResult};
use crate::medium::{FrameKind, StaId, TxId};
use crate::rng::{Purpose, RngStream, StreamId};
use crate::time::SimTime;

/// Upper bound on a regular data frame's airtime.
pub const MAX_DATA_AIRTIME: SimTime = SimTime::from_us(5484);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhyConstants {
    pub slot_time: SimTime,
    pub sifs: SimTime,
    pub ack_timeout_guard: SimTime,
}

impl Default for PhyConstants {
    /// 802.11 OFDM timing.
    fn default() -> Self {
        PhyConstants {
            slot_time: SimTime::from_us(9),
            sifs: SimTime::from_us(16),
            ack_timeout_guard: SimTime::from_us(9),
        }
    }
}

impl PhyConstants {
    /// Problems keyed by the offending config key.
    pub fn validate(&self) -> Vec<(&'static str, String)> {
        let mut problems = Vec::new();
        for (key, v) in [
            ("slot_us", self.slot_time),
            ("sifs_us", self.sifs),
            ("ack_timeout_guard_us", self.ack_timeout_guard),
        ] {
            if v == SimTime::ZERO {
                problems.push((key, format!("{key} must be positive")));
            }
        }
        problems
    }
}

/// Contention parameters and frame sizes of one access category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdcaParams {
    pub aifsn: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub data_airtime: SimTime,
    pub ack_airtime: SimTime,
    pub payload_bits: u64,
}

impl EdcaParams {
    /// Best-effort AC carrying one large aggregate per frame.
    pub fn regular_default() -> Self {
        EdcaParams {
            aifsn: 3,
            cw_min: 15,
            cw_max: 1023,
            retry_limit: 7,
            data_airtime: SimTime::from_us(2000),
            ack_airtime: SimTime::from_us(44),
            payload_bits: 129_760,
        }
    }

    /// Highest-priority AC for URLLC frames.
    pub fn urllc_default() -> Self {
        EdcaParams {
            aifsn: 2,
            cw_min: 3,
            cw_max: 15,
            retry_limit: 7,
            data_airtime: SimTime::from_us(200),
            ack_airtime: SimTime::from_us(44),
            payload_bits: 12_000,
        }
    }

    /// Problems keyed by the offending config key.
    pub fn validate(&self) -> Vec<(&'static str, String)> {
        let mut problems = Vec::new();
        if self.aifsn < 2 {
            problems.push((
                "aifsn",
                format!("aifsn must be at least 2 (got {})", self.aifsn),
            ));
        }
        for (key, v) in [("cw_min", self.cw_min), ("cw_max", self.cw_max)] {
            if !(v as u64 + 1).is_power_of_two() {
                problems.push((key, format!("{key} must have the form 2^k-1 (got {v})")));
            }
        }
        if self.cw_min > self.cw_max {
            problems.push((
                "cw_min",
                format!("cw_min ({}) exceeds cw_max ({})", self.cw_min, self.cw_max),
            ));
        }
        if self.data_airtime == SimTime::ZERO {
            problems.push(("data_airtime_us", "data_airtime_us must be positive".into()));
        }
        if self.ack_airtime == SimTime::ZERO {
            problems.push(("ack_airtime_us", "ack_airtime_us must be positive".into()));
        }
        problems
    }
}

/// AIFS = SIFS + AIFSN x slot.
pub fn aifs(params: &EdcaParams, phy: &PhyConstants) -> SimTime {
    phy.sifs + phy.slot_time * params.aifsn as u64
}

/// Contention window after `retry` failed attempts:
/// `min((cw_min + 1) * 2^retry - 1, cw_max)`.
pub fn contention_window(params: &EdcaParams, retry: u32) -> u32 {
    let base = params.cw_min as u64 + 1;
    let grown = if retry >= 32 {
        u64::MAX
    } else {
        base.saturating_mul(1u64 << retry) - 1
    };
    grown.min(params.cw_max as u64) as u32
}

/// Slot boundaries crossed between the countdown start and `now`.
pub fn slots_elapsed(start: SimTime, now: SimTime, slot: SimTime) -> u64 {
    if now <= start {
        0
    } else {
        (now - start).as_us() / slot.as_us()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Regular,
    Urllc,
}

impl Role {
    pub fn data_kind(self) -> FrameKind {
        match self {
            Role::Regular => FrameKind::RegularData,
            Role::Urllc => FrameKind::UrllcData,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxState {
    Idle,
    /// Has a frame but is not counting (channel busy, AIFS pending, or suspended).
    Deferring,
    /// Countdown scheduled.
    Backoff,
    /// Tone asserted on an idle control channel; data goes out after AIFS.
    FastPathWait,
    Transmitting,
    AwaitAck,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub id: u64,
    pub source: StaId,
    pub kind: FrameKind,
    pub arrival_time: SimTime,
    pub delivery_time: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeOutcome {
    AckReceived,
    AckTimeout,
    /// Regular transmission aborted by a busy tone.
    Preempted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextStep {
    Delivered(Frame),
    Retry,
    Dropped(Frame),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotAction {
    Wait,
    Decrement,
    Transmit,
}

/// A scheduled countdown: counting starts at `start`, the station transmits
/// at `expiry` unless the channel turns busy first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Countdown {
    pub start: SimTime,
    pub expiry: SimTime,
    pub handle: EventHandle,
}

#[derive(Debug, Clone)]
pub struct Station {
    pub id: StaId,
    pub role: Role,
    pub params: EdcaParams,
    pub tx_state: TxState,
    pub backoff_counter: u32,
    pub retry_count: u32,
    pub cw_current: u32,
    pub head_frame: Option<Frame>,
    /// Busy-tone suspension (regular stations only).
    pub suspended: bool,
    /// When the station last (re)entered contention.
    pub ready_at: SimTime,
    pub countdown: Option<Countdown>,
    pub current_tx: Option<TxId>,
    pub pending: Option<EventHandle>,
    rng: RngStream,
}

impl Station {
    pub fn new(id: StaId, role: Role, params: EdcaParams, seed: u64) -> Self {
        Station {
            id,
            role,
            params,
            tx_state: TxState::Idle,
            backoff_counter: 0,
            retry_count: 0,
            cw_current: params.cw_min,
            head_frame: None,
            suspended: false,
            ready_at: SimTime::ZERO,
            countdown: None,
            current_tx: None,
            pending: None,
            rng: RngStream::new(
                seed,
                StreamId {
                    station: id.0,
                    purpose: Purpose::Backoff,
                },
            ),
        }
    }

    pub fn invariants_hold(&self) -> bool {
        self.cw_current == contention_window(&self.params, self.retry_count)
            && (!self.suspended || self.role == Role::Regular)
            && self.backoff_counter <= self.cw_current
    }

    fn draw_backoff(&mut self) -> SimResult<()> {
        self.backoff_counter = self.rng.draw_uniform_int(0, self.cw_current as u64)? as u32;
        Ok(())
    }

    /// Installs a new head frame and draws a fresh backoff.
    pub fn enqueue_frame(&mut self, frame: Frame, now: SimTime) -> SimResult<()> {
        if self.head_frame.is_some() {
            return Err(SimError::violation(
                now,
                format!("{} already holds a frame", self.id),
            ));
        }
        self.head_frame = Some(frame);
        self.draw_backoff()?;
        self.tx_state = TxState::Deferring;
        self.ready_at = now;
        Ok(())
    }

    /// Countdown expiry when counting starts at `start`.
    pub fn expiry_from(&self, start: SimTime, slot: SimTime) -> SimTime {
        start + slot * self.backoff_counter as u64
    }

    pub fn arm(&mut self, countdown: Countdown) {
        self.countdown = Some(countdown);
        self.tx_state = TxState::Backoff;
    }

    fn stop_countdown(&mut self, now: SimTime, slot: SimTime) -> Option<EventHandle> {
        let cd = self.countdown.take()?;
        let elapsed = slots_elapsed(cd.start, now, slot).min(self.backoff_counter as u64);
        self.backoff_counter -= elapsed as u32;
        self.tx_state = TxState::Deferring;
        Some(cd.handle)
    }

    /// Main channel turned busy at `now`. A countdown expiring exactly now
    /// still fires: the slot before it was idle. Returns the expiry event to
    /// cancel, if any.
    pub fn freeze(&mut self, now: SimTime, slot: SimTime) -> Option<EventHandle> {
        match self.countdown {
            Some(cd) if cd.expiry == now => None,
            Some(_) => self.stop_countdown(now, slot),
            None => None,
        }
    }

    /// Busy tone detected: stop counting for the whole tone, including a
    /// countdown that would expire at this very instant.
    pub fn suspend(&mut self, now: SimTime, slot: SimTime) -> Option<EventHandle> {
        debug_assert_eq!(self.role, Role::Regular);
        self.suspended = true;
        self.stop_countdown(now, slot)
    }

    /// Per-slot view of the countdown: AIFS just elapsed.
    pub fn on_aifs_elapsed(&self) -> SlotAction {
        if self.backoff_counter == 0 {
            SlotAction::Transmit
        } else {
            SlotAction::Wait
        }
    }

    /// Per-slot view of the countdown: one more idle slot elapsed.
    pub fn on_idle_slot_boundary(&mut self) -> SlotAction {
        if self.suspended || self.backoff_counter == 0 {
            return if self.suspended {
                SlotAction::Wait
            } else {
                SlotAction::Transmit
            };
        }
        self.backoff_counter -= 1;
        if self.backoff_counter == 0 {
            SlotAction::Transmit
        } else {
            SlotAction::Decrement
        }
    }

    /// Resolves the end of a frame exchange.
    pub fn complete_exchange(
        &mut self,
        outcome: ExchangeOutcome,
        now: SimTime,
    ) -> SimResult<NextStep> {
        match outcome {
            ExchangeOutcome::AckReceived => {
                self.expect_state(TxState::AwaitAck, now)?;
                let frame = self.take_head(now)?;
                self.reset_window();
                Ok(NextStep::Delivered(frame))
            }
            ExchangeOutcome::AckTimeout => {
                self.expect_state(TxState::AwaitAck, now)?;
                self.retry_count += 1;
                if self.retry_count > self.params.retry_limit {
                    let frame = self.take_head(now)?;
                    self.reset_window();
                    return Ok(NextStep::Dropped(frame));
                }
                self.cw_current = contention_window(&self.params, self.retry_count);
                self.recontend(now)?;
                Ok(NextStep::Retry)
            }
            ExchangeOutcome::Preempted => {
                self.expect_state(TxState::Transmitting, now)?;
                if self.role != Role::Regular {
                    return Err(SimError::violation(now, "URLLC frame preempted"));
                }
                // Preemption is not a collision: retry count and CW stay put.
                self.recontend(now)?;
                Ok(NextStep::Retry)
            }
        }
    }

    fn recontend(&mut self, now: SimTime) -> SimResult<()> {
        self.draw_backoff()?;
        self.tx_state = TxState::Deferring;
        self.ready_at = now;
        self.current_tx = None;
        Ok(())
    }

    fn reset_window(&mut self) {
        self.retry_count = 0;
        self.cw_current = self.params.cw_min;
        self.tx_state = TxState::Idle;
        self.current_tx = None;
        self.backoff_counter = 0;
    }

    fn take_head(&mut self, now: SimTime) -> SimResult<Frame> {
        self.head_frame
            .take()
            .ok_or_else(|| SimError::violation(now, format!("{} has no head frame", self.id)))
    }

    fn expect_state(&self, want: TxState, now: SimTime) -> SimResult<()> {
        if self.tx_state != want {
            return Err(SimError::violation(
                now,
                format!("{} in {:?}, expected {:?}", self.id, self.tx_state, want),
            ));
        }
        Ok(())
    }
}

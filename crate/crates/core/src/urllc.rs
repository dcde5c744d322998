//! Busy-tone priority access for URLLC frames.
//!
//! A URLLC station asserts the tone on the control channel the moment a frame
//! arrives and holds it until the frame is delivered or dropped. Regular
//! stations that sense the tone abort any data frame on air and stop counting
//! their backoff for as long as the tone lasts. A station that found the
//! control channel idle is the only URLLC contender, so it skips backoff and
//! sends its data one AIFS after raising the tone. Otherwise it contends with
//! ordinary EDCA rules against the other URLLC stations, counting idle slots
//! of the main channel.

use crate::edca::{ExchangeOutcome, NextStep, TxState};
use crate::error::{SimError, SimResult};
use crate::medium::{ChannelTransition, StaId, TxOutcome};
use crate::sim::{Event, Simulator};
use crate::time::SimTime;
use crate::trace::TraceEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToneSession {
    pub sta: StaId,
    pub started_at: SimTime,
    /// The control channel was idle when the tone went up.
    pub fast_path: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalMode {
    FastPath,
    Contend,
}

/// Access mode for a URLLC frame, decided from the control channel state
/// just before the arrival instant.
pub fn arrival_mode(control_busy: bool) -> ArrivalMode {
    if control_busy {
        ArrivalMode::Contend
    } else {
        ArrivalMode::FastPath
    }
}

/// Delay of a URLLC frame served on the fast path with a clean exchange.
pub fn fast_path_delay(aifs: SimTime, data: SimTime, sifs: SimTime, ack: SimTime) -> SimTime {
    aifs + data + sifs + ack
}

impl Simulator {
    pub(crate) fn urllc_arrival(&mut self, s: StaId, now: SimTime) -> SimResult<ArrivalMode> {
        let mode = arrival_mode(self.medium.tones().asserted_before(now));
        let transition = self.medium.busy_tone_set(s, true, now)?;
        let fast_path = mode == ArrivalMode::FastPath;
        self.tones[s.0 as usize] = Some(ToneSession {
            sta: s,
            started_at: now,
            fast_path,
        });
        self.emit(TraceEvent::ToneOn { sta: s, fast_path })?;
        if fast_path {
            self.sta(s).tx_state = TxState::FastPathWait;
            let at = now + self.aifs[s.0 as usize];
            self.queue.schedule(at, Event::FastPathTx(s))?;
        }
        if transition == ChannelTransition::IdleToBusy {
            self.broadcast_control(true, now)?;
        }
        if !fast_path {
            self.try_countdown(s, now)?;
        }
        Ok(mode)
    }

    pub(crate) fn tone_release(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        if self.tones[s.0 as usize].take().is_none() {
            return Err(SimError::violation(now, format!("{s} has no tone session")));
        }
        let transition = self.medium.busy_tone_set(s, false, now)?;
        self.emit(TraceEvent::ToneOff { sta: s })?;
        if transition == ChannelTransition::BusyToIdle {
            self.broadcast_control(false, now)?;
        }
        Ok(())
    }

    /// Delivers a control-channel transition to regular stations after the
    /// configured detection delay.
    fn broadcast_control(&mut self, busy: bool, now: SimTime) -> SimResult<()> {
        let delay = self.cfg.detection_delay;
        if delay == SimTime::ZERO {
            self.on_control_transition(busy, now)
        } else {
            self.queue
                .schedule(now + delay, Event::ControlNotify { busy })?;
            Ok(())
        }
    }

    pub(crate) fn on_control_transition(&mut self, busy: bool, now: SimTime) -> SimResult<()> {
        let slot = self.cfg.phy.slot_time;
        if busy {
            self.control.busy = true;
            for i in 0..self.stations.len() {
                let s = StaId(i as u32);
                if !self.tone_aware(s) {
                    continue;
                }
                match self.stations[i].tx_state {
                    TxState::Backoff | TxState::Deferring => {
                        if let Some(h) = self.stations[i].suspend(now, slot) {
                            self.queue.cancel(h);
                        }
                    }
                    // a frame whose airtime ends right now is complete
                    TxState::Transmitting if !self.ends_now(s, now) => self.preempt(s, now)?,
                    _ => {}
                }
            }
        } else {
            self.control.busy = false;
            self.control.idle_since = now;
            for i in 0..self.stations.len() {
                let s = StaId(i as u32);
                if self.tone_aware(s) {
                    self.stations[i].suspended = false;
                    self.try_countdown(s, now)?;
                }
            }
        }
        Ok(())
    }

    fn ends_now(&self, s: StaId, now: SimTime) -> bool {
        self.stations[s.0 as usize]
            .current_tx
            .and_then(|tx| self.medium.transmission(tx))
            .is_some_and(|t| t.planned_end() == now)
    }

    /// Aborts a regular station's data frame on tone detection.
    fn preempt(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        let i = s.0 as usize;
        let Some(tx) = self.stations[i].current_tx else {
            return Err(SimError::violation(
                now,
                format!("{s} transmitting without a frame"),
            ));
        };
        if let Some(h) = self.stations[i].pending.take() {
            self.queue.cancel(h);
        }
        let (t, transition) = self.medium.abort_transmission(tx, now, now)?;
        let went_idle = transition == ChannelTransition::BusyToIdle;
        if went_idle {
            self.note_main_idle(now);
        }
        self.emit(TraceEvent::Tx {
            tx: t.tx_id.0,
            sta: s,
            kind: t.kind,
            start: t.start.as_us(),
            end: now.as_us(),
            outcome: TxOutcome::Aborted,
        })?;
        self.emit(TraceEvent::Preempt { sta: s, tx: tx.0 })?;
        self.record_preemption(s, now);
        match self
            .sta(s)
            .complete_exchange(ExchangeOutcome::Preempted, now)?
        {
            NextStep::Retry => {}
            other => {
                return Err(SimError::violation(
                    now,
                    format!("preemption of {s} resolved to {other:?}"),
                ))
            }
        }
        self.stations[i].suspended = true;
        if went_idle {
            self.on_main_idle(now)?;
        }
        Ok(())
    }
}

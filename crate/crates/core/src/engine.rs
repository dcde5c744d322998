//! Event queue and virtual clock.
//!
//! Events are ordered by `(fire_at, seq)` where `seq` is the insertion
//! counter, so two events scheduled for the same instant fire in the order
//! they were scheduled. Cancellation is lazy: the payload is removed from the
//! pending map and the stale heap entry is skipped when it surfaces.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{SimError, SimResult};
use crate::time::SimTime;

/// Handle returned by [`EventQueue::schedule`], usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn seq(self) -> u64 {
        self.0
    }
}

#[derive(Debug)]
pub struct EventQueue<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Reverse<(SimTime, u64)>>,
    pending: HashMap<u64, E>,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            pending: HashMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events still waiting to fire.
    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Schedules `event` at `fire_at`. Scheduling in the past is a contract
    /// violation and aborts the run.
    pub fn schedule(&mut self, fire_at: SimTime, event: E) -> SimResult<EventHandle> {
        if fire_at < self.now {
            return Err(SimError::violation(
                self.now,
                format!("event scheduled in the past (fire_at={fire_at})"),
            ));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((fire_at, seq)));
        self.pending.insert(seq, event);
        Ok(EventHandle(seq))
    }

    /// Schedules `event` `delay` after the current time.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> SimResult<EventHandle> {
        self.schedule(self.now + delay, event)
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.pending.remove(&handle.0).is_some()
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.pending.contains_key(&handle.0)
    }

    /// Pops the next live event with `fire_at <= t_end` and advances the
    /// clock to its time. When nothing is left before `t_end` the clock moves
    /// to `t_end` and `None` is returned.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        while let Some(&Reverse((at, seq))) = self.heap.peek() {
            if at > t_end {
                break;
            }
            self.heap.pop();
            if let Some(ev) = self.pending.remove(&seq) {
                self.now = at;
                return Some((at, ev));
            }
        }
        if t_end > self.now {
            self.now = t_end;
        }
        None
    }

    /// Dispatches every event with `fire_at <= t_end` to `handler` in
    /// `(fire_at, seq)` order. The handler may schedule or cancel events.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> SimResult<usize>
    where
        F: FnMut(&mut EventQueue<E>, SimTime, E) -> SimResult<()>,
    {
        if t_end < self.now {
            return Err(SimError::violation(
                self.now,
                format!("run_until target {t_end} is in the past"),
            ));
        }
        let mut dispatched = 0;
        while let Some((at, ev)) = self.pop_until(t_end) {
            handler(self, at, ev)?;
            dispatched += 1;
        }
        Ok(dispatched)
    }
}

//! One simulation run: a BSS of regular and URLLC stations sharing a single
//! main channel, all within carrier-sense range of each other.
//!
//! The run owns the event queue and every piece of mutable state; nothing is
//! shared between runs. Busy-tone handling lives in [`crate::urllc`].

use crate::edca::{
    aifs, Countdown, EdcaParams, ExchangeOutcome, Frame, NextStep, PhyConstants, Role, Station,
    TxState,
};
use crate::engine::EventQueue;
use crate::error::{SimError, SimResult};
use crate::medium::{ChannelTransition, FrameKind, Medium, StaId, TxId, TxOutcome};
use crate::metrics::{FrameFate, FrameRecord, MetricsCollector, RunMeta, RunSummary, Scheme};
use crate::time::SimTime;
use crate::trace::{TraceEvent, TraceSink};
use crate::traffic::{NextArrival, ServiceOutcome, SourceConfig, TrafficSource};
use crate::urllc::ToneSession;

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub n_regular: u32,
    pub n_urllc: u32,
    pub seed: u64,
    pub sim_duration: SimTime,
    pub warmup: SimTime,
    pub phy: PhyConstants,
    pub regular: EdcaParams,
    /// URLLC access category with the busy-tone scheme enabled.
    pub urllc: EdcaParams,
    /// URLLC access category used when the scheme is disabled.
    pub legacy_urllc: EdcaParams,
    pub detection_delay: SimTime,
    pub urllc_mean_interarrival: SimTime,
}

impl RunConfig {
    pub fn new(scheme: Scheme, n_regular: u32, n_urllc: u32, seed: u64) -> Self {
        RunConfig {
            scheme,
            n_regular,
            n_urllc,
            seed,
            sim_duration: SimTime::from_secs(100),
            warmup: SimTime::from_secs(1),
            phy: PhyConstants::default(),
            regular: EdcaParams::regular_default(),
            urllc: EdcaParams::urllc_default(),
            legacy_urllc: EdcaParams::urllc_default(),
            detection_delay: SimTime::ZERO,
            urllc_mean_interarrival: SimTime::from_ms(10),
        }
    }

    pub fn with_duration(mut self, sim_duration: SimTime, warmup: SimTime) -> Self {
        self.sim_duration = sim_duration;
        self.warmup = warmup;
        self
    }

    pub fn urllc_params(&self) -> EdcaParams {
        match self.scheme {
            Scheme::Legacy => self.legacy_urllc,
            Scheme::Proposed => self.urllc,
        }
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            scheme: self.scheme,
            m: self.n_urllc,
            n: self.n_regular,
            seed: self.seed,
            sim_duration: self.sim_duration,
            warmup: self.warmup,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems: Vec<String> = self.phy.validate().into_iter().map(|(_, e)| e).collect();
        for (class, p) in [
            ("regular", &self.regular),
            ("urllc", &self.urllc),
            ("legacy_urllc", &self.legacy_urllc),
        ] {
            problems.extend(
                p.validate()
                    .into_iter()
                    .map(|(_, e)| format!("{class}: {e}")),
            );
        }
        if self.regular.data_airtime > crate::edca::MAX_DATA_AIRTIME {
            problems.push(format!(
                "regular data airtime {} exceeds the {} bound on legacy transmissions",
                self.regular.data_airtime,
                crate::edca::MAX_DATA_AIRTIME
            ));
        }
        if self.n_regular + self.n_urllc == 0 {
            problems.push("at least one station is required".into());
        }
        if self.warmup >= self.sim_duration {
            problems.push("warmup must be shorter than the simulated duration".into());
        }
        if self.urllc_mean_interarrival == SimTime::ZERO {
            problems.push("urllc mean interarrival must be positive".into());
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Event {
    Arrival(StaId),
    BackoffExpiry(StaId),
    FastPathTx(StaId),
    TxEnd(TxId),
    AckStart(StaId),
    AckTimeout(StaId),
    /// Busy-tone transition as perceived by regular stations.
    ControlNotify {
        busy: bool,
    },
}

/// Control-channel state as regular stations currently perceive it.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ControlView {
    pub busy: bool,
    pub idle_since: SimTime,
}

pub struct Simulator {
    pub(crate) cfg: RunConfig,
    pub(crate) queue: EventQueue<Event>,
    pub(crate) medium: Medium,
    pub(crate) stations: Vec<Station>,
    sources: Vec<TrafficSource>,
    pub(crate) aifs: Vec<SimTime>,
    pub(crate) tones: Vec<Option<ToneSession>>,
    pub(crate) control: ControlView,
    main_idle_since: SimTime,
    metrics: MetricsCollector,
    trace: Option<TraceSink>,
    next_frame: u64,
}

impl Simulator {
    pub fn new(cfg: RunConfig, trace: Option<TraceSink>) -> SimResult<Self> {
        let problems = cfg.validate();
        if !problems.is_empty() {
            return Err(SimError::violation(SimTime::ZERO, problems.join("; ")));
        }
        let total = (cfg.n_regular + cfg.n_urllc) as usize;
        let mut stations = Vec::with_capacity(total);
        let mut sources = Vec::with_capacity(total);
        let urllc_source = SourceConfig::ExpAfterSuccess {
            mean_interarrival: cfg.urllc_mean_interarrival,
        };
        for i in 0..total as u32 {
            let id = StaId(i);
            let (role, params, source) = if i < cfg.n_regular {
                (Role::Regular, cfg.regular, SourceConfig::Saturated)
            } else {
                (Role::Urllc, cfg.urllc_params(), urllc_source)
            };
            stations.push(Station::new(id, role, params, cfg.seed));
            sources.push(TrafficSource::new(source, id, cfg.seed));
        }
        let aifs = stations.iter().map(|s| aifs(&s.params, &cfg.phy)).collect();
        Ok(Simulator {
            queue: EventQueue::new(),
            medium: Medium::new(cfg.warmup),
            aifs,
            tones: vec![None; total],
            control: ControlView {
                busy: false,
                idle_since: SimTime::ZERO,
            },
            main_idle_since: SimTime::ZERO,
            metrics: MetricsCollector::new(cfg.meta(), total),
            trace,
            next_frame: 0,
            stations,
            sources,
            cfg,
        })
    }

    pub fn run(mut self) -> SimResult<RunSummary> {
        self.emit(TraceEvent::Run {
            meta: self.cfg.meta(),
            stations: self.stations.len() as u32,
            detection_delay: self.cfg.detection_delay,
            regular_payload_bits: self.cfg.regular.payload_bits,
            urllc_payload_bits: self.cfg.urllc_params().payload_bits,
        })?;
        for i in 0..self.stations.len() {
            let at = self.sources[i].first_arrival();
            self.queue.schedule(at, Event::Arrival(StaId(i as u32)))?;
        }
        let end = self.cfg.sim_duration;
        while let Some((now, ev)) = self.queue.pop_until(end) {
            self.dispatch(now, ev)?;
        }
        let now = self.queue.now();
        for tx in self.medium.finish(now) {
            self.emit(TraceEvent::Tx {
                tx: tx.tx_id.0,
                sta: tx.sta,
                kind: tx.kind,
                start: tx.start.as_us(),
                end: tx.end().as_us(),
                outcome: TxOutcome::InFlight,
            })?;
        }
        self.emit(TraceEvent::End)?;
        if let Some(sink) = self.trace.as_mut() {
            sink.flush()?;
        }
        let busy = self.medium.busy_time();
        Ok(self.metrics.finalize(busy))
    }

    fn dispatch(&mut self, now: SimTime, ev: Event) -> SimResult<()> {
        match ev {
            Event::Arrival(s) => self.on_arrival(s, now),
            Event::BackoffExpiry(s) => self.on_backoff_expiry(s, now),
            Event::FastPathTx(s) => self.start_data(s, now),
            Event::TxEnd(tx) => self.on_tx_end(tx, now),
            Event::AckStart(s) => self.on_ack_start(s, now),
            Event::AckTimeout(s) => self.on_ack_timeout(s, now),
            Event::ControlNotify { busy } => self.on_control_transition(busy, now),
        }
    }

    pub(crate) fn emit(&mut self, event: TraceEvent) -> SimResult<()> {
        if let Some(sink) = self.trace.as_mut() {
            sink.emit(self.queue.now(), event)?;
        }
        Ok(())
    }

    pub(crate) fn sta(&mut self, s: StaId) -> &mut Station {
        &mut self.stations[s.0 as usize]
    }

    /// Regular stations under the proposed scheme honour the busy tone.
    pub(crate) fn tone_aware(&self, s: StaId) -> bool {
        self.cfg.scheme == Scheme::Proposed && self.stations[s.0 as usize].role == Role::Regular
    }

    fn on_arrival(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        let role = self.stations[s.0 as usize].role;
        let frame = Frame {
            id: self.next_frame,
            source: s,
            kind: role.data_kind(),
            arrival_time: now,
            delivery_time: None,
        };
        self.next_frame += 1;
        self.metrics.record_arrival(role, now);
        self.emit(TraceEvent::Arrival {
            sta: s,
            class: role,
            frame: frame.id,
        })?;
        self.sta(s).enqueue_frame(frame, now)?;
        if role == Role::Urllc && self.cfg.scheme == Scheme::Proposed {
            self.urllc_arrival(s, now).map(|_| ())
        } else {
            self.try_countdown(s, now)
        }
    }

    /// Arms the backoff countdown if the station may count right now.
    pub(crate) fn try_countdown(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        let i = s.0 as usize;
        if self.stations[i].tx_state != TxState::Deferring || self.medium.is_main_busy() {
            return Ok(());
        }
        let tone_aware = self.tone_aware(s);
        if tone_aware && self.control.busy {
            self.stations[i].suspended = true;
            return Ok(());
        }
        let mut start = self.main_idle_since.max(self.stations[i].ready_at);
        if tone_aware {
            start = start.max(self.control.idle_since);
        }
        start += self.aifs[i];
        debug_assert!(start > now || self.aifs[i] == SimTime::ZERO);
        let slot = self.cfg.phy.slot_time;
        let st = &mut self.stations[i];
        st.suspended = false;
        let expiry = st.expiry_from(start, slot);
        let handle = self.queue.schedule(expiry, Event::BackoffExpiry(s))?;
        self.stations[i].arm(Countdown {
            start,
            expiry,
            handle,
        });
        Ok(())
    }

    fn on_backoff_expiry(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        let st = self.sta(s);
        st.countdown = None;
        st.backoff_counter = 0;
        self.start_data(s, now)
    }

    pub(crate) fn start_data(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        let st = &self.stations[s.0 as usize];
        let kind = st.role.data_kind();
        let airtime = st.params.data_airtime;
        let (tx, transition) = self.medium.begin_transmission(s, kind, airtime, now)?;
        let end = self.queue.schedule(now + airtime, Event::TxEnd(tx))?;
        let st = self.sta(s);
        st.tx_state = TxState::Transmitting;
        st.current_tx = Some(tx);
        st.pending = Some(end);
        if transition == ChannelTransition::IdleToBusy {
            self.on_main_busy(now);
        }
        Ok(())
    }

    fn on_main_busy(&mut self, now: SimTime) {
        let slot = self.cfg.phy.slot_time;
        for i in 0..self.stations.len() {
            if let Some(h) = self.stations[i].freeze(now, slot) {
                self.queue.cancel(h);
            }
        }
    }

    pub(crate) fn record_preemption(&mut self, s: StaId, now: SimTime) {
        let role = self.stations[s.0 as usize].role;
        self.metrics.record_attempt(role, TxOutcome::Aborted, now);
    }

    pub(crate) fn note_main_idle(&mut self, now: SimTime) {
        self.main_idle_since = now;
    }

    pub(crate) fn on_main_idle(&mut self, now: SimTime) -> SimResult<()> {
        for i in 0..self.stations.len() {
            self.try_countdown(StaId(i as u32), now)?;
        }
        Ok(())
    }

    fn on_tx_end(&mut self, tx: TxId, now: SimTime) -> SimResult<()> {
        let (t, outcome, transition) = self.medium.end_transmission(tx, now)?;
        let went_idle = transition == ChannelTransition::BusyToIdle;
        if went_idle {
            self.note_main_idle(now);
        }
        self.emit(TraceEvent::Tx {
            tx: t.tx_id.0,
            sta: t.sta,
            kind: t.kind,
            start: t.start.as_us(),
            end: now.as_us(),
            outcome,
        })?;
        let s = t.sta;
        match t.kind {
            FrameKind::RegularData | FrameKind::UrllcData => {
                let role = self.stations[s.0 as usize].role;
                self.metrics.record_attempt(role, outcome, now);
                let params = self.stations[s.0 as usize].params;
                let phy = self.cfg.phy;
                if outcome == TxOutcome::Clean {
                    self.queue.schedule(now + phy.sifs, Event::AckStart(s))?;
                }
                let timeout = now + phy.sifs + params.ack_airtime + phy.ack_timeout_guard;
                let handle = self.queue.schedule(timeout, Event::AckTimeout(s))?;
                let st = self.sta(s);
                st.tx_state = TxState::AwaitAck;
                st.current_tx = None;
                st.pending = Some(handle);
            }
            FrameKind::Ack => {
                // A collided ACK is left to the timeout.
                if outcome == TxOutcome::Clean {
                    if let Some(h) = self.sta(s).pending.take() {
                        self.queue.cancel(h);
                    }
                    self.complete(s, ExchangeOutcome::AckReceived, now)?;
                }
            }
        }
        if went_idle {
            self.on_main_idle(now)?;
        }
        Ok(())
    }

    fn on_ack_start(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        let airtime = self.stations[s.0 as usize].params.ack_airtime;
        let (tx, transition) = self
            .medium
            .begin_transmission(s, FrameKind::Ack, airtime, now)?;
        self.queue.schedule(now + airtime, Event::TxEnd(tx))?;
        if transition == ChannelTransition::IdleToBusy {
            self.on_main_busy(now);
        }
        Ok(())
    }

    fn on_ack_timeout(&mut self, s: StaId, now: SimTime) -> SimResult<()> {
        self.sta(s).pending = None;
        self.complete(s, ExchangeOutcome::AckTimeout, now)
    }

    pub(crate) fn complete(
        &mut self,
        s: StaId,
        outcome: ExchangeOutcome,
        now: SimTime,
    ) -> SimResult<()> {
        let next = self.sta(s).complete_exchange(outcome, now)?;
        if !self.stations[s.0 as usize].invariants_hold() {
            return Err(SimError::violation(
                now,
                format!("{s} broke its CW invariant"),
            ));
        }
        match next {
            NextStep::Delivered(frame) => {
                self.finish_frame(s, frame, FrameFate::Delivered(now), now)
            }
            NextStep::Dropped(frame) => self.finish_frame(s, frame, FrameFate::Dropped(now), now),
            NextStep::Retry => self.try_countdown(s, now),
        }
    }

    fn finish_frame(
        &mut self,
        s: StaId,
        mut frame: Frame,
        fate: FrameFate,
        now: SimTime,
    ) -> SimResult<()> {
        let st = &self.stations[s.0 as usize];
        let role = st.role;
        let payload_bits = st.params.payload_bits;
        let (event, outcome) = match fate {
            FrameFate::Delivered(t) => {
                frame.delivery_time = Some(t);
                (
                    TraceEvent::Delivered {
                        sta: s,
                        class: role,
                        frame: frame.id,
                        arrival: frame.arrival_time.as_us(),
                    },
                    ServiceOutcome::Delivered,
                )
            }
            FrameFate::Dropped(_) => (
                TraceEvent::Dropped {
                    sta: s,
                    class: role,
                    frame: frame.id,
                    arrival: frame.arrival_time.as_us(),
                },
                ServiceOutcome::Dropped,
            ),
        };
        self.metrics.record_frame(FrameRecord {
            sta: s,
            role,
            arrival: frame.arrival_time,
            fate,
            payload_bits,
        });
        self.emit(event)?;
        if self.tones[s.0 as usize].is_some() {
            self.tone_release(s, now)?;
        }
        match self.sources[s.0 as usize].on_service_complete(outcome, now) {
            NextArrival::Immediate => self.on_arrival(s, now),
            NextArrival::At(t) => {
                self.queue.schedule(t, Event::Arrival(s))?;
                Ok(())
            }
        }
    }
}

/// Runs one configuration without tracing.
pub fn run(cfg: RunConfig) -> SimResult<RunSummary> {
    Simulator::new(cfg, None)?.run()
}

/// Runs one configuration, writing its JSONL trace to `out`.
pub fn run_traced(cfg: RunConfig, out: Box<dyn std::io::Write + Send>) -> SimResult<RunSummary> {
    Simulator::new(cfg, Some(TraceSink::new(out)))?.run()
}

//! Trace scanner shared by the integration tests and the acceptance harness.
//!
//! Works on raw JSON values so that it shares no code with the simulator's
//! own bookkeeping.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::{Arc, Mutex};

use serde_json::Value;
use urllc_sim::{run_traced, RunConfig, RunSummary};

pub const SIFS: u64 = 16;
pub const ACK: u64 = 44;
pub const REGULAR_DATA: u64 = 2000;
pub const URLLC_DATA: u64 = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tx {
    pub id: u64,
    pub sta: u64,
    pub kind: String,
    pub start: u64,
    pub end: u64,
    pub outcome: String,
}

#[derive(Debug, Default)]
pub struct Trace {
    pub lines: Vec<Value>,
    pub detection_delay: u64,
    pub sim_duration: u64,
    pub warmup: u64,
    pub n: u64,
    pub m: u64,
    pub txs: Vec<Tx>,
    /// (time, sta, fast_path)
    pub tone_on: Vec<(u64, u64, bool)>,
    pub tone_off: Vec<(u64, u64)>,
    /// (time, sta, tx)
    pub preempts: Vec<(u64, u64, u64)>,
    /// (time, sta, class, frame, arrival) for deliveries
    pub delivered: Vec<(u64, u64, String, u64, u64)>,
    pub dropped: Vec<(u64, u64, String, u64, u64)>,
    /// (time, sta, class, frame)
    pub arrivals: Vec<(u64, u64, String, u64)>,
}

/// In-memory trace target.
#[derive(Clone, Default)]
pub struct SharedBuf(Arc<Mutex<Vec<u8>>>);

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Runs `cfg` and returns its summary together with the raw JSONL trace.
pub fn traced(cfg: RunConfig) -> (RunSummary, String) {
    let buf = SharedBuf::default();
    let summary = run_traced(cfg, Box::new(buf.clone())).expect("run succeeds");
    let bytes = buf.0.lock().unwrap().clone();
    (summary, String::from_utf8(bytes).expect("trace is UTF-8"))
}

fn u(v: &Value, key: &str) -> u64 {
    v[key]
        .as_u64()
        .unwrap_or_else(|| panic!("field {key} missing in {v}"))
}

fn s(v: &Value, key: &str) -> String {
    v[key]
        .as_str()
        .unwrap_or_else(|| panic!("field {key} missing in {v}"))
        .to_string()
}

pub fn parse(text: &str) -> Trace {
    let mut t = Trace::default();
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).expect("trace line is JSON");
        let now = u(&v, "t");
        match v["ev"].as_str().expect("ev tag") {
            "run" => {
                t.detection_delay = u(&v, "detection_delay");
                t.sim_duration = u(&v, "sim_duration");
                t.warmup = u(&v, "warmup");
                t.n = u(&v, "n");
                t.m = u(&v, "m");
            }
            "tx" => t.txs.push(Tx {
                id: u(&v, "tx"),
                sta: u(&v, "sta"),
                kind: s(&v, "kind"),
                start: u(&v, "start"),
                end: u(&v, "end"),
                outcome: s(&v, "outcome"),
            }),
            "tone-on" => t
                .tone_on
                .push((now, u(&v, "sta"), v["fast_path"].as_bool().unwrap())),
            "tone-off" => t.tone_off.push((now, u(&v, "sta"))),
            "preempt" => t.preempts.push((now, u(&v, "sta"), u(&v, "tx"))),
            "delivered" => t.delivered.push((
                now,
                u(&v, "sta"),
                s(&v, "class"),
                u(&v, "frame"),
                u(&v, "arrival"),
            )),
            "dropped" => t.dropped.push((
                now,
                u(&v, "sta"),
                s(&v, "class"),
                u(&v, "frame"),
                u(&v, "arrival"),
            )),
            "arrival" => t
                .arrivals
                .push((now, u(&v, "sta"), s(&v, "class"), u(&v, "frame"))),
            "end" => {}
            other => panic!("unknown event kind {other}"),
        }
        t.lines.push(v);
    }
    t
}

/// Intervals during which at least one tone is on, merged. A tone still on
/// when the run ends is closed at the end.
pub fn tone_union(t: &Trace) -> Vec<(u64, u64)> {
    let mut open: BTreeMap<u64, u64> = BTreeMap::new();
    let mut spans = Vec::new();
    let mut events: Vec<(u64, usize, u64, bool)> = Vec::new();
    for (i, &(at, sta, _)) in t.tone_on.iter().enumerate() {
        events.push((at, i, sta, true));
    }
    for (i, &(at, sta)) in t.tone_off.iter().enumerate() {
        events.push((at, i, sta, false));
    }
    // trace order within the same instant does not matter for the union
    events.sort();
    for (at, _, sta, on) in events {
        if on {
            open.insert(sta, at);
        } else {
            let start = open.remove(&sta).expect("tone-off without tone-on");
            spans.push((start, at));
        }
    }
    for (_, start) in open {
        spans.push((start, t.sim_duration));
    }
    merge(spans)
}

pub fn merge(mut spans: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    spans.sort();
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

pub fn measure(spans: &[(u64, u64)], lo: u64, hi: u64) -> u64 {
    merge(spans.to_vec())
        .iter()
        .map(|&(a, b)| b.min(hi).saturating_sub(a.max(lo)))
        .sum()
}

/// Index pairs of transmissions whose airtimes share a positive-length
/// interval. Plain sweep over start-sorted intervals.
pub fn overlapping_pairs(txs: &[Tx]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..txs.len())
        .filter(|&i| txs[i].end > txs[i].start)
        .collect();
    order.sort_by_key(|&i| (txs[i].start, i));
    let mut active: Vec<usize> = Vec::new();
    let mut pairs = Vec::new();
    for i in order {
        active.retain(|&j| txs[j].end > txs[i].start);
        for &j in &active {
            pairs.push((j.min(i), j.max(i)));
        }
        active.push(i);
    }
    pairs
}

/// Checks every trace-level invariant of a run. `busy_fraction` is the value
/// the simulator reported for the same run.
pub fn check_invariants(t: &Trace, busy_fraction: f64) -> Result<(), String> {
    let d = t.detection_delay;

    // clock monotonicity and framing
    let times: Vec<u64> = t.lines.iter().map(|v| v["t"].as_u64().unwrap()).collect();
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err("trace times go backwards".into());
    }
    if t.lines.first().map(|v| v["ev"] != "run").unwrap_or(true) {
        return Err("missing run header".into());
    }
    if t.lines.last().map(|v| v["ev"] != "end").unwrap_or(true) {
        return Err("missing end marker".into());
    }

    // airtime shapes
    for tx in &t.txs {
        let nominal = match tx.kind.as_str() {
            "regular-data" => REGULAR_DATA,
            "urllc-data" => URLLC_DATA,
            "ack" => ACK,
            k => return Err(format!("unknown kind {k}")),
        };
        let len = tx.end - tx.start;
        match tx.outcome.as_str() {
            "clean" | "collided" if len != nominal => {
                return Err(format!(
                    "tx {} has airtime {len}, expected {nominal}",
                    tx.id
                ))
            }
            "aborted" if tx.kind != "regular-data" => {
                return Err(format!("tx {} of kind {} was aborted", tx.id, tx.kind))
            }
            "aborted" | "in-flight" if len > nominal => {
                return Err(format!("tx {} longer than nominal", tx.id))
            }
            _ => {}
        }
    }

    // exclusion: no regular data on air in [a + d, b) of any tone span
    let tones = tone_union(t);
    for tx in t.txs.iter().filter(|x| x.kind == "regular-data") {
        let first = tones.partition_point(|&(_, b)| b <= tx.start);
        for &(a, b) in &tones[first..] {
            if a >= tx.end {
                break;
            }
            let lo = (a + d).max(tx.start);
            let hi = b.min(tx.end);
            if lo < hi {
                return Err(format!(
                    "regular tx {} [{}, {}) overlaps tone span [{a}, {b}) past detection delay",
                    tx.id, tx.start, tx.end
                ));
            }
        }
    }

    // every abort lands exactly one detection delay after a tone onset
    let onsets: Vec<u64> = tones.iter().map(|&(a, _)| a + d).collect();
    for tx in t.txs.iter().filter(|x| x.outcome == "aborted") {
        if onsets.binary_search(&tx.end).is_err() {
            return Err(format!(
                "tx {} aborted at {} with no tone onset",
                tx.id, tx.end
            ));
        }
    }
    let aborted: BTreeMap<u64, &Tx> = t
        .txs
        .iter()
        .filter(|x| x.outcome == "aborted")
        .map(|x| (x.id, x))
        .collect();
    if aborted.len() != t.preempts.len() {
        return Err("aborted transmissions and preempt events disagree".into());
    }
    for &(at, sta, id) in &t.preempts {
        match aborted.get(&id) {
            Some(tx) if tx.sta == sta && tx.end == at => {}
            _ => {
                return Err(format!(
                    "preempt of tx {id} does not match an aborted frame"
                ))
            }
        }
    }

    // no-capture collision model against the recorded outcomes
    let mut overlapped = vec![false; t.txs.len()];
    for (i, j) in overlapping_pairs(&t.txs) {
        if t.txs[i].outcome == "clean" && t.txs[j].outcome == "clean" {
            return Err(format!(
                "clean transmissions {} and {} overlap",
                t.txs[i].id, t.txs[j].id
            ));
        }
        overlapped[i] = true;
        overlapped[j] = true;
    }
    for (tx, hit) in t.txs.iter().zip(&overlapped) {
        match tx.outcome.as_str() {
            "clean" if *hit => return Err(format!("tx {} overlaps but is clean", tx.id)),
            "collided" if !*hit => return Err(format!("tx {} collided with nothing", tx.id)),
            _ => {}
        }
    }

    // every clean data frame is followed by its ACK one SIFS later
    let acks: BTreeMap<(u64, u64), &Tx> = t
        .txs
        .iter()
        .filter(|x| x.kind == "ack")
        .map(|x| ((x.sta, x.start), x))
        .collect();
    for tx in t
        .txs
        .iter()
        .filter(|x| x.kind != "ack" && x.outcome == "clean")
    {
        let due = tx.end + SIFS;
        if due >= t.sim_duration {
            continue;
        }
        if !acks.contains_key(&(tx.sta, due)) {
            return Err(format!("clean tx {} has no ACK at {due}", tx.id));
        }
    }
    // ... and no ACK without such a frame
    let clean_ends: std::collections::BTreeSet<(u64, u64)> = t
        .txs
        .iter()
        .filter(|x| x.kind != "ack" && x.outcome == "clean")
        .map(|x| (x.sta, x.end + SIFS))
        .collect();
    for ack in acks.values() {
        if !clean_ends.contains(&(ack.sta, ack.start)) {
            return Err(format!("ACK tx {} answers no clean frame", ack.id));
        }
    }

    // frame conservation: one resolution per arrival, at most one pending
    let mut pending: BTreeMap<u64, u64> = BTreeMap::new();
    for v in &t.lines {
        match v["ev"].as_str().unwrap() {
            "arrival" => {
                if pending.insert(u(v, "sta"), u(v, "frame")).is_some() {
                    return Err(format!(
                        "station {} got a frame while one is queued",
                        u(v, "sta")
                    ));
                }
            }
            "delivered" | "dropped" if pending.remove(&u(v, "sta")) != Some(u(v, "frame")) => {
                return Err(format!("frame {} resolved but not queued", u(v, "frame")));
            }
            _ => {}
        }
    }

    // tone sessions: raised at each URLLC arrival, dropped at its resolution
    if !t.tone_on.is_empty() {
        let raised: Vec<(u64, u64)> = t.tone_on.iter().map(|&(at, sta, _)| (sta, at)).collect();
        let urllc_arrivals: Vec<(u64, u64)> = t
            .arrivals
            .iter()
            .filter(|a| a.2 == "urllc")
            .map(|a| (a.1, a.0))
            .collect();
        if raised != urllc_arrivals {
            return Err("tone onsets differ from URLLC arrivals".into());
        }
        let mut released: Vec<(u64, u64)> = t.tone_off.iter().map(|&(at, sta)| (sta, at)).collect();
        let mut resolved: Vec<(u64, u64)> = t
            .delivered
            .iter()
            .chain(&t.dropped)
            .filter(|r| r.2 == "urllc")
            .map(|r| (r.1, r.0))
            .collect();
        released.sort();
        resolved.sort();
        if released != resolved {
            return Err("tone releases differ from URLLC frame resolutions".into());
        }
    }

    // channel-time conservation
    let spans: Vec<(u64, u64)> = t.txs.iter().map(|x| (x.start, x.end)).collect();
    let busy = measure(&spans, t.warmup, t.sim_duration);
    let interval = (t.sim_duration - t.warmup) as f64;
    let reported = busy_fraction * interval;
    if (reported - busy as f64).abs() > 1e-6 * interval {
        return Err(format!(
            "busy time {busy} us from airtimes, simulator reports {reported}"
        ));
    }
    Ok(())
}

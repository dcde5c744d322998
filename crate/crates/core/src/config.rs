//! Scenario files.
//!
//! Line-oriented `key = value` text with `[section]` headers. `#` starts a
//! comment. Keys before the first header belong to `[scenario]`.
//!
//! ```text
//! [scenario]
//! n = 10                      # regular (saturated) stations
//! m_list = 1, 5, 10..=40      # URLLC station counts; ranges are inclusive
//! schemes = legacy, proposed
//! seeds = 1..=10
//! sim_duration_us = 100000000
//! warmup_us = 1000000
//! detection_delay_us = 0
//! trace = false
//!
//! [phy]
//! slot_us = 9
//! sifs_us = 16
//! ack_timeout_guard_us = 9
//!
//! [regular]                   # also [urllc] and [legacy_urllc]
//! aifsn = 3
//! cw_min = 15
//! cw_max = 1023
//! retry_limit = 7
//! data_airtime_us = 2000
//! ack_airtime_us = 44
//! payload_bits = 129760
//!
//! [urllc]
//! mean_interarrival_us = 10000
//! ```
//!
//! `[legacy_urllc]` holds the URLLC parameters used when the busy-tone scheme
//! is off; any key it leaves out is inherited from `[urllc]`. Integer values
//! may contain `_` separators. Every problem in a file is reported at once.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::edca::{EdcaParams, PhyConstants, MAX_DATA_AIRTIME};
use crate::metrics::Scheme;
use crate::sim::RunConfig;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_regular: u32,
    pub m_list: Vec<u32>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
    pub sim_duration: SimTime,
    pub warmup: SimTime,
    pub phy: PhyConstants,
    pub regular: EdcaParams,
    pub urllc: EdcaParams,
    pub legacy_urllc: EdcaParams,
    pub detection_delay: SimTime,
    pub urllc_mean_interarrival: SimTime,
    pub trace_enabled: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_regular: 10,
            m_list: vec![1, 5, 10, 15, 20, 25, 30, 35, 40],
            schemes: vec![Scheme::Legacy, Scheme::Proposed],
            seeds: (1..=10).collect(),
            sim_duration: SimTime::from_secs(100),
            warmup: SimTime::from_secs(1),
            phy: PhyConstants::default(),
            regular: EdcaParams::regular_default(),
            urllc: EdcaParams::urllc_default(),
            legacy_urllc: EdcaParams::urllc_default(),
            detection_delay: SimTime::ZERO,
            urllc_mean_interarrival: SimTime::from_ms(10),
            trace_enabled: false,
        }
    }
}

impl ScenarioConfig {
    pub fn run_config(&self, scheme: Scheme, m: u32, seed: u64) -> RunConfig {
        RunConfig {
            scheme,
            n_regular: self.n_regular,
            n_urllc: m,
            seed,
            sim_duration: self.sim_duration,
            warmup: self.warmup,
            phy: self.phy,
            regular: self.regular,
            urllc: self.urllc,
            legacy_urllc: self.legacy_urllc,
            detection_delay: self.detection_delay,
            urllc_mean_interarrival: self.urllc_mean_interarrival,
        }
    }

    /// Number of runs in the (scheme x M x seed) grid.
    pub fn grid_size(&self) -> usize {
        self.schemes.len() * self.m_list.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid scenario ({} problem(s)):", self.issues.len())?;
        for issue in &self.issues {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Scenario,
    Phy,
    Regular,
    Urllc,
    LegacyUrllc,
}

impl Section {
    fn parse(name: &str) -> Option<Section> {
        Some(match name {
            "scenario" => Section::Scenario,
            "phy" => Section::Phy,
            "regular" => Section::Regular,
            "urllc" => Section::Urllc,
            "legacy_urllc" => Section::LegacyUrllc,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Section::Scenario => "scenario",
            Section::Phy => "phy",
            Section::Regular => "regular",
            Section::Urllc => "urllc",
            Section::LegacyUrllc => "legacy_urllc",
        }
    }
}

const EDCA_KEYS: [&str; 7] = [
    "aifsn",
    "cw_min",
    "cw_max",
    "retry_limit",
    "data_airtime_us",
    "ack_airtime_us",
    "payload_bits",
];

struct Parser {
    issues: Vec<ConfigIssue>,
    lines: HashMap<(Section, &'static str), usize>,
}

impl Parser {
    fn issue(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line,
            message: message.into(),
        });
    }

    fn line_of(&self, section: Section, key: &str) -> Option<usize> {
        self.lines
            .iter()
            .find(|((s, k), _)| *s == section && *k == key)
            .map(|(_, l)| *l)
    }
}

fn parse_u64(raw: &str) -> Result<u64, String> {
    let cleaned: String = raw.chars().filter(|c| *c != '_').collect();
    if cleaned.starts_with('-') {
        return Err(format!("'{raw}' must not be negative"));
    }
    cleaned
        .parse::<u64>()
        .map_err(|_| format!("'{raw}' is not a non-negative integer"))
}

fn parse_u32(raw: &str) -> Result<u32, String> {
    let v = parse_u64(raw)?;
    u32::try_from(v).map_err(|_| format!("'{raw}' is out of range"))
}

fn parse_list(raw: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for item in raw.split(',').map(str::trim) {
        if item.is_empty() {
            return Err("empty list item".into());
        }
        if let Some((lo, hi)) = item.split_once("..=") {
            let (lo, hi) = (parse_u64(lo.trim())?, parse_u64(hi.trim())?);
            if lo > hi {
                return Err(format!("empty range '{item}'"));
            }
            if hi - lo > 100_000 {
                return Err(format!("range '{item}' is too large"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(parse_u64(item)?);
        }
    }
    Ok(out)
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{raw}' is not true/false")),
    }
}

fn apply_edca(target: &mut EdcaParams, key: &str, value: &str) -> Result<(), String> {
    match key {
        "aifsn" => target.aifsn = parse_u32(value)?,
        "cw_min" => target.cw_min = parse_u32(value)?,
        "cw_max" => target.cw_max = parse_u32(value)?,
        "retry_limit" => target.retry_limit = parse_u32(value)?,
        "data_airtime_us" => target.data_airtime = SimTime::from_us(parse_u64(value)?),
        "ack_airtime_us" => target.ack_airtime = SimTime::from_us(parse_u64(value)?),
        "payload_bits" => target.payload_bits = parse_u64(value)?,
        _ => unreachable!("key checked by caller"),
    }
    Ok(())
}

fn known_key(section: Section, key: &str) -> Option<&'static str> {
    let keys: &[&'static str] = match section {
        Section::Scenario => &[
            "n",
            "m_list",
            "schemes",
            "seeds",
            "sim_duration_us",
            "warmup_us",
            "detection_delay_us",
            "trace",
        ],
        Section::Phy => &["slot_us", "sifs_us", "ack_timeout_guard_us"],
        Section::Regular | Section::LegacyUrllc => &EDCA_KEYS,
        Section::Urllc => &[
            "aifsn",
            "cw_min",
            "cw_max",
            "retry_limit",
            "data_airtime_us",
            "ack_airtime_us",
            "payload_bits",
            "mean_interarrival_us",
        ],
    };
    keys.iter().copied().find(|k| *k == key)
}

/// Parses and validates a scenario file. Missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut p = Parser {
        issues: Vec::new(),
        lines: HashMap::new(),
    };
    let mut section = Section::Scenario;
    let mut legacy_overrides: Vec<(usize, &'static str, String)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest
                .strip_suffix(']')
                .map(str::trim)
                .and_then(Section::parse)
            {
                Some(s) => section = s,
                None => p.issue(Some(line_no), format!("unknown section '{line}'")),
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            p.issue(
                Some(line_no),
                format!("expected 'key = value', got '{line}'"),
            );
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(key) = known_key(section, key) else {
            p.issue(
                Some(line_no),
                format!("unknown key '{key}' in [{}]", section.name()),
            );
            continue;
        };
        if let Some(&prev) = p.lines.get(&(section, key)) {
            p.issue(
                Some(line_no),
                format!("duplicate key '{key}' (first set on line {prev})"),
            );
            continue;
        }
        p.lines.insert((section, key), line_no);
        if value.is_empty() {
            p.issue(Some(line_no), format!("missing value for '{key}'"));
            continue;
        }

        let result: Result<(), String> = match (section, key) {
            (Section::Scenario, "n") => parse_u32(value).map(|v| cfg.n_regular = v),
            (Section::Scenario, "m_list") => parse_list(value).and_then(|v| {
                v.into_iter()
                    .map(|m| u32::try_from(m).map_err(|_| format!("M={m} is out of range")))
                    .collect::<Result<Vec<_>, _>>()
                    .map(|v| cfg.m_list = v)
            }),
            (Section::Scenario, "schemes") => value
                .split(',')
                .map(|s| {
                    Scheme::parse(s.trim()).ok_or_else(|| format!("unknown scheme '{}'", s.trim()))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(|v| cfg.schemes = v),
            (Section::Scenario, "seeds") => parse_list(value).map(|v| cfg.seeds = v),
            (Section::Scenario, "sim_duration_us") => {
                parse_u64(value).map(|v| cfg.sim_duration = SimTime::from_us(v))
            }
            (Section::Scenario, "warmup_us") => {
                parse_u64(value).map(|v| cfg.warmup = SimTime::from_us(v))
            }
            (Section::Scenario, "detection_delay_us") => {
                parse_u64(value).map(|v| cfg.detection_delay = SimTime::from_us(v))
            }
            (Section::Scenario, "trace") => parse_bool(value).map(|v| cfg.trace_enabled = v),
            (Section::Phy, "slot_us") => {
                parse_u64(value).map(|v| cfg.phy.slot_time = SimTime::from_us(v))
            }
            (Section::Phy, "sifs_us") => {
                parse_u64(value).map(|v| cfg.phy.sifs = SimTime::from_us(v))
            }
            (Section::Phy, "ack_timeout_guard_us") => {
                parse_u64(value).map(|v| cfg.phy.ack_timeout_guard = SimTime::from_us(v))
            }
            (Section::Urllc, "mean_interarrival_us") => {
                parse_u64(value).map(|v| cfg.urllc_mean_interarrival = SimTime::from_us(v))
            }
            (Section::Regular, k) => apply_edca(&mut cfg.regular, k, value),
            (Section::Urllc, k) => apply_edca(&mut cfg.urllc, k, value),
            (Section::LegacyUrllc, k) => {
                // Validate now, apply once [urllc] is final.
                let mut probe = EdcaParams::urllc_default();
                apply_edca(&mut probe, k, value)
                    .map(|_| legacy_overrides.push((line_no, k, value.to_string())))
            }
            _ => unreachable!("known_key filters keys"),
        };
        if let Err(msg) = result {
            p.issue(Some(line_no), format!("{key}: {msg}"));
        }
    }

    cfg.legacy_urllc = cfg.urllc;
    for (_, key, value) in &legacy_overrides {
        let _ = apply_edca(&mut cfg.legacy_urllc, key, value);
    }

    validate(&cfg, &mut p);
    if p.issues.is_empty() {
        Ok(cfg)
    } else {
        p.issues.sort_by_key(|i| i.line.unwrap_or(usize::MAX));
        Err(ConfigError { issues: p.issues })
    }
}

fn validate(cfg: &ScenarioConfig, p: &mut Parser) {
    let sc = Section::Scenario;
    for (key, msg) in cfg.phy.validate() {
        let line = p.line_of(Section::Phy, key);
        p.issue(line, msg);
    }
    for (section, params) in [
        (Section::Regular, &cfg.regular),
        (Section::Urllc, &cfg.urllc),
        (Section::LegacyUrllc, &cfg.legacy_urllc),
    ] {
        for (key, msg) in params.validate() {
            let line = p.line_of(section, key).or_else(|| {
                (section == Section::LegacyUrllc)
                    .then(|| p.line_of(Section::Urllc, key))
                    .flatten()
            });
            p.issue(line, format!("[{}] {msg}", section.name()));
        }
    }
    if cfg.regular.data_airtime > MAX_DATA_AIRTIME {
        let line = p.line_of(Section::Regular, "data_airtime_us");
        p.issue(
            line,
            format!(
                "[regular] data_airtime_us = {} exceeds {} us: legacy transmissions are bounded by roughly 5 ms",
                cfg.regular.data_airtime.as_us(),
                MAX_DATA_AIRTIME.as_us()
            ),
        );
    }
    if cfg.m_list.is_empty() {
        let line = p.line_of(sc, "m_list");
        p.issue(line, "m_list must not be empty");
    }
    if cfg.n_regular == 0 && cfg.m_list.contains(&0) {
        let line = p.line_of(sc, "m_list").or(p.line_of(sc, "n"));
        p.issue(
            line,
            "N + M must be at least 1 for every M (N = 0 and M = 0)",
        );
    }
    if cfg.schemes.is_empty() {
        let line = p.line_of(sc, "schemes");
        p.issue(line, "schemes must not be empty");
    }
    if cfg.seeds.is_empty() {
        let line = p.line_of(sc, "seeds");
        p.issue(line, "seeds must not be empty");
    }
    if cfg.sim_duration == SimTime::ZERO {
        let line = p.line_of(sc, "sim_duration_us");
        p.issue(line, "sim_duration_us must be positive");
    }
    if cfg.warmup >= cfg.sim_duration {
        let line = p
            .line_of(sc, "warmup_us")
            .or(p.line_of(sc, "sim_duration_us"));
        p.issue(line, "warmup_us must be shorter than sim_duration_us");
    }
    if cfg.urllc_mean_interarrival == SimTime::ZERO {
        let line = p.line_of(Section::Urllc, "mean_interarrival_us");
        p.issue(line, "mean_interarrival_us must be positive");
    }
}

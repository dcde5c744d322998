mod common;

use common::{parse, traced};
use urllc_sim::{run, RunConfig, Scheme, SimTime};

// AIFS 43 + mean backoff 7.5 slots + data 2000 + SIFS 16 + ACK 44
const CYCLE_US: f64 = 43.0 + 7.5 * 9.0 + 2000.0 + 16.0 + 44.0;

#[test]
fn lone_station_matches_closed_form() {
    let cfg = RunConfig::new(Scheme::Legacy, 1, 0, 1)
        .with_duration(SimTime::from_secs(10), SimTime::from_secs(1));
    let s = run(cfg).unwrap();
    let expected = 129_760.0 / (CYCLE_US * 1e-6);
    let err = (s.regular_throughput_bps - expected).abs() / expected;
    assert!(
        err < 0.01,
        "throughput {} vs {expected}",
        s.regular_throughput_bps
    );
    assert_eq!(s.regular_dropped, 0);
    assert_eq!(s.regular_collided, 0);
}

#[test]
fn lone_station_cycles_back_to_back() {
    let cfg =
        RunConfig::new(Scheme::Legacy, 1, 0, 3).with_duration(SimTime::from_secs(1), SimTime::ZERO);
    let (_, text) = traced(cfg);
    let t = parse(&text);
    // each frame: AIFS + draw from [0, 15] slots + data + SIFS + ACK
    for (at, sta, _, _, arrival) in &t.delivered {
        let extra = at - arrival - 43 - 2060;
        assert_eq!(extra % 9, 0);
        assert!(extra / 9 <= 15);
        // the saturated source refills at the same instant
        assert!(t.arrivals.iter().any(|a| a.0 == *at && a.1 == *sta));
    }
    assert!(t.delivered.len() > 400);
}

#[test]
fn two_stations_share_evenly() {
    let cfg = RunConfig::new(Scheme::Legacy, 2, 0, 5)
        .with_duration(SimTime::from_secs(60), SimTime::from_secs(1));
    let s = run(cfg).unwrap();
    let (a, b) = (
        s.per_station_delivered[0] as f64,
        s.per_station_delivered[1] as f64,
    );
    assert!((a - b).abs() / a.max(b) < 0.05, "{a} vs {b}");
    assert_eq!(
        s.per_station_delivered.iter().sum::<u64>(),
        s.regular_delivered + s.urllc_delivered
    );
}

#[test]
fn more_contenders_means_more_collisions() {
    let few =
        run(RunConfig::new(Scheme::Legacy, 2, 0, 1)
            .with_duration(SimTime::from_secs(5), SimTime::ZERO))
        .unwrap();
    let many = run(RunConfig::new(Scheme::Legacy, 20, 0, 1)
        .with_duration(SimTime::from_secs(5), SimTime::ZERO))
    .unwrap();
    let rate = |s: &urllc_sim::RunSummary| {
        s.regular_collided as f64 / (s.regular_collided + s.regular_delivered) as f64
    };
    assert!(rate(&many) > 2.0 * rate(&few));
    assert!(many.regular_throughput_bps < few.regular_throughput_bps);
}

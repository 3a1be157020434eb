//! Whole-run properties of the simulator: determinism, causality, the
//! transport ceiling and the shape of the metrics.

use std::path::Path;

use badge_sim::event::NS_PER_MS;
use badge_sim::scenario::{PumpMode, Scenario};
use badge_sim::{Outcome, World};

fn office(duration_s: f64) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/office.json");
    let mut s = Scenario::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    s.duration_s = duration_s;
    s
}

fn run(s: Scenario) -> Outcome {
    let mut w = World::new(s).unwrap();
    w.record_event_times();
    w.run().unwrap()
}

#[test]
fn same_seed_gives_identical_output() {
    let a = run(office(120.0)).metrics;
    let b = run(office(120.0)).metrics;
    assert_eq!(a.files().unwrap(), b.files().unwrap());
    assert_eq!(a.summary.trace_digest, b.summary.trace_digest);
    assert_eq!(a.summary.trace_digest.len(), 64);
}

#[test]
fn different_seed_changes_the_trace() {
    let mut s = office(60.0);
    s.seed += 1;
    assert_ne!(run(s).metrics.summary.trace_digest, run(office(60.0)).metrics.summary.trace_digest);
}

#[test]
fn events_are_processed_in_time_order_within_the_run() {
    let out = run(office(60.0));
    assert_eq!(out.event_times.len() as u64, out.metrics.summary.events);
    assert!(out.event_times.windows(2).all(|w| w[0] <= w[1]));
    assert!(out.event_times.iter().all(|&t| t < 60_000 * NS_PER_MS));
}

#[test]
fn office_run_respects_the_link_and_recovers_from_the_cut() {
    let out = run(office(600.0));
    let m = &out.metrics;
    for b in &m.summary.badges {
        assert!(b.max_packets_per_event <= 6, "{b:?}");
        assert!(b.max_bytes_per_s as f64 <= m.summary.link_ceiling_bytes_per_s, "{b:?}");
        assert_eq!(b.undecodable_frames, 0);
        assert!(b.max_scheduler_queue <= 8, "{b:?}");
    }
    assert_eq!(m.summary.badges[1].reboots, 1);
    assert!(!m.recovery.is_empty());
    assert!(m.recovery.iter().all(|r| r.badge == 2 && r.elements_recovered >= r.elements_at_cut.saturating_sub(1)));
    assert_eq!(m.throughput.len(), 3);
    for row in &m.throughput {
        assert!(row.timestamps_monotonic, "{row:?}");
        assert_eq!(row.corrupted, 0);
        assert!(row.chunks > 0, "{row:?}");
    }
    assert!(!m.sync_errors.is_empty());
    assert!(m.storage.iter().any(|r| r.chunks_stored > 0));
}

#[test]
fn every_pump_mode_completes_a_short_run() {
    for pump in [
        PumpMode::Timer { period_ms: 6.0 },
        PumpMode::scheduler_default(),
        PumpMode::Callback,
    ] {
        let mut s = office(30.0);
        s.pump = pump;
        let m = run(s).metrics;
        assert!(m.summary.events > 0, "{pump:?}");
        assert!(m.summary.badges.iter().all(|b| b.max_packets_per_event <= 6));
    }
}

#[test]
fn zero_duration_writes_only_headers() {
    let out = run(office(0.0));
    assert_eq!(out.metrics.summary.events, 0);
    let files = out.metrics.files().unwrap();
    for (name, body) in &files {
        if name.ends_with(".csv") {
            assert_eq!(body.lines().count(), 1, "{name}");
        }
    }
}

#[test]
fn metrics_land_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    run(office(20.0)).metrics.write_to(dir.path()).unwrap();
    for f in ["sync_errors.csv", "throughput.csv", "storage.csv", "recovery.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 42);
}

use badge_core::badge::handler::{error_code, peripheral};
use badge_core::badge::proto::*;
use badge_core::badge::recorder::CHUNK_SLOTS;
use badge_core::badge::{
    frame, AdvertisingPacket, Badge, BadgeConfig, BadgeEvent, Chunk, FrameReader, Job, Source, StatusFlags, StepOutcome,
    TimerKind,
};
use badge_core::timebase::NOMINAL_HZ;
use badge_core::vmem::VirtualStorage;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TICKS_PER_MS: u64 = NOMINAL_HZ as u64 / 1000;

fn ticks(ms: u64) -> u64 {
    ms * NOMINAL_HZ as u64 / 1000
}

fn connected() -> Badge {
    let mut b = Badge::new(BadgeConfig::default(), VirtualStorage::default()).unwrap();
    b.on_connect();
    b
}

fn req(kind: RequestKind) -> Vec<u8> {
    frame(&Request { kind }.encode().unwrap())
}

fn empty() -> Empty {
    Empty {}
}

/// Sends one request and collects every response the badge produces,
/// draining the TX FIFO as an ideal transport would.
fn exchange(b: &mut Badge, bytes: &[u8], at: u64) -> Vec<Response> {
    b.on_receive(bytes, at);
    let mut reader = FrameReader::new(4096);
    let mut out = Vec::new();
    loop {
        let outcome = b.run_jobs(at);
        while let Some(slice) = b.sender_mut().take_slice() {
            reader.push(&slice).unwrap();
        }
        while let Some(f) = reader.next_frame().unwrap() {
            out.push(Response::decode(&f).unwrap());
        }
        match outcome {
            StepOutcome::Busy => b.schedule(Job::Handle),
            _ if b.queued_jobs() == 0 => break,
            _ => {}
        }
    }
    out
}

fn status_req(ms: i64, assignment: Option<Assignment>) -> Vec<u8> {
    req(RequestKind::Status(StatusRequest {
        timestamp: Timestamp::from_millis(ms),
        assignment,
    }))
}

/// Runs the microphone for `windows` averaging periods at 50 ms each,
/// starting at `start_ms`, and processes finalized chunks as it goes.
fn record_mic(b: &mut Badge, rng: &mut ChaCha8Rng, start_ms: u64, windows: u64, process: bool) {
    for w in 0..windows {
        for _ in 0..35 {
            b.mic_sample(rng.gen_range(100..160));
        }
        let t = start_ms + (w + 1) * 50;
        b.mic_average(ticks(t)).unwrap();
        if process {
            b.run_jobs(ticks(t));
        }
    }
}

#[test]
fn status_request_syncs_and_sets_the_advertised_flag() {
    let mut b = connected();
    assert!(!b.advertising_packet().status.contains(StatusFlags::SYNCED));
    let resp = exchange(
        &mut b,
        &status_req(1_700_000_000_123, Some(Assignment { id: 7, group: 3 })),
        ticks(1000),
    );
    let [Response { kind: ResponseKind::Status(s) }] = resp.as_slice() else {
        panic!("{resp:?}")
    };
    assert_eq!(s.status_flags & StatusFlags::SYNCED, StatusFlags::SYNCED);
    assert_eq!((s.id, s.group), (7, 3));
    assert_eq!(s.timestamp.as_millis(), 1_700_000_000_123);
    assert_eq!(s.before_sync, None);
    let adv = b.advertising_packet();
    assert!(adv.status.contains(StatusFlags::SYNCED));
    assert_eq!((adv.id, adv.group), (7, 3));
    assert_eq!(AdvertisingPacket::decode(&adv.encode()).unwrap(), adv);

    // A second sync one second later reports the pre-sync time and the
    // prediction error.
    let resp = exchange(&mut b, &status_req(1_700_000_001_133, None), ticks(2000));
    let Response { kind: ResponseKind::Status(s) } = &resp[0] else {
        panic!()
    };
    assert_eq!(s.before_sync.as_ref().unwrap().as_millis(), 1_700_000_001_123);
    assert_eq!((s.id, s.group), (7, 3), "assignment is kept");
    assert_eq!(b.sync_errors(), &[10.0]);
}

#[test]
fn data_request_on_empty_partition_returns_only_the_end_marker() {
    let mut b = connected();
    let resp = exchange(
        &mut b,
        &req(RequestKind::DataRequest(DataRequest {
            source: 0,
            since: Timestamp::default(),
        })),
        0,
    );
    assert_eq!(
        resp,
        [Response {
            kind: ResponseKind::DataEnd(DataEnd {
                source: 0,
                chunks: 0,
                corrupted: 0
            })
        }]
    );
}

#[test]
fn identical_start_is_ignored() {
    let mut b = connected();
    let start = req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 }));
    assert!(exchange(&mut b, &start, 0).is_empty());
    let census = b.timers();
    assert!(census.iter().any(|t| t.kind == TimerKind::MicSample));
    assert_eq!(b.take_events().len(), 1);
    assert!(exchange(&mut b, &start, ticks(100)).is_empty());
    assert_eq!(b.timers(), census);
    assert!(b.take_events().is_empty());

    let other = req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 100 }));
    exchange(&mut b, &other, ticks(200));
    assert!(matches!(b.take_events()[..], [BadgeEvent::SourceStarted(_)]));
    assert_ne!(b.timers(), census);
}

#[test]
fn error_responses() {
    let mut b = connected();
    let err = |code| Response {
        kind: ResponseKind::Error(ErrorResponse { code }),
    };
    assert_eq!(exchange(&mut b, &frame(&[26]), 0), [err(error_code::UNKNOWN_REQUEST)]);
    assert_eq!(exchange(&mut b, &frame(&[0]), 0), [err(error_code::UNKNOWN_REQUEST)]);
    let bad_scan = ScanConfig {
        window_ms: 500,
        interval_ms: 300,
        duration_ms: 3000,
        period_s: 15,
        aggregation: 0,
    };
    assert_eq!(
        exchange(&mut b, &req(RequestKind::StartScan(bad_scan)), 0),
        [err(error_code::INVALID_CONFIG)]
    );
    assert_eq!(
        exchange(&mut b, &req(RequestKind::StreamStartAccel(empty())), 0),
        [err(error_code::SOURCE_NOT_RUNNING)]
    );
    let bad_source = req(RequestKind::DataRequest(DataRequest {
        source: 9,
        since: Timestamp::default(),
    }));
    assert_eq!(exchange(&mut b, &bad_source, 0), [err(error_code::UNKNOWN_SOURCE)]);
    assert!(b.is_connected());
    assert_eq!(b.counters().error_responses, 5);
}

#[test]
fn undecodable_frame_drops_the_connection() {
    let mut b = connected();
    // A status request cut short.
    assert!(exchange(&mut b, &frame(&[1, 0, 0]), 0).is_empty());
    assert!(!b.is_connected());
    assert_eq!(b.counters().undecodable_frames, 1);
    assert_eq!(b.counters().dropped_connections, 1);
    assert!(b.take_events().contains(&BadgeEvent::Disconnect));

    // A frame longer than the receive buffer is rejected as soon as its
    // header arrives.
    b.on_connect();
    b.on_receive(&[0xFF, 0xFF, 1], 0);
    assert!(!b.is_connected());
    assert_eq!(b.counters().dropped_connections, 2);

    // Reconnecting gives a working badge again.
    b.on_connect();
    assert_eq!(exchange(&mut b, &status_req(5000, None), 10).len(), 1);
}

#[test]
fn selftest_reports_faulty_peripherals() {
    let mut b = connected();
    b.set_peripheral_faults(peripheral::FLASH | peripheral::ACCEL);
    let resp = exchange(&mut b, &req(RequestKind::Selftest(empty())), 0);
    assert_eq!(
        resp,
        [Response {
            kind: ResponseKind::Selftest(SelftestResponse {
                passed: peripheral::EEPROM | peripheral::MICROPHONE | peripheral::BATTERY,
                failed: peripheral::FLASH | peripheral::ACCEL,
            })
        }]
    );
}

#[test]
fn recorded_chunks_come_back_in_order_with_124_byte_frames() {
    let mut b = connected();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    exchange(&mut b, &status_req(1_000_000, None), 0);
    exchange(
        &mut b,
        &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })),
        0,
    );
    record_mic(&mut b, &mut rng, 0, 112 * 5 + 10, true);
    assert_eq!(b.storer().stored_count(Source::Microphone), 5);

    let request = req(RequestKind::DataRequest(DataRequest {
        source: 0,
        since: Timestamp::default(),
    }));
    b.on_receive(&request, ticks(60_000));
    let mut wire = Vec::new();
    loop {
        let outcome = b.run_jobs(ticks(60_000));
        while let Some(s) = b.sender_mut().take_slice() {
            wire.extend(s);
        }
        if outcome == StepOutcome::Busy {
            b.schedule(Job::Handle);
        } else if b.queued_jobs() == 0 {
            break;
        }
    }
    let mut frames = Vec::new();
    let mut rest = &wire[..];
    while !rest.is_empty() {
        let len = u16::from_le_bytes([rest[0], rest[1]]) as usize;
        frames.push(&rest[2..2 + len]);
        rest = &rest[2 + len..];
    }
    assert_eq!(frames.len(), 6);
    let mut last = -1;
    for f in &frames[..5] {
        assert_eq!(f.len() + 2, 124);
        let r = Response::decode(f).unwrap();
        let chunk = Chunk::from_response(r.kind).unwrap();
        let Chunk::Microphone(m) = &chunk else { panic!() };
        assert_eq!(m.data.len(), 112);
        assert!(chunk.timestamp().as_millis() > last);
        last = chunk.timestamp().as_millis();
    }
    assert_eq!(
        Response::decode(frames[5]).unwrap().kind,
        ResponseKind::DataEnd(DataEnd {
            source: 0,
            chunks: 5,
            corrupted: 0
        })
    );
    // The first chunk starts at the sync time.
    let first = Chunk::from_response(Response::decode(frames[0]).unwrap().kind).unwrap();
    assert_eq!(first.timestamp().as_millis(), 1_000_000);
}

#[test]
fn stalled_link_exhausts_the_retry_budget() {
    let mut b = Badge::new(
        BadgeConfig {
            tx_capacity: 200,
            ..BadgeConfig::default()
        },
        VirtualStorage::default(),
    )
    .unwrap();
    b.on_connect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    exchange(&mut b, &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })), 0);
    record_mic(&mut b, &mut rng, 0, 112 * 3, true);
    b.on_receive(
        &req(RequestKind::DataRequest(DataRequest {
            source: 0,
            since: Timestamp::default(),
        })),
        0,
    );
    let mut outcomes = Vec::new();
    for _ in 0..20 {
        let o = b.run_jobs(0);
        outcomes.push(o);
        if o == StepOutcome::Disconnected {
            break;
        }
        b.schedule(Job::Handle);
    }
    // One frame fits, then ten attempts without progress.
    assert_eq!(outcomes.iter().filter(|&&o| o == StepOutcome::Busy).count(), 9);
    assert_eq!(outcomes.last(), Some(&StepOutcome::Disconnected));
    assert!(!b.is_connected());
}

#[test]
fn restart_keeps_storage_and_identity() {
    let mut b = connected();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    exchange(&mut b, &status_req(50_000, Some(Assignment { id: 9, group: 1 })), 0);
    exchange(&mut b, &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })), 0);
    record_mic(&mut b, &mut rng, 0, 150, true);
    exchange(&mut b, &req(RequestKind::Restart(empty())), ticks(8000));
    assert!(!b.is_connected());
    assert!(!b.clock().is_synced());
    assert_eq!((b.id(), b.group()), (9, 1));
    assert_eq!(b.storer().stored_count(Source::Microphone), 2, "partial chunk flushed");
    let image = b.into_storage();
    let mut b = Badge::new(BadgeConfig::default(), image).unwrap();
    b.on_connect();
    let resp = exchange(
        &mut b,
        &req(RequestKind::DataRequest(DataRequest {
            source: 0,
            since: Timestamp::default(),
        })),
        0,
    );
    assert_eq!(resp.len(), 3);
}

#[test]
fn scan_counts_only_own_group() {
    let mut b = connected();
    exchange(&mut b, &status_req(0, Some(Assignment { id: 1, group: 4 })), 0);
    let cfg = ScanConfig {
        window_ms: 100,
        interval_ms: 300,
        duration_ms: 3000,
        period_s: 15,
        aggregation: 0,
    };
    exchange(&mut b, &req(RequestKind::StartScan(cfg)), 0);
    b.scan_begin(ticks(15_000));
    let adv = |id, group| {
        AdvertisingPacket {
            id,
            group,
            mac: [1; 6],
            battery: 0,
            status: StatusFlags(0),
        }
        .encode()
    };
    b.scan_report(&adv(2, 4), -50);
    b.scan_report(&adv(3, 5), -40);
    b.scan_report(&adv(16_001, 4), -90);
    b.scan_report(&[1, 2, 3], -10);
    b.scan_end();
    b.run_jobs(ticks(18_000));
    let r = b.storer_mut().query_all(Source::Scan, &Timestamp::default()).unwrap();
    let Chunk::Scan(c) = &r.chunks[0] else { panic!() };
    let ids: Vec<u16> = c.devices.iter().map(|d| d.id).collect();
    assert_eq!(ids, [16_001, 2]);
}

#[test]
fn pipeline_conservation_with_slow_processing() {
    let mut b = connected();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    exchange(&mut b, &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })), 0);
    exchange(&mut b, &req(RequestKind::StartBattery(BatteryConfig { read_period_s: 1 })), 0);
    let mut t = 0;
    for round in 0..40u64 {
        // Processing runs only every few rounds, so chunk FIFOs overflow.
        record_mic(&mut b, &mut rng, t, 112, false);
        for _ in 0..3 {
            t += 1000;
            b.battery_read(rng.gen_range(700..900), ticks(t));
        }
        t = (round + 1) * 112 * 50;
        if round % 4 == 3 {
            b.run_jobs(ticks(t));
        }
    }
    for s in [Source::Microphone, Source::Battery] {
        let c = b.recorder().counters(s);
        let stored = b.storer().stored_count(s);
        let failed = b.storer().failed_count(s);
        assert!(c.overwritten > 0, "{s:?} never overflowed");
        assert!(c.pending <= CHUNK_SLOTS[s.index()] as u64);
        assert_eq!(c.closed, stored + c.overwritten + c.pending + failed, "{s:?}");
    }
}

fn storage_run(stream: bool, seed: u64) -> Vec<u8> {
    let mut b = connected();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    exchange(&mut b, &status_req(3_000_000, None), 0);
    exchange(&mut b, &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })), 0);
    exchange(&mut b, &req(RequestKind::StartAccel(AccelConfig {
        datarate_hz: 10,
        mode: 0,
        full_scale_g: 2,
        fifo_read_period_ms: 1000,
    })), 0);
    if stream {
        exchange(&mut b, &req(RequestKind::StreamStartMicrophone(empty())), 0);
        exchange(&mut b, &req(RequestKind::StreamStartAccel(empty())), 0);
    }
    for second in 0..30u64 {
        record_mic(&mut b, &mut rng, second * 1000, 20, true);
        let samples: Vec<[i16; 3]> = (0..10)
            .map(|_| [rng.gen_range(-300..300), rng.gen_range(-300..300), 1000])
            .collect();
        b.accel_read(&samples, ticks((second + 1) * 1000));
        b.run_jobs(ticks((second + 1) * 1000));
        // An attentive hub drains the link.
        while b.sender_mut().take_slice().is_some() {}
    }
    b.into_storage().dump()
}

#[test]
fn streaming_does_not_change_stored_chunks() {
    for seed in 0..3 {
        assert_eq!(storage_run(false, seed), storage_run(true, seed));
    }
}

#[test]
fn streamed_points_arrive_as_stream_messages() {
    let mut b = connected();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    exchange(&mut b, &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })), 0);
    exchange(&mut b, &req(RequestKind::StreamStartMicrophone(empty())), 0);
    record_mic(&mut b, &mut rng, 0, 32, true);
    let mut reader = FrameReader::new(4096);
    while let Some(s) = b.sender_mut().take_slice() {
        reader.push(&s).unwrap();
    }
    let mut values = 0;
    while let Some(f) = reader.next_frame().unwrap() {
        match Response::decode(&f).unwrap().kind {
            ResponseKind::MicrophoneStream(m) => values += m.values.len(),
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(values, 32);
    exchange(&mut b, &req(RequestKind::StopMicrophone(empty())), ticks(2000));
    assert!(!b.recorder().is_streaming(Source::Microphone));
}

#[test]
fn battery_reading_refreshes_advertised_byte() {
    let mut b = connected();
    assert_eq!(b.advertising_packet().battery, 0);
    // 853/1024 · 3.6 = 2.9988 V
    b.battery_read(853, 0);
    assert_eq!(b.advertising_packet().battery, 200);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fuzzed_frames_never_crash_the_handler(
        frames in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..40), 1..8),
        raw in prop::collection::vec(any::<u8>(), 0..60),
    ) {
        let mut b = connected();
        for (i, f) in frames.iter().enumerate() {
            if !b.is_connected() {
                b.on_connect();
            }
            exchange(&mut b, &frame(f), ticks(i as u64 * 100));
        }
        if !b.is_connected() {
            b.on_connect();
        }
        b.on_receive(&raw, ticks(10_000));
        b.run_jobs(ticks(10_000));
        // The state machine is back to idle: a fresh connection answers.
        b.on_disconnect();
        b.on_connect();
        let resp = exchange(&mut b, &status_req(1 << 40, None), ticks(20_000));
        let ok = matches!(resp[..], [Response { kind: ResponseKind::Status(_) }]);
        prop_assert!(ok);
    }

    #[test]
    fn response_frames_resplit_under_random_slicing(
        seed in any::<u64>(),
        cuts in prop::collection::vec(1usize..64, 1..200),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = connected();
        exchange(&mut b, &req(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })), 0);
        record_mic(&mut b, &mut rng, 0, 112 * 3, true);
        let mut expected = Vec::new();
        let mut wire = Vec::new();
        for kind in [
            RequestKind::Status(StatusRequest { timestamp: Timestamp::from_millis(5000), assignment: None }),
            RequestKind::DataRequest(DataRequest { source: 0, since: Timestamp::default() }),
            RequestKind::Selftest(empty()),
        ] {
            for r in exchange(&mut b, &req(kind), ticks(20_000)) {
                let bytes = r.encode().unwrap();
                wire.extend(frame(&bytes));
                expected.push(bytes);
            }
        }
        let mut reader = FrameReader::new(4096);
        let mut got = Vec::new();
        let mut pos = 0;
        let mut i = 0;
        while pos < wire.len() {
            let n = cuts[i % cuts.len()].min(wire.len() - pos);
            reader.push(&wire[pos..pos + n]).unwrap();
            pos += n;
            i += 1;
            while let Some(f) = reader.next_frame().unwrap() {
                got.push(f);
            }
        }
        prop_assert_eq!(got, expected);
        prop_assert_eq!(reader.buffered(), 0);
    }
}

#[test]
fn ticks_helper_matches_rate() {
    assert_eq!(TICKS_PER_MS, 32);
    assert_eq!(ticks(1000), 32768);
}
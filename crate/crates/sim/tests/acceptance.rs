//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use badge_core::badge::chunks::{Aggregation, BEACON_ID_MIN, SCAN_CAPACITY, SCAN_STORED_DEVICES};
use badge_core::badge::processing::{battery_decode, battery_encode, scan_aggregate_and_sort, sort_and_truncate};
use badge_core::badge::proto::{ScanChunk, ScanResultData, Timestamp};
use badge_core::badge::Chunk;
use badge_core::seqfs::{Filesystem, PartitionConfig};
use badge_core::timebase::{SyncConfig, SyncSample, SyncState, NOMINAL_HZ, SLOPE_FRAC_BITS};
use badge_core::vmem::{FlashModel, FlashStorage, VirtualStorage, FLASH_WORD_SIZE};
use badge_sim::experiments::{audio_window_mae, measure_throughput_on, prerecorded_mic_image, throughput_scenario};
use badge_sim::experiments::{SyncExperiment, THROUGHPUT_CHUNKS};
use badge_sim::faults::run_campaign;
use badge_sim::scenario::{PumpMode, SyncSettings};
use badge_sim::signals::AudioParams;
use tinybuf::random::{random_message, random_schema};
use tinybuf::{parse_schema, Message};

type Verdict = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Verdict);

fn check(cond: bool, detail: String) -> Verdict {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tinybuf_sizes() -> Verdict {
    let schema = parse_schema("message Vals { repeated uint16 values[100]; }").map_err(|e| e.to_string())?;
    let full = Message::new().with("values", (0..100u16).collect::<Vec<_>>());
    let vals = schema.encode("Vals", &full).map_err(|e| e.to_string())?.len();

    let chunk = Chunk::Scan(ScanChunk {
        timestamp: Timestamp { seconds: 1, ms: 2 },
        devices: (0..29)
            .map(|i| ScanResultData {
                id: i,
                rssi: -50,
                count: 3,
            })
            .collect(),
    });
    let scan = chunk.encode().map_err(|e| e.to_string())?.len();
    check(vals == 201 && scan == 123, format!("100 x uint16 = {vals} B, ScanChunk(29) = {scan} B"))
}

fn round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7b);
    let mut checked = 0u32;
    let mut failures = 0u32;
    while checked < 10_000 {
        let schema = random_schema(&mut rng, 5);
        for desc in schema.messages() {
            for _ in 0..4 {
                let msg = random_message(&mut rng, &schema, &desc.name);
                let ok = match schema.encode(&desc.name, &msg) {
                    Ok(bytes) => {
                        schema.encoded_size(&desc.name, &msg).ok() == Some(bytes.len())
                            && schema.decode(&desc.name, &bytes).ok().as_ref() == Some(&msg)
                    }
                    Err(_) => false,
                };
                failures += !ok as u32;
                checked += 1;
            }
        }
    }
    check(failures == 0, format!("{checked} messages, {failures} mismatches"))
}

fn filesystem_overhead() -> Verdict {
    let mut headers = Vec::new();
    for (crc, dynamic) in [(false, false), (true, false), (false, true), (true, true)] {
        let cfg = if dynamic {
            PartitionConfig::dynamic(1, 8192, crc)
        } else {
            PartitionConfig::fixed(1, 8192, 10, crc)
        };
        let mut fs = Filesystem::new(VirtualStorage::default());
        let h = fs.register(cfg).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            fs.store(h, &[0x5A; 10]).map_err(|e| e.to_string())?;
        }
        let e = fs.elements(h).map_err(|e| e.to_string())?;
        let spacing = e[1].addr - e[0].addr - 10;
        if spacing != cfg.header_size() {
            return Err(format!("measured {spacing} B header, table says {}", cfg.header_size()));
        }
        headers.push(spacing);
    }

    let worst = Chunk::Scan(ScanChunk {
        timestamp: Timestamp { seconds: 0, ms: 0 },
        devices: vec![
            ScanResultData {
                id: 1,
                rssi: -1,
                count: 1
            };
            SCAN_CAPACITY
        ],
    })
    .encode()
    .map_err(|e| e.to_string())?;
    let cfg = PartitionConfig::dynamic(2, 16 * 1024, true);
    let mut fs = Filesystem::new(VirtualStorage::default());
    let h = fs.register(cfg).map_err(|e| e.to_string())?;
    fs.store(h, &worst).map_err(|e| e.to_string())?;
    fs.store(h, &worst).map_err(|e| e.to_string())?;
    let e = fs.elements(h).map_err(|e| e.to_string())?;
    let occupied = e[1].addr - e[0].addr;
    check(
        headers == [2, 4, 4, 6] && worst.len() == 1027 && occupied == 1027 + cfg.header_size(),
        format!(
            "headers {headers:?} B, 255-device scan payload {} B, element {occupied} B",
            worst.len()
        ),
    )
}

fn crash_consistency() -> Verdict {
    let r = run_campaign(2024, 1000);
    check(
        r.is_clean() && r.cuts == 1000,
        format!(
            "{} cuts over {} stores: {} phantom, {} lost, {} misordered, {} collateral",
            r.cuts, r.stores, r.phantoms, r.lost, r.order_violations, r.collateral_changes
        ),
    )
}

fn flash_semantics() -> Verdict {
    let mut flash = FlashStorage::new(FlashModel::default());
    flash.store(1, &[0xAB]).map_err(|e| e.to_string())?;
    let fixture = flash.model().cells()[0..4].to_vec();

    let mut rng = ChaCha8Rng::seed_from_u64(0xF1A5);
    let mut model = FlashModel::new(4, 256);
    let mut expected = vec![0xFFu8; model.size()];
    let words = model.size() / FLASH_WORD_SIZE;
    for _ in 0..10_000 {
        let addr = rng.gen_range(0..words) * FLASH_WORD_SIZE;
        let word: [u8; FLASH_WORD_SIZE] = rng.gen();
        model.store_word(addr, word).map_err(|e| e.to_string())?;
        for (cell, w) in expected[addr..addr + FLASH_WORD_SIZE].iter_mut().zip(word) {
            *cell &= w;
        }
    }
    check(
        fixture == [0xFF, 0xAB, 0xFF, 0xFF] && model.cells() == &expected[..],
        format!("byte-in-word {fixture:02X?}, 10000 word writes match the analytic AND"),
    )
}

fn clock_sync() -> Verdict {
    let mut maxes = Vec::new();
    let mut ratios = Vec::new();
    for seed in 0..3 {
        let constant = SyncExperiment {
            seed,
            settings: SyncSettings::constant(),
            ..SyncExperiment::default()
        }
        .run()
        .map_err(|e| e.to_string())?;
        let ewma = SyncExperiment {
            seed,
            settings: SyncSettings::ewma(0.11, 3.833),
            ..SyncExperiment::default()
        }
        .run()
        .map_err(|e| e.to_string())?;
        maxes.push(constant.max_abs_ms);
        ratios.push(ewma.mae_ms / constant.mae_ms);
    }
    check(
        maxes.iter().all(|m| (35.0..=45.0).contains(m)) && ratios.iter().all(|&r| r <= 0.30),
        format!(
            "constant max error {} ms, EWMA/constant MAE {}",
            fmt_list(&maxes, 1),
            fmt_list(&ratios.iter().map(|r| r * 100.0).collect::<Vec<_>>(), 1) + " %"
        ),
    )
}

fn clamp_property() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1A);
    let one = (1u128 << SLOPE_FRAC_BITS) as f64;
    let mut checked = 0u64;
    let mut violations = 0u64;
    let mut clamped = 0u64;
    for _ in 0..2000 {
        let f_dev = rng.gen_range(0.5..200.0);
        let mut state = SyncState::new(SyncConfig::ewma(rng.gen_range(0.01..1.0), f_dev));
        let (lo, hi) = state.slope_bounds();
        let hz = NOMINAL_HZ as f64;
        if lo != (1000.0 * one / (hz + f_dev)).round() as u64 || hi != (1000.0 * one / (hz - f_dev)).round() as u64 {
            violations += 1;
        }
        let mut ticks = rng.gen_range(0..1u64 << 40);
        let mut ms = rng.gen_range(0..1i64 << 42);
        for _ in 0..50 {
            let dt = rng.gen_range(1..3_600_000u64);
            ticks += dt;
            let mut received = ms + (dt as f64 * 1000.0 / hz) as i64;
            if rng.gen_bool(0.3) {
                received += rng.gen_range(-600_000..600_000);
            }
            ms = received;
            let outcome = state.on_sync(SyncSample {
                received_ms: received,
                ticks,
            });
            if let Ok(o) = outcome {
                if let Some(m) = o.instant_slope {
                    checked += 1;
                    violations += !(lo..=hi).contains(&m) as u64;
                    clamped += (m == lo || m == hi) as u64;
                }
            }
        }
    }
    check(
        violations == 0 && checked > 0,
        format!("{checked} instantaneous slopes ({clamped} at a bound), {violations} outside the clamp"),
    )
}

fn throughput() -> Verdict {
    let image = prerecorded_mic_image(THROUGHPUT_CHUNKS);
    let run = |mode: PumpMode, seed: u64| measure_throughput_on(throughput_scenario(mode, seed), &image);
    let mut detail = Vec::new();
    let mut ok = true;
    let mut t6 = Vec::new();
    for seed in 0..3 {
        let timer = run(PumpMode::Timer { period_ms: 6.0 }, seed).map_err(|e| e.to_string())?;
        let sched = run(PumpMode::scheduler_default(), seed).map_err(|e| e.to_string())?;
        let callback = run(PumpMode::Callback, seed).map_err(|e| e.to_string())?;
        ok &= timer.bytes_per_s > sched.bytes_per_s && sched.bytes_per_s > callback.bytes_per_s;
        ok &= (2200.0..=2400.0).contains(&timer.bytes_per_s);
        ok &= timer.max_bytes_per_s as f64 <= timer.ceiling_bytes_per_s;
        t6.push(timer.bytes_per_s);
        if seed == 0 {
            detail.push(format!(
                "seed 0 timer/scheduler/callback {:.0}/{:.0}/{:.0} B/s",
                timer.bytes_per_s, sched.bytes_per_s, callback.bytes_per_s
            ));
        }
    }
    detail.insert(0, format!("T=6 ms {} B/s", fmt_list(&t6, 0)));
    for period in [6.0, 10.0, 20.0, 50.0] {
        let r = run(PumpMode::Timer { period_ms: period }, 7).map_err(|e| e.to_string())?;
        let bound = 20.0 * 1000.0 / period;
        ok &= r.bytes_per_s <= bound && r.max_bytes_per_s as f64 <= bound;
        detail.push(format!("T={period} {:.0}<={bound:.0}", r.max_bytes_per_s.max(r.bytes_per_s as u64)));
    }
    check(ok, detail.join(", "))
}

fn battery_codec() -> Verdict {
    let mut worst = 0.0f64;
    for i in 100..=355 {
        let v = i as f64 / 100.0;
        worst = worst.max((battery_decode(battery_encode(v)) - v).abs());
    }
    check(worst <= 0.005, format!("256 grid points, max error {worst:.2e} V"))
}

/// Independent oracle: insertion sort with an explicit comparator, then
/// truncation.
fn oracle_sort(devices: &[ScanResultData]) -> Vec<ScanResultData> {
    let before = |a: &ScanResultData, b: &ScanResultData| {
        let (ab, bb) = (a.id >= BEACON_ID_MIN, b.id >= BEACON_ID_MIN);
        if ab != bb {
            return ab;
        }
        a.rssi > b.rssi
    };
    let mut out: Vec<ScanResultData> = Vec::new();
    for d in devices {
        let pos = out.iter().position(|o| before(d, o)).unwrap_or(out.len());
        out.insert(pos, d.clone());
    }
    out.truncate(SCAN_STORED_DEVICES);
    out
}

fn oracle_aggregate(observations: &[(u16, i8)], aggregation: Aggregation) -> Vec<ScanResultData> {
    let mut order = Vec::new();
    let mut seen: BTreeMap<u16, Vec<i8>> = BTreeMap::new();
    for &(id, rssi) in observations {
        if !seen.contains_key(&id) {
            if seen.len() == SCAN_CAPACITY {
                continue;
            }
            order.push(id);
        }
        seen.entry(id).or_default().push(rssi);
    }
    let devices: Vec<ScanResultData> = order
        .iter()
        .map(|id| {
            let r = &seen[id];
            let rssi = match aggregation {
                Aggregation::Mean => (r.iter().map(|&x| x as f64).sum::<f64>() / r.len() as f64).floor() as i8,
                Aggregation::Max => *r.iter().max().unwrap(),
            };
            ScanResultData {
                id: *id,
                rssi,
                count: r.len().min(255) as u8,
            }
        })
        .collect();
    oracle_sort(&devices)
}

fn scan_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5CA4);
    let mut mismatches = 0;
    let mut beacon_drops = 0;
    for i in 0..10_000 {
        let n = rng.gen_range(0..=SCAN_CAPACITY);
        let random_id = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.2) {
                rng.gen_range(BEACON_ID_MIN..=u16::MAX)
            } else {
                rng.gen_range(0..BEACON_ID_MIN)
            }
        };
        if i % 2 == 0 {
            let devices: Vec<ScanResultData> = (0..n)
                .map(|_| ScanResultData {
                    id: random_id(&mut rng),
                    rssi: rng.gen_range(-100..=-20),
                    count: rng.gen_range(1..=20),
                })
                .collect();
            let mut got = devices.clone();
            sort_and_truncate(&mut got);
            mismatches += (got != oracle_sort(&devices)) as u32;
            let beacons = devices.iter().filter(|d| d.id >= BEACON_ID_MIN).count();
            let kept = got.iter().filter(|d| d.id >= BEACON_ID_MIN).count();
            let others_kept = got.len() - kept;
            beacon_drops += (kept < beacons && others_kept > 0) as u32;
        } else {
            let pool: Vec<u16> = (0..rng.gen_range(1..300)).map(|_| random_id(&mut rng)).collect();
            let observations: Vec<(u16, i8)> = (0..n * 2)
                .map(|_| (pool[rng.gen_range(0..pool.len())], rng.gen_range(-100..=-20)))
                .collect();
            let aggregation = if rng.gen_bool(0.5) {
                Aggregation::Mean
            } else {
                Aggregation::Max
            };
            let got = scan_aggregate_and_sort(&observations, aggregation);
            mismatches += (got != oracle_aggregate(&observations, aggregation)) as u32;
        }
    }
    check(
        mismatches == 0 && beacon_drops == 0,
        format!("10000 lists, {mismatches} oracle mismatches, {beacon_drops} beacons dropped for non-beacons"),
    )
}

fn audio_averaging() -> Verdict {
    let params = AudioParams::default();
    let mut all = Vec::new();
    for seed in 0..3 {
        all.extend(audio_window_mae(&params, seed, (1, 2), 60.0, 20.0));
    }
    let worst = all.iter().cloned().fold(0.0, f64::max);
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    check(
        !all.is_empty() && worst <= 1.0,
        format!("{} windows of 20 s, mean MAE {mean:.3}, max {worst:.3} units", all.len()),
    )
}

fn fmt_list(v: &[f64], decimals: usize) -> String {
    v.iter().map(|x| format!("{x:.decimals$}")).collect::<Vec<_>>().join("/")
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("tinybuf-sizes", Duration::from_secs(1), tinybuf_sizes),
        ("round-trip", Duration::from_secs(30), round_trip),
        ("fs-overhead", Duration::from_secs(30), filesystem_overhead),
        ("crash-consistency", Duration::from_secs(60), crash_consistency),
        ("flash-semantics", Duration::from_secs(30), flash_semantics),
        ("clock-sync", Duration::from_secs(60), clock_sync),
        ("clamp", Duration::from_secs(30), clamp_property),
        ("throughput", Duration::from_secs(120), throughput),
        ("battery-codec", Duration::from_secs(1), battery_codec),
        ("scan-oracle", Duration::from_secs(30), scan_oracle),
        ("audio-averaging", Duration::from_secs(60), audio_averaging),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match verdict {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; took {elapsed:.1?}, budget {budget:?}")),
            Err(d) => (false, d),
        };
        failed += !ok as u32;
        println!(
            "{} {name}: {detail} ({:.2} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}

//! The measurement setups: link throughput per pump mode, clock sync over
//! a long run, and multi-sample microphone averaging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use badge_core::badge::chunks::MIC_CHUNK_POINTS;
use badge_core::badge::processing::{MicAccumulator, MIC_SAMPLE_PERIOD_US};
use badge_core::badge::proto::{MicrophoneConfig, RequestKind};
use badge_core::badge::{frame, Badge, BadgeConfig, Source};
use badge_core::timebase::NOMINAL_HZ;
use badge_core::vmem::VirtualStorage;

use crate::event::{NS_PER_MS, NS_PER_US};
use crate::hub;
use crate::metrics::{mae, max_abs};
use crate::oscillator::DriftModel;
use crate::scenario::{
    BadgeSpec, DataRequestPlan, HubPlan, PumpMode, Scenario, SyncPlan, SyncSettings, TransportConfig,
};
use crate::signals::{AudioParams, AudioSignal};
use crate::world::{SimError, World, MIC_CONVERSION_SPACING_NS};

/// Microphone chunks recorded before a throughput measurement.
pub const THROUGHPUT_CHUNKS: usize = 50;
/// Duration of the clock sync experiment.
pub const SYNC_DURATION_S: f64 = 9.5 * 3600.0;

/// A storage image holding `chunks` full microphone chunks, recorded
/// through the badge's own pipeline.
pub fn prerecorded_mic_image(chunks: usize) -> VirtualStorage {
    let mut badge = Badge::new(BadgeConfig::default(), VirtualStorage::default()).expect("blank storage mounts");
    badge.on_connect();
    let start = hub::encode(RequestKind::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 }));
    badge.on_receive(&frame(&start), 0);
    badge.run_jobs(0);
    let window_ticks = NOMINAL_HZ as u64 / 20;
    for w in 1..=(chunks * MIC_CHUNK_POINTS) as u64 {
        for i in 0..35u8 {
            badge.mic_sample(128 + i % 16);
        }
        badge.mic_average(w * window_ticks).expect("window has samples");
        badge.run_jobs(w * window_ticks);
    }
    badge.on_disconnect();
    assert_eq!(badge.storer().stored_count(Source::Microphone), chunks as u64);
    badge.into_storage()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputResult {
    pub mode: PumpMode,
    pub bytes: u64,
    pub chunks: u32,
    pub elapsed_s: f64,
    pub bytes_per_s: f64,
    /// Most badge to hub bytes seen in any one-second window.
    pub max_bytes_per_s: u64,
    pub ceiling_bytes_per_s: f64,
}

/// One badge holding prerecorded chunks; the hub connects at a random
/// phase and requests all microphone data one to two seconds later.
pub fn throughput_scenario(mode: PumpMode, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7407);
    let at_s = 1.0 + rng.gen::<f64>();
    Scenario {
        seed,
        duration_s: 120.0,
        epoch_ms: 1_600_000_000_000,
        transport: TransportConfig::default(),
        pump: mode,
        badges: vec![badge_spec(1, DriftModel::default(), SyncSettings::default())],
        beacons: Vec::new(),
        hub: HubPlan {
            data_requests: vec![DataRequestPlan {
                at_s,
                badge: 0,
                source: "mic".into(),
                since_ms: 0,
            }],
            ..HubPlan::default()
        },
        faults: Default::default(),
        environment: Default::default(),
    }
}

fn badge_spec(id: u16, drift: DriftModel, sync: SyncSettings) -> BadgeSpec {
    BadgeSpec {
        id,
        group: 1,
        position: 0.0,
        drift,
        sync,
        sources: Vec::new(),
        stream: Vec::new(),
    }
}

pub fn measure_throughput_on(scenario: Scenario, image: &VirtualStorage) -> Result<ThroughputResult, SimError> {
    let mode = scenario.pump;
    let mut world = World::new(scenario)?;
    world.set_storage(0, VirtualStorage::from_image(&image.dump()).expect("image of a valid storage"))?;
    let out = world.run()?;
    let row = out.metrics.throughput.first().cloned().unwrap_or_else(|| panic!("transfer did not complete"));
    let summary = &out.metrics.summary;
    Ok(ThroughputResult {
        mode,
        bytes: row.bytes,
        chunks: row.chunks,
        elapsed_s: row.last_chunk_s - row.request_s,
        bytes_per_s: row.bytes_per_s,
        max_bytes_per_s: summary.badges[0].max_bytes_per_s,
        ceiling_bytes_per_s: summary.link_ceiling_bytes_per_s,
    })
}

pub fn measure_throughput(mode: PumpMode, seed: u64) -> Result<ThroughputResult, SimError> {
    measure_throughput_on(throughput_scenario(mode, seed), &prerecorded_mic_image(THROUGHPUT_CHUNKS))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncExperiment {
    pub seed: u64,
    pub drift_hz: f64,
    pub settings: SyncSettings,
    pub duration_s: f64,
    pub max_gap_s: f64,
    pub jitter_ms: f64,
}

impl Default for SyncExperiment {
    fn default() -> Self {
        SyncExperiment {
            seed: 1,
            drift_hz: 2.2,
            settings: SyncSettings::default(),
            duration_s: SYNC_DURATION_S,
            max_gap_s: 600.0,
            jitter_ms: TransportConfig::default().sync_jitter_ms,
        }
    }
}

impl SyncExperiment {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            seed: self.seed,
            duration_s: self.duration_s,
            epoch_ms: 1_600_000_000_000,
            transport: TransportConfig {
                sync_jitter_ms: self.jitter_ms,
                ..TransportConfig::default()
            },
            pump: PumpMode::default(),
            badges: vec![badge_spec(
                1,
                DriftModel::Constant {
                    offset_hz: self.drift_hz,
                },
                self.settings,
            )],
            beacons: Vec::new(),
            hub: HubPlan {
                sync: Some(SyncPlan {
                    min_gap_s: 0.0,
                    max_gap_s: self.max_gap_s,
                }),
                ..HubPlan::default()
            },
            faults: Default::default(),
            environment: Default::default(),
        }
    }

    pub fn run(&self) -> Result<SyncResult, SimError> {
        let out = World::new(self.scenario())?.run()?;
        let errors: Vec<f64> = out.metrics.sync_errors.iter().map(|r| r.error_ms).collect();
        Ok(SyncResult {
            mae_ms: mae(&errors).unwrap_or(0.0),
            max_abs_ms: max_abs(&errors).unwrap_or(0.0),
            errors,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    /// Error of every sync after the first, badge minus hub, in ms.
    pub errors: Vec<f64>,
    pub mae_ms: f64,
    pub max_abs_ms: f64,
}

/// Averaged microphone values for `samples_per_tick` conversions per
/// sampling tick, one per averaging window.
pub fn averaged_audio(
    signal: &AudioSignal,
    samples_per_tick: u32,
    duration_s: f64,
    avg_period_ms: u64,
) -> Vec<u8> {
    let mut signal = signal.clone();
    let tick_ns = MIC_SAMPLE_PERIOD_US * NS_PER_US;
    let window_ns = avg_period_ms * NS_PER_MS;
    let end = (duration_s * 1e9) as u64;
    let mut out = Vec::with_capacity((end / window_ns) as usize);
    let mut acc = MicAccumulator::default();
    let mut next_avg = window_ns;
    let mut t = tick_ns;
    while next_avg <= end {
        while t < next_avg {
            for j in 0..samples_per_tick as u64 {
                acc.push(signal.adc((t + j * MIC_CONVERSION_SPACING_NS) as f64 * 1e-9));
            }
            t += tick_ns;
        }
        out.push(acc.take().expect("every window holds samples"));
        next_avg += window_ns;
    }
    out
}

/// Mean absolute difference of two averaged signals per window of
/// `window_s` seconds.
pub fn audio_window_mae(
    params: &AudioParams,
    seed: u64,
    samples: (u32, u32),
    duration_s: f64,
    window_s: f64,
) -> Vec<f64> {
    let signal = AudioSignal::new(params, seed);
    let a = averaged_audio(&signal, samples.0, duration_s, 50);
    let b = averaged_audio(&signal, samples.1, duration_s, 50);
    let per_window = (window_s * 20.0).round() as usize;
    a.chunks(per_window)
        .zip(b.chunks(per_window))
        .filter(|(x, _)| x.len() == per_window)
        .map(|(x, y)| {
            x.iter().zip(y).map(|(&p, &q)| (p as f64 - q as f64).abs()).sum::<f64>() / per_window as f64
        })
        .collect()
}

//! The simulation engine: badges, their oscillators and sensors, the hub
//! and the links between them, driven by one event queue.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use badge_core::badge::advertising::ADVERTISING_PERIOD_MS;
use badge_core::badge::processing::{HighPass, MotionDetector, ACCEL_HIGH_PASS_HZ};
use badge_core::badge::proto::ResponseKind;
use badge_core::badge::{
    frame, AdvertisingPacket, Badge, BadgeConfig, BadgeEvent, Chunk, FrameReader, Job, Source, SourceConfig,
    StatusFlags, StepOutcome, TimerKind,
};
use badge_core::seqfs::FsError;
use badge_core::vmem::VirtualStorage;

use crate::event::{millis, secs, EventQueue, NS_PER_MS, NS_PER_S, NS_PER_US};
use crate::hub;
use crate::link::{packets, Link};
use crate::metrics::{
    mae, max_abs, BadgeSummary, Metrics, RecoveryRow, StorageRow, Summary, SyncErrorRow, ThroughputRow,
};
use crate::oscillator::Oscillator;
use crate::scenario::{PumpMode, Scenario, ScenarioError};
use crate::signals::{rssi, AudioSignal, Motion};

/// Spacing of the conversions of one multi-sample microphone read.
pub const MIC_CONVERSION_SPACING_NS: u64 = 50 * NS_PER_US;
/// Rate at which the accelerometer's motion logic evaluates samples.
pub const MOTION_POLL_NS: u64 = 10 * NS_PER_MS;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("badge {badge} storage does not mount: {source}")]
    Mount { badge: usize, source: FsError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Timer { node: usize, kind: TimerKind, gen: u64 },
    ScanEnd { node: usize, gen: u64 },
    MotionPoll { node: usize, gen: u64 },
    Conn { node: usize, epoch: u64 },
    Pump { node: usize, epoch: u64 },
    Retry { node: usize, epoch: u64 },
    HubConnect { node: usize },
    HubSync { node: usize, epoch: u64 },
    DataRequest { index: usize },
    PowerCut { index: usize },
}

impl Ev {
    fn node(&self, scenario: &Scenario) -> usize {
        match *self {
            Ev::Timer { node, .. }
            | Ev::ScanEnd { node, .. }
            | Ev::MotionPoll { node, .. }
            | Ev::Conn { node, .. }
            | Ev::Pump { node, .. }
            | Ev::Retry { node, .. }
            | Ev::HubConnect { node }
            | Ev::HubSync { node, .. } => node,
            Ev::DataRequest { index } => scenario.hub.data_requests[index].badge,
            Ev::PowerCut { index } => scenario.faults.power_cuts[index].badge,
        }
    }
}

const TIMER_KINDS: [TimerKind; 5] = [
    TimerKind::MicSample,
    TimerKind::MicAverage,
    TimerKind::ScanPeriod,
    TimerKind::AccelRead,
    TimerKind::BatteryRead,
];

fn timer_index(kind: TimerKind) -> Option<usize> {
    TIMER_KINDS.iter().position(|&k| k == kind)
}

#[derive(Debug, Clone)]
enum HubFrame {
    /// Status request, stamped when it goes on air.
    Status { assign: bool },
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone)]
struct Transfer {
    source: Source,
    request_ns: u64,
    last_ns: Option<u64>,
    chunks: u32,
    bytes: u64,
    last_ms: Option<i64>,
    monotonic: bool,
}

#[derive(Debug, Clone)]
struct MotionPoll {
    gen: u64,
    config: SourceConfig,
    detector: MotionDetector,
    filter: HighPass,
    motion: Motion,
}

struct Node {
    config: BadgeConfig,
    badge: Option<Badge>,
    osc: Oscillator,
    boot_ticks: u64,
    next_gen: u64,
    timers: [Option<(u64, u64)>; 5],
    scan: Option<u64>,
    poll: Option<MotionPoll>,
    motion_seed: u64,
    accel_motion: Motion,
    audio: AudioSignal,
    rng: ChaCha8Rng,
    link: Link,
    epoch: u64,
    conn_armed: bool,
    pump_armed: bool,
    retry_armed: bool,
    hub_frames: VecDeque<HubFrame>,
    hub_reader: FrameReader,
    transfers: VecDeque<Transfer>,
    sync_seen: usize,
    sync_errors: Vec<f64>,
    cut_counts: Option<[u64; 5]>,
    window: (u64, u64, u64),
    summary: BadgeSummary,
}

impl Node {
    fn badge(&mut self) -> &mut Badge {
        self.badge.as_mut().expect("badge is running")
    }

    fn ticks(&mut self, now: u64) -> u64 {
        self.osc.ticks_at(now) - self.boot_ticks
    }

    fn gen(&mut self) -> u64 {
        self.next_gen += 1;
        self.next_gen
    }

    /// Hands one slice from the TX FIFO to the radio if it has room.
    fn move_slice(&mut self) -> bool {
        if !self.link.has_room() {
            return false;
        }
        let Some(slice) = self.badge.as_mut().and_then(|b| b.sender_mut().take_slice()) else {
            return false;
        };
        self.link.send_up(slice);
        true
    }

    fn tx_pending(&self) -> bool {
        self.badge.as_ref().is_some_and(|b| b.sender().tx_len() > 0)
    }
}

fn alive_counts(badge: &Badge) -> [u64; 5] {
    let s = badge.storer();
    Source::ALL.map(|src| s.fs().elements(s.handle(src)).map_or(0, |e| e.len() as u64))
}

/// What a run produced.
pub struct Outcome {
    pub metrics: Metrics,
    /// Final state of every badge, in scenario order.
    pub badges: Vec<Badge>,
    /// Time of every processed event, when requested with
    /// [`World::record_event_times`].
    pub event_times: Vec<u64>,
}

pub struct World {
    scenario: Scenario,
    queue: EventQueue<Ev>,
    nodes: Vec<Node>,
    trace: Sha256,
    events: u64,
    max_queue: usize,
    metrics: Metrics,
    event_times: Option<Vec<u64>>,
}

impl World {
    pub fn new(scenario: Scenario) -> Result<World, SimError> {
        scenario.validate()?;
        let mut master = ChaCha8Rng::seed_from_u64(scenario.seed);
        let mut nodes = Vec::with_capacity(scenario.badges.len());
        for (i, spec) in scenario.badges.iter().enumerate() {
            let config = BadgeConfig {
                mac: [0x02, 0xBA, 0xD6, 0xE0, (i >> 8) as u8, i as u8],
                sync: spec.sync.to_config(),
                ..BadgeConfig::default()
            };
            let badge = Badge::new(config.clone(), VirtualStorage::default())
                .map_err(|source| SimError::Mount { badge: i, source })?;
            let motion_seed = master.gen();
            nodes.push(Node {
                config,
                badge: Some(badge),
                osc: Oscillator::new(spec.drift.clone()),
                boot_ticks: 0,
                next_gen: 0,
                timers: [None; 5],
                scan: None,
                poll: None,
                motion_seed,
                accel_motion: Motion::new(scenario.environment.motion.clone(), motion_seed),
                audio: AudioSignal::new(&scenario.environment.audio, master.gen()),
                rng: ChaCha8Rng::seed_from_u64(master.gen()),
                link: Link::new(&scenario.transport),
                epoch: 0,
                conn_armed: false,
                pump_armed: false,
                retry_armed: false,
                hub_frames: VecDeque::new(),
                hub_reader: FrameReader::new(1 << 16),
                transfers: VecDeque::new(),
                sync_seen: 0,
                sync_errors: Vec::new(),
                cut_counts: None,
                window: (0, 0, 0),
                summary: BadgeSummary {
                    id: spec.id,
                    ..BadgeSummary::default()
                },
            });
        }
        Ok(World {
            scenario,
            queue: EventQueue::default(),
            nodes,
            trace: Sha256::new(),
            events: 0,
            max_queue: 0,
            metrics: Metrics::default(),
            event_times: None,
        })
    }

    /// Replaces the storage of badge `i` before the run, e.g. with a
    /// prerecorded image.
    pub fn set_storage(&mut self, i: usize, storage: VirtualStorage) -> Result<(), SimError> {
        let node = &mut self.nodes[i];
        node.badge = Some(Badge::new(node.config.clone(), storage).map_err(|source| SimError::Mount { badge: i, source })?);
        Ok(())
    }

    pub fn record_event_times(&mut self) {
        self.event_times = Some(Vec::new());
    }

    pub fn run(mut self) -> Result<Outcome, SimError> {
        let end = secs(self.scenario.duration_s);
        if end > 0 {
            self.schedule_plan();
            for i in 0..self.nodes.len() {
                self.settle(i)?;
            }
        }
        while let Some(t) = self.queue.peek_time() {
            if t >= end {
                break;
            }
            self.max_queue = self.max_queue.max(self.queue.len());
            let (now, ev) = self.queue.pop().expect("peeked");
            self.events += 1;
            if let Some(times) = &mut self.event_times {
                times.push(now);
            }
            self.trace.update(format!("{now} {ev:?}\n").as_bytes());
            let node = ev.node(&self.scenario);
            self.handle(ev)?;
            self.settle(node)?;
        }
        Ok(self.finish())
    }

    fn schedule_plan(&mut self) {
        let hub = &self.scenario.hub;
        if hub.connect_at_start {
            for node in 0..self.nodes.len() {
                self.queue.at(0, Ev::HubConnect { node });
            }
        }
        for (index, r) in hub.data_requests.iter().enumerate() {
            self.queue.at(secs(r.at_s), Ev::DataRequest { index });
        }
        for (index, c) in self.scenario.faults.power_cuts.iter().enumerate() {
            self.queue.at(secs(c.at_s), Ev::PowerCut { index });
        }
    }

    fn hub_ms(&self, t: u64) -> i64 {
        self.scenario.epoch_ms + (t / NS_PER_MS) as i64
    }

    fn handle(&mut self, ev: Ev) -> Result<(), SimError> {
        let now = self.queue.now();
        match ev {
            Ev::Timer { node, kind, gen } => {
                let idx = timer_index(kind).expect("only armed kinds are scheduled");
                let Some((period_us, armed)) = self.nodes[node].timers[idx] else {
                    return Ok(());
                };
                if armed != gen {
                    return Ok(());
                }
                self.queue.at(now + period_us * NS_PER_US, ev);
                self.on_timer(node, kind, now);
            }
            Ev::ScanEnd { node, gen } => {
                if self.nodes[node].scan == Some(gen) {
                    self.nodes[node].scan = None;
                    self.finish_scan(node, now);
                }
            }
            Ev::MotionPoll { node, gen } => {
                let n = &mut self.nodes[node];
                let Some(poll) = n.poll.as_mut().filter(|p| p.gen == gen) else {
                    return Ok(());
                };
                let t = now as f64 / NS_PER_S as f64;
                let v = poll.motion.sample(t).map(f64::from);
                let fired = poll.detector.sample(now / NS_PER_MS, poll.filter.filter(v));
                self.queue.at(now + MOTION_POLL_NS, ev);
                if fired {
                    let ticks = n.ticks(now);
                    n.badge().accel_motion(ticks);
                }
            }
            Ev::Conn { node, epoch } => {
                if self.nodes[node].epoch == epoch {
                    self.nodes[node].conn_armed = false;
                    self.connection_event(node, now);
                }
            }
            Ev::Pump { node, epoch } => {
                let n = &mut self.nodes[node];
                if n.epoch == epoch {
                    n.pump_armed = false;
                    n.move_slice();
                }
            }
            Ev::Retry { node, epoch } => {
                let n = &mut self.nodes[node];
                if n.epoch == epoch {
                    n.retry_armed = false;
                    n.badge().schedule(Job::Handle);
                }
            }
            Ev::HubConnect { node } => self.connect(node, now),
            Ev::HubSync { node, epoch } => {
                if self.nodes[node].epoch == epoch && self.nodes[node].link.is_connected() {
                    self.nodes[node].hub_frames.push_back(HubFrame::Status { assign: false });
                    self.schedule_sync(node, now);
                }
            }
            Ev::DataRequest { index } => {
                let plan = self.scenario.hub.data_requests[index].clone();
                let source = Source::from_name(&plan.source).expect("validated");
                let n = &mut self.nodes[plan.badge];
                if n.link.is_connected() {
                    n.hub_frames
                        .push_back(HubFrame::Bytes(hub::encode(hub::data_request(source, plan.since_ms))));
                    n.transfers.push_back(Transfer {
                        source,
                        request_ns: now,
                        last_ns: None,
                        chunks: 0,
                        bytes: 0,
                        last_ms: None,
                        monotonic: true,
                    });
                }
            }
            Ev::PowerCut { index } => {
                let plan = self.scenario.faults.power_cuts[index].clone();
                let n = &mut self.nodes[plan.badge];
                let counts = alive_counts(n.badge());
                n.cut_counts = Some(counts);
                n.badge().storer().storage().rail().cut_after(plan.after_bytes);
            }
        }
        Ok(())
    }

    fn on_timer(&mut self, node: usize, kind: TimerKind, now: u64) {
        let k = self.scenario.environment.mic_samples_per_tick;
        let battery = self.scenario.environment.battery;
        let n = &mut self.nodes[node];
        let ticks = n.ticks(now);
        let t = now as f64 / NS_PER_S as f64;
        match kind {
            TimerKind::MicSample => {
                for j in 0..k {
                    let adc = n.audio.adc(t + (j as u64 * MIC_CONVERSION_SPACING_NS) as f64 / NS_PER_S as f64);
                    n.badge().mic_sample(adc);
                }
            }
            TimerKind::MicAverage => {
                // Empty windows are counted by the badge.
                let _ = n.badge().mic_average(ticks);
            }
            TimerKind::ScanPeriod => {
                let Some(SourceConfig::Scan(c)) = n.badge().recorder().config(Source::Scan).cloned() else {
                    return;
                };
                n.badge().scan_begin(ticks);
                let gen = n.gen();
                n.scan = Some(gen);
                self.queue.at(now + c.duration_ms as u64 * NS_PER_MS, Ev::ScanEnd { node, gen });
            }
            TimerKind::AccelRead => {
                let Some(SourceConfig::Accel(c)) = n.badge().recorder().config(Source::Accel).cloned() else {
                    return;
                };
                let rate = c.datarate_hz as f64;
                let count = ((c.fifo_read_period_ms as f64 * rate / 1000.0).round() as usize).max(1);
                let samples: Vec<[i16; 3]> = (0..count)
                    .map(|i| n.accel_motion.sample(t - (count - 1 - i) as f64 / rate))
                    .collect();
                n.badge().accel_read(&samples, ticks);
            }
            TimerKind::BatteryRead => n.badge().battery_read(battery.adc10(t), ticks),
            TimerKind::Advertising => {}
        }
    }

    /// Delivers the advertisements heard during the scan that ends now.
    fn finish_scan(&mut self, node: usize, now: u64) {
        let Some(SourceConfig::Scan(c)) = self.nodes[node].badge().recorder().config(Source::Scan).cloned() else {
            return;
        };
        let mut advertisers: Vec<(Vec<u8>, f64)> = Vec::new();
        for (j, other) in self.nodes.iter().enumerate() {
            if j != node {
                if let Some(b) = &other.badge {
                    advertisers.push((b.advertising_packet().encode(), self.scenario.badges[j].position));
                }
            }
        }
        for (j, beacon) in self.scenario.beacons.iter().enumerate() {
            let packet = AdvertisingPacket {
                id: beacon.id,
                group: beacon.group,
                mac: [0x02, 0xBE, 0xAC, 0x00, (j >> 8) as u8, j as u8],
                battery: 0,
                status: StatusFlags::default(),
            };
            advertisers.push((packet.encode(), beacon.position));
        }
        let here = self.scenario.badges[node].position;
        let adverts = (c.duration_ms as u64 / ADVERTISING_PERIOD_MS).max(1);
        let p_heard = c.window_ms as f64 / c.interval_ms as f64;
        let n = &mut self.nodes[node];
        for (bytes, pos) in &advertisers {
            for _ in 0..adverts {
                if n.rng.gen_bool(p_heard) {
                    let r = rssi(here - pos, &mut n.rng);
                    n.badge().scan_report(bytes, r);
                }
            }
        }
        let _ = now;
        n.badge().scan_end();
    }

    fn connect(&mut self, node: usize, now: u64) {
        let spec = self.scenario.badges[node].clone();
        let n = &mut self.nodes[node];
        if n.link.is_connected() || n.badge.is_none() {
            return;
        }
        let phase = n.rng.gen_range(0..n.link.interval_ns());
        n.link.connect(now + phase);
        n.epoch += 1;
        n.badge().on_connect();
        n.hub_frames.push_back(HubFrame::Status { assign: true });
        for s in &spec.sources {
            let cfg = s.to_config().expect("validated");
            n.hub_frames.push_back(HubFrame::Bytes(hub::encode(hub::start(&cfg))));
        }
        for name in &spec.stream {
            let source = Source::from_name(name).expect("validated");
            n.hub_frames.push_back(HubFrame::Bytes(hub::encode(hub::stream_start(source))));
        }
        self.schedule_sync(node, now);
    }

    fn schedule_sync(&mut self, node: usize, now: u64) {
        let Some(plan) = self.scenario.hub.sync else {
            return;
        };
        let n = &mut self.nodes[node];
        let gap = n.rng.gen_range(plan.min_gap_s..=plan.max_gap_s);
        let epoch = n.epoch;
        self.queue.at(now + secs(gap), Ev::HubSync { node, epoch });
    }

    fn connection_event(&mut self, node: usize, now: u64) {
        let jitter_ms = self.scenario.transport.sync_jitter_ms;
        let per_event = self.scenario.transport.packets_per_event;
        let callback = self.scenario.pump == PumpMode::Callback;
        let spec = self.scenario.badges[node].clone();
        if !self.nodes[node].link.is_connected() {
            return;
        }
        // Materialize hub frames that can go out in this event.
        while self.nodes[node].link.down_len() < per_event {
            let Some(f) = self.nodes[node].hub_frames.pop_front() else {
                break;
            };
            let bytes = match f {
                HubFrame::Status { assign } => {
                    let age = millis(self.nodes[node].rng.gen_range(0.0..=jitter_ms));
                    let stamp = self.hub_ms(now.saturating_sub(age));
                    hub::encode(hub::status(stamp, assign.then_some((spec.id, spec.group))))
                }
                HubFrame::Bytes(b) => b,
            };
            for p in packets(&frame(&bytes)) {
                self.nodes[node].link.send_down(p);
            }
        }
        let n = &mut self.nodes[node];
        let ex = n.link.exchange(now);
        let ticks = n.ticks(now);
        for p in &ex.down {
            let b = n.badge();
            if !b.is_connected() {
                break;
            }
            b.on_receive(p, ticks);
        }
        let up_bytes: u64 = ex.up.iter().map(|p| p.len() as u64).sum();
        let bin = (now - n.link.anchor()) / NS_PER_S;
        let (epoch, cur, bytes) = n.window;
        n.window = if (epoch, cur) == (n.epoch, bin) {
            (epoch, cur, bytes + up_bytes)
        } else {
            (n.epoch, bin, up_bytes)
        };
        n.summary.max_bytes_per_s = n.summary.max_bytes_per_s.max(n.window.2);
        for p in &ex.up {
            self.hub_receive(node, p, now);
        }
        if callback {
            let n = &mut self.nodes[node];
            for _ in 0..ex.acked {
                if !n.move_slice() {
                    break;
                }
            }
        }
    }

    fn hub_receive(&mut self, node: usize, packet: &[u8], now: u64) {
        let n = &mut self.nodes[node];
        if n.hub_reader.push(packet).is_err() {
            n.hub_reader.clear();
            return;
        }
        while let Ok(Some(payload)) = n.hub_reader.next_frame() {
            let Ok(response) = hub::decode_response(&payload) else {
                continue;
            };
            match response.kind {
                ResponseKind::DataEnd(end) => {
                    if let Some(t) = n.transfers.pop_front() {
                        let last = t.last_ns.unwrap_or(t.request_ns);
                        let elapsed = (last - t.request_ns) as f64 / NS_PER_S as f64;
                        self.metrics.throughput.push(ThroughputRow {
                            badge: n.summary.id,
                            source: t.source.name().to_string(),
                            request_s: t.request_ns as f64 / NS_PER_S as f64,
                            last_chunk_s: last as f64 / NS_PER_S as f64,
                            chunks: t.chunks,
                            bytes: t.bytes,
                            bytes_per_s: if elapsed > 0.0 { t.bytes as f64 / elapsed } else { 0.0 },
                            corrupted: end.corrupted,
                            timestamps_monotonic: t.monotonic,
                        });
                    }
                }
                ResponseKind::MicrophoneStream(_)
                | ResponseKind::ScanStream(_)
                | ResponseKind::AccelStream(_)
                | ResponseKind::AccelEventStream(_)
                | ResponseKind::BatteryStream(_) => n.summary.stream_messages += 1,
                kind => {
                    if let (Some(chunk), Some(t)) = (Chunk::from_response(kind), n.transfers.front_mut()) {
                        let ms = chunk.timestamp().as_millis();
                        t.monotonic &= t.last_ms.is_none_or(|last| ms >= last);
                        t.last_ms = Some(ms);
                        t.chunks += 1;
                        t.bytes += payload.len() as u64 + 2;
                        t.last_ns = Some(now);
                    }
                }
            }
        }
    }

    /// Runs the badge's main loop after an event and re-arms whatever the
    /// new state needs.
    fn settle(&mut self, node: usize) -> Result<(), SimError> {
        let now = self.queue.now();
        if self.halted(node) {
            return self.reboot(node, now);
        }
        let retry_ns = millis(self.scenario.transport.retry_delay_ms);
        let n = &mut self.nodes[node];
        let ticks = n.ticks(now);
        n.summary.max_scheduler_queue = n.summary.max_scheduler_queue.max(n.badge().queued_jobs());
        let outcome = n.badge().run_jobs(ticks);
        if outcome == StepOutcome::Busy && !n.retry_armed {
            n.retry_armed = true;
            let epoch = n.epoch;
            self.queue.at(now + retry_ns, Ev::Retry { node, epoch });
        }
        let n = &mut self.nodes[node];
        let seen = n.sync_seen;
        let fresh: Vec<f64> = n.badge().sync_errors()[seen..].to_vec();
        n.sync_seen += fresh.len();
        for e in fresh {
            n.sync_errors.push(e);
            self.metrics.sync_errors.push(SyncErrorRow {
                time_s: now as f64 / NS_PER_S as f64,
                badge: n.summary.id,
                error_ms: e,
            });
        }
        let events = n.badge().take_events();
        if events.iter().any(|e| matches!(e, BadgeEvent::Disconnect)) {
            self.link_lost(node, now);
        }
        if self.halted(node) {
            return self.reboot(node, now);
        }
        self.arm_transport(node, now);
        self.reconcile_timers(node, now);
        Ok(())
    }

    fn halted(&self, node: usize) -> bool {
        self.nodes[node]
            .badge
            .as_ref()
            .is_some_and(|b| b.storer().storage().rail().is_halted())
    }

    fn arm_transport(&mut self, node: usize, now: u64) {
        let pump = self.scenario.pump;
        let n = &mut self.nodes[node];
        if !n.link.is_connected() {
            return;
        }
        if n.tx_pending() {
            let delay = match pump {
                PumpMode::Timer { period_ms } => Some(millis(period_ms)),
                PumpMode::Scheduler {
                    queue_load,
                    event_cost_ms,
                } => Some(millis((1 + queue_load) as f64 * event_cost_ms)),
                PumpMode::Callback => {
                    if n.link.in_flight() == 0 && n.link.radio_len() == 0 {
                        n.move_slice();
                    }
                    None
                }
            };
            if let Some(d) = delay {
                if !n.pump_armed {
                    n.pump_armed = true;
                    let epoch = n.epoch;
                    self.queue.at(now + d.max(1), Ev::Pump { node, epoch });
                }
            }
        }
        let n = &mut self.nodes[node];
        if !n.conn_armed && (n.link.has_traffic() || !n.hub_frames.is_empty()) {
            n.conn_armed = true;
            let at = n.link.next_event_at(now);
            let epoch = n.epoch;
            self.queue.at(at, Ev::Conn { node, epoch });
        }
    }

    fn reconcile_timers(&mut self, node: usize, now: u64) {
        let n = &mut self.nodes[node];
        let Some(badge) = n.badge.as_ref() else {
            return;
        };
        let mut wanted = [None; 5];
        for spec in badge.timers() {
            if let Some(i) = timer_index(spec.kind) {
                wanted[i] = Some(spec.period_us);
            }
        }
        let event_config = badge.recorder().config(Source::AccelEvent).cloned();
        for (i, want) in wanted.into_iter().enumerate() {
            let have = n.timers[i].map(|(p, _)| p);
            if want == have {
                continue;
            }
            n.timers[i] = match want {
                Some(period) => {
                    let gen = n.gen();
                    let kind = TIMER_KINDS[i];
                    self.queue.at(now + period * NS_PER_US, Ev::Timer { node, kind, gen });
                    Some((period, gen))
                }
                None => None,
            };
        }
        if n.poll.as_ref().map(|p| &p.config) != event_config.as_ref() {
            n.poll = match event_config {
                Some(SourceConfig::AccelEvent(c)) => {
                    let gen = n.gen();
                    self.queue.at(now + MOTION_POLL_NS, Ev::MotionPoll { node, gen });
                    Some(MotionPoll {
                        gen,
                        detector: MotionDetector::new(c.threshold_mg, c.min_duration_ms, c.dead_time_ms),
                        filter: HighPass::new(ACCEL_HIGH_PASS_HZ, NS_PER_S as f64 / MOTION_POLL_NS as f64),
                        motion: Motion::new(self.scenario.environment.motion.clone(), n.motion_seed),
                        config: SourceConfig::AccelEvent(c),
                    })
                }
                _ => None,
            };
        }
    }

    fn link_lost(&mut self, node: usize, now: u64) {
        let n = &mut self.nodes[node];
        if !n.link.is_connected() {
            return;
        }
        n.link.disconnect();
        n.epoch += 1;
        n.conn_armed = false;
        n.pump_armed = false;
        n.retry_armed = false;
        n.hub_frames.clear();
        n.hub_reader.clear();
        n.transfers.clear();
        if let Some(after) = self.scenario.hub.reconnect_after_s {
            self.queue.at(now + secs(after), Ev::HubConnect { node });
        }
    }

    fn reboot(&mut self, node: usize, now: u64) -> Result<(), SimError> {
        let time_s = now as f64 / NS_PER_S as f64;
        let n = &mut self.nodes[node];
        let old = n.badge.take().expect("badge is running");
        let at_cut = n.cut_counts.take().unwrap_or_else(|| alive_counts(&old));
        let lost_in_ram = Source::ALL.map(|s| old.recorder().pending(s) as u64);
        let storage = old.into_storage();
        storage.rail().restore();
        let badge = Badge::new(n.config.clone(), storage).map_err(|source| SimError::Mount { badge: node, source })?;
        let recovered = alive_counts(&badge);
        for s in Source::ALL {
            let i = s.index();
            if at_cut[i] + recovered[i] + lost_in_ram[i] > 0 {
                self.metrics.recovery.push(RecoveryRow {
                    time_s,
                    badge: n.summary.id,
                    source: s.name().to_string(),
                    elements_at_cut: at_cut[i],
                    elements_recovered: recovered[i],
                    chunks_lost_in_ram: lost_in_ram[i],
                });
            }
        }
        n.badge = Some(badge);
        n.summary.reboots += 1;
        n.boot_ticks = n.osc.ticks_at(now);
        n.sync_seen = 0;
        n.timers = [None; 5];
        n.scan = None;
        n.poll = None;
        if n.link.is_connected() {
            self.link_lost(node, now);
        }
        self.reconcile_timers(node, now);
        Ok(())
    }

    fn finish(mut self) -> Outcome {
        let mut summary = Summary {
            seed: self.scenario.seed,
            duration_s: self.scenario.duration_s,
            events: self.events,
            max_event_queue: self.max_queue,
            link_ceiling_bytes_per_s: Link::new(&self.scenario.transport).ceiling_bytes_per_s(),
            badges: Vec::new(),
            trace_digest: String::new(),
        };
        let mut badges = Vec::new();
        for n in &mut self.nodes {
            let badge = n.badge.take().expect("badge is running");
            let c = badge.counters();
            let alive = alive_counts(&badge);
            for s in Source::ALL {
                let pc = badge.recorder().counters(s);
                let row = StorageRow {
                    badge: n.summary.id,
                    source: s.name().to_string(),
                    chunks_closed: pc.closed,
                    chunks_stored: badge.storer().stored_count(s),
                    chunks_failed: badge.storer().failed_count(s),
                    chunks_overwritten: pc.overwritten,
                    chunks_pending: pc.pending,
                    elements_alive: alive[s.index()],
                };
                if row.chunks_closed + row.chunks_stored + row.chunks_failed + row.elements_alive > 0 {
                    self.metrics.storage.push(row);
                }
            }
            let stats = n.link.stats();
            let mut b = n.summary.clone();
            b.requests = c.requests;
            b.undecodable_frames = c.undecodable_frames;
            b.dropped_connections = c.dropped_connections;
            b.error_responses = c.error_responses;
            b.empty_mic_windows = c.empty_mic_windows;
            b.sync_count = n.sync_errors.len() as u64;
            b.sync_mae_ms = mae(&n.sync_errors);
            b.sync_max_abs_ms = max_abs(&n.sync_errors);
            b.connection_events = stats.events;
            b.bytes_up = stats.bytes_up;
            b.bytes_down = stats.bytes_down;
            b.max_packets_per_event = stats.max_packets_per_event;
            summary.badges.push(b);
            badges.push(badge);
        }
        summary.trace_digest = format!("{:x}", self.trace.finalize());
        self.metrics.summary = summary;
        Outcome {
            metrics: self.metrics,
            badges,
            event_times: self.event_times.unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_gives_empty_metrics() {
        let s = Scenario::from_json(
            r#"{"seed": 3, "duration_s": 0, "badges": [{"id": 1, "group": 1, "sources": [{"source": "mic"}]}]}"#,
        )
        .unwrap();
        let out = World::new(s).unwrap().run().unwrap();
        let m = out.metrics;
        assert!(m.sync_errors.is_empty() && m.throughput.is_empty() && m.storage.is_empty() && m.recovery.is_empty());
        assert_eq!(m.summary.events, 0);
    }
}

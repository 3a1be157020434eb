//! The badge application: request handling, processing jobs, the sender
//! state machine and the timer callbacks that feed the recorder.
//!
//! The badge owns no clock. Every entry point receives the current value
//! of the 32768 Hz tick counter, and whoever drives the badge (the
//! simulator, a test) decides when timers fire and when queued jobs run.

use std::collections::VecDeque;

use super::advertising::{AdvertisingPacket, StatusFlags};
use super::chunks::{Source, SourceConfig};
use super::processing::{BatteryMonitor, EmptyWindow, MIC_SAMPLE_PERIOD_US};
use super::proto::{
    self, AccelEventStream, AccelSample, AccelStream, BatteryStream, DataEnd, ErrorResponse, MicrophoneStream, Request,
    RequestKind, Response, ResponseKind, ScanObservation, ScanStream, SelftestResponse, StatusResponse, Timestamp,
};
use super::recorder::{Recorder, StartOutcome, StreamPoints};
use super::sender::{FrameError, Sender, DEFAULT_RX_CAPACITY, DEFAULT_TX_CAPACITY};
use super::storer::{Cursor, Storer};
use crate::seqfs::FsError;
use crate::timebase::{SyncConfig, SyncSample, SyncState, NOMINAL_HZ};
use crate::vmem::VirtualStorage;

/// Error response codes.
pub mod error_code {
    pub const UNKNOWN_REQUEST: u8 = 1;
    pub const INVALID_CONFIG: u8 = 2;
    pub const SOURCE_NOT_RUNNING: u8 = 3;
    pub const UNKNOWN_SOURCE: u8 = 4;
}

/// Selftest bits, one per peripheral.
pub mod peripheral {
    pub const EEPROM: u8 = 1 << 0;
    pub const FLASH: u8 = 1 << 1;
    pub const MICROPHONE: u8 = 1 << 2;
    pub const BATTERY: u8 = 1 << 3;
    pub const ACCEL: u8 = 1 << 4;
    pub const ALL: u8 = 0x1F;
}

/// Number of request variants; tags above it are unknown requests.
pub const REQUEST_VARIANTS: u8 = 25;
/// Battery sampling period while the battery source is off.
pub const DEFAULT_BATTERY_PERIOD_S: u16 = 60;
/// Points per stream message.
pub const STREAM_BATCH: [usize; 5] = [16, 8, 8, 1, 1];

#[derive(Debug, Clone)]
pub struct BadgeConfig {
    pub mac: [u8; 6],
    /// Consecutive send attempts without transport progress tolerated
    /// before the connection is dropped.
    pub retry_budget: u32,
    pub sync: SyncConfig,
    pub tx_capacity: usize,
    pub rx_capacity: usize,
    pub battery_alpha: f64,
}

impl Default for BadgeConfig {
    fn default() -> Self {
        BadgeConfig {
            mac: [0x02, 0, 0, 0, 0, 1],
            retry_budget: 10,
            sync: SyncConfig::default(),
            tx_capacity: DEFAULT_TX_CAPACITY,
            rx_capacity: DEFAULT_RX_CAPACITY,
            battery_alpha: 0.1,
        }
    }
}

/// Work items for the main-context scheduler queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Job {
    /// Move finalized chunks of a source into storage.
    Process(Source),
    /// Execute received requests and feed responses to the sender.
    Handle,
    /// Turn buffered stream points into stream messages.
    Stream,
}

/// Result of one handler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// Nothing left to send.
    Idle,
    /// A frame was queued and more work is waiting.
    More,
    /// The TX FIFO has no room; retry later.
    Busy,
    /// The error handler dropped the connection.
    Disconnected,
}

/// Things that happened inside the badge, for the driver and for tests.
#[derive(Debug, Clone, PartialEq)]
pub enum BadgeEvent {
    SourceStarted(SourceConfig),
    SourceStopped(Source),
    StreamStarted(Source),
    StreamStopped(Source),
    /// The badge dropped the connection.
    Disconnect,
    Restart,
    Identify { led: u8, seconds: u16 },
    /// A sync that was rejected (ticks not increasing).
    SyncRejected,
}

/// Periodic timers the badge needs while in its current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimerKind {
    Advertising,
    MicSample,
    MicAverage,
    ScanPeriod,
    AccelRead,
    BatteryRead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimerSpec {
    pub kind: TimerKind,
    pub period_us: u64,
}

#[derive(Debug, Clone)]
enum Pending {
    Response(Response),
    Data(Cursor),
}

/// Counters exposed for accounting checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BadgeCounters {
    pub requests: u64,
    pub undecodable_frames: u64,
    pub dropped_connections: u64,
    pub error_responses: u64,
    pub empty_mic_windows: u64,
}

#[derive(Debug)]
pub struct Badge {
    config: BadgeConfig,
    id: u16,
    group: u8,
    clock: SyncState,
    recorder: Recorder,
    storer: Storer,
    sender: Sender,
    battery: BatteryMonitor,
    jobs: VecDeque<Job>,
    inbox: VecDeque<(Vec<u8>, u64)>,
    pending: VecDeque<Pending>,
    staged: Option<Vec<u8>>,
    failures: u32,
    last_sent: u64,
    connected: bool,
    faults: u8,
    events: Vec<BadgeEvent>,
    sync_errors: Vec<f64>,
    counters: BadgeCounters,
}

impl Badge {
    /// Boots a badge on `storage`, mounting whatever it already holds.
    pub fn new(config: BadgeConfig, storage: VirtualStorage) -> Result<Badge, FsError> {
        Ok(Badge::with_storer(config, Storer::new(storage)?))
    }

    /// Boots a badge on an already mounted storer.
    pub fn with_storer(config: BadgeConfig, storer: Storer) -> Badge {
        Badge {
            clock: SyncState::new(config.sync),
            recorder: Recorder::new(),
            storer,
            sender: Sender::new(config.tx_capacity, config.rx_capacity),
            battery: BatteryMonitor::new(config.battery_alpha),
            id: 0,
            group: 0,
            jobs: VecDeque::new(),
            inbox: VecDeque::new(),
            pending: VecDeque::new(),
            staged: None,
            failures: 0,
            last_sent: 0,
            connected: false,
            faults: 0,
            events: Vec::new(),
            sync_errors: Vec::new(),
            counters: BadgeCounters::default(),
            config,
        }
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn group(&self) -> u8 {
        self.group
    }

    pub fn clock(&self) -> &SyncState {
        &self.clock
    }

    pub fn recorder(&self) -> &Recorder {
        &self.recorder
    }

    pub fn storer(&self) -> &Storer {
        &self.storer
    }

    pub fn storer_mut(&mut self) -> &mut Storer {
        &mut self.storer
    }

    pub fn sender(&self) -> &Sender {
        &self.sender
    }

    pub fn sender_mut(&mut self) -> &mut Sender {
        &mut self.sender
    }

    pub fn into_storage(self) -> VirtualStorage {
        self.storer.into_storage()
    }

    pub fn counters(&self) -> BadgeCounters {
        BadgeCounters {
            empty_mic_windows: self.recorder.empty_windows(),
            ..self.counters
        }
    }

    /// Prediction errors of every accepted sync after the first, in ms.
    pub fn sync_errors(&self) -> &[f64] {
        &self.sync_errors
    }

    pub fn take_events(&mut self) -> Vec<BadgeEvent> {
        std::mem::take(&mut self.events)
    }

    /// Marks peripherals as broken for the selftest.
    pub fn set_peripheral_faults(&mut self, mask: u8) {
        self.faults = mask & peripheral::ALL;
    }

    /// Local time in ms: the synchronized clock, or time since boot before
    /// the first sync.
    pub fn local_ms(&self, ticks: u64) -> i64 {
        self.clock
            .now_ms(ticks)
            .unwrap_or_else(|| (ticks as u128 * 1000 / NOMINAL_HZ as u128) as i64)
    }

    pub fn timestamp(&self, ticks: u64) -> Timestamp {
        Timestamp::from_millis(self.local_ms(ticks))
    }

    pub fn status_flags(&self) -> StatusFlags {
        let mut flags = StatusFlags::default();
        flags.set(StatusFlags::SYNCED, self.clock.is_synced());
        for s in Source::ALL {
            flags.set(StatusFlags::source_bit(s.index()), self.recorder.is_running(s));
        }
        flags
    }

    pub fn advertising_packet(&self) -> AdvertisingPacket {
        AdvertisingPacket {
            id: self.id,
            group: self.group,
            mac: self.config.mac,
            battery: self.battery.byte(),
            status: self.status_flags(),
        }
    }

    /// Timers that should be running right now.
    pub fn timers(&self) -> Vec<TimerSpec> {
        let mut t = vec![TimerSpec {
            kind: TimerKind::Advertising,
            period_us: super::advertising::ADVERTISING_PERIOD_MS * 1000,
        }];
        let mut battery_s = DEFAULT_BATTERY_PERIOD_S;
        for s in Source::ALL {
            match self.recorder.config(s) {
                Some(SourceConfig::Microphone(c)) => {
                    t.push(TimerSpec {
                        kind: TimerKind::MicSample,
                        period_us: MIC_SAMPLE_PERIOD_US,
                    });
                    t.push(TimerSpec {
                        kind: TimerKind::MicAverage,
                        period_us: c.avg_period_ms as u64 * 1000,
                    });
                }
                Some(SourceConfig::Scan(c)) => t.push(TimerSpec {
                    kind: TimerKind::ScanPeriod,
                    period_us: c.period_s as u64 * 1_000_000,
                }),
                Some(SourceConfig::Accel(c)) => t.push(TimerSpec {
                    kind: TimerKind::AccelRead,
                    period_us: c.fifo_read_period_ms as u64 * 1000,
                }),
                Some(SourceConfig::Battery(c)) => battery_s = c.read_period_s,
                _ => {}
            }
        }
        t.push(TimerSpec {
            kind: TimerKind::BatteryRead,
            period_us: battery_s as u64 * 1_000_000,
        });
        t
    }

    // ----- scheduler -------------------------------------------------------

    pub fn schedule(&mut self, job: Job) {
        if !self.jobs.contains(&job) {
            self.jobs.push_back(job);
        }
    }

    pub fn queued_jobs(&self) -> usize {
        self.jobs.len()
    }

    /// Runs the oldest queued job. A `Handle` job that made progress and
    /// has more to send requeues itself; a busy one does not, the driver
    /// retries it after a delay.
    pub fn run_next_job(&mut self, ticks: u64) -> Option<(Job, StepOutcome)> {
        let job = self.jobs.pop_front()?;
        let outcome = match job {
            Job::Process(source) => {
                self.process(source);
                StepOutcome::Idle
            }
            Job::Handle => {
                let outcome = self.step();
                if outcome == StepOutcome::More {
                    self.schedule(Job::Handle);
                }
                outcome
            }
            Job::Stream => {
                self.stream(ticks);
                StepOutcome::Idle
            }
        };
        Some((job, outcome))
    }

    /// Runs queued jobs until the queue is empty or the handler is busy.
    pub fn run_jobs(&mut self, ticks: u64) -> StepOutcome {
        let mut last = StepOutcome::Idle;
        while let Some((job, outcome)) = self.run_next_job(ticks) {
            if job == Job::Handle {
                last = outcome;
                if matches!(outcome, StepOutcome::Busy | StepOutcome::Disconnected) {
                    break;
                }
            }
        }
        last
    }

    /// Stores every finalized chunk of a source.
    pub fn process(&mut self, source: Source) {
        while let Some(chunk) = self.recorder.take_finalized(source) {
            // Failures are counted by the storer.
            let _ = self.storer.store(&chunk);
        }
    }

    // ----- connection ------------------------------------------------------

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    pub fn on_connect(&mut self) {
        self.connected = true;
        self.sender.reset();
        self.failures = 0;
        self.last_sent = self.sender.sent_bytes();
    }

    /// The central went away: drop everything tied to the connection.
    pub fn on_disconnect(&mut self) {
        self.connected = false;
        self.inbox.clear();
        self.pending.clear();
        self.staged = None;
        self.failures = 0;
        self.sender.reset();
        for s in Source::ALL {
            if self.recorder.is_streaming(s) {
                self.recorder.set_streaming(s, false);
            }
        }
    }

    fn drop_connection(&mut self) {
        self.counters.dropped_connections += 1;
        self.on_disconnect();
        self.events.push(BadgeEvent::Disconnect);
    }

    /// Bytes from the transport. Complete frames are queued for the handler
    /// job; a framing error drops the connection.
    pub fn on_receive(&mut self, bytes: &[u8], ticks: u64) {
        if !self.connected {
            return;
        }
        let mut result = self.sender.rx().push(bytes);
        while result.is_ok() {
            match self.sender.rx().next_frame() {
                Ok(Some(frame)) => self.inbox.push_back((frame, ticks)),
                Ok(None) => break,
                Err(e) => result = Err(e),
            }
        }
        if let Err(FrameError::TooLong(_) | FrameError::Overflow) = result {
            self.counters.undecodable_frames += 1;
            self.drop_connection();
            return;
        }
        if !self.inbox.is_empty() {
            self.schedule(Job::Handle);
        }
    }

    /// One handler step: execute received requests, then try to move one
    /// response frame into the TX FIFO.
    pub fn step(&mut self) -> StepOutcome {
        if !self.connected {
            return StepOutcome::Idle;
        }
        while let Some((frame, rx_ticks)) = self.inbox.pop_front() {
            self.execute_frame(&frame, rx_ticks);
            if !self.connected {
                return StepOutcome::Disconnected;
            }
        }
        if self.staged.is_none() {
            self.staged = self.next_payload();
        }
        let Some(payload) = &self.staged else {
            return StepOutcome::Idle;
        };
        match self.sender.push_frame(payload) {
            Ok(()) => {
                self.staged = None;
                self.failures = 0;
                self.last_sent = self.sender.sent_bytes();
                if self.pending.is_empty() {
                    StepOutcome::Idle
                } else {
                    StepOutcome::More
                }
            }
            Err(_) => {
                let sent = self.sender.sent_bytes();
                if sent == self.last_sent {
                    self.failures += 1;
                } else {
                    self.failures = 0;
                    self.last_sent = sent;
                }
                if self.failures >= self.config.retry_budget {
                    self.drop_connection();
                    StepOutcome::Disconnected
                } else {
                    StepOutcome::Busy
                }
            }
        }
    }

    /// Responses waiting to be framed, a running data transfer counting as
    /// one.
    pub fn pending_responses(&self) -> usize {
        self.pending.len() + self.staged.is_some() as usize
    }

    fn next_payload(&mut self) -> Option<Vec<u8>> {
        loop {
            let response = match self.pending.front_mut()? {
                Pending::Response(_) => match self.pending.pop_front() {
                    Some(Pending::Response(r)) => r,
                    _ => unreachable!(),
                },
                Pending::Data(cursor) => match self.storer.next(cursor) {
                    Ok(Some(chunk)) => Response {
                        kind: chunk.into_response(),
                    },
                    Ok(None) | Err(_) => {
                        let Some(Pending::Data(c)) = self.pending.pop_front() else {
                            unreachable!()
                        };
                        Response {
                            kind: ResponseKind::DataEnd(DataEnd {
                                source: c.source() as u8,
                                chunks: c.chunks,
                                corrupted: c.corrupted.min(u16::MAX as u32) as u16,
                            }),
                        }
                    }
                },
            };
            match response.encode() {
                Ok(bytes) => return Some(bytes),
                // Only reachable through a chunk that violates its schema
                // limits; skip it.
                Err(_) => continue,
            }
        }
    }

    fn respond(&mut self, kind: ResponseKind) {
        self.pending.push_back(Pending::Response(Response { kind }));
    }

    fn respond_error(&mut self, code: u8) {
        self.counters.error_responses += 1;
        self.respond(ResponseKind::Error(ErrorResponse { code }));
    }

    fn execute_frame(&mut self, frame: &[u8], ticks: u64) {
        self.counters.requests += 1;
        match Request::decode(frame) {
            Ok(req) => self.execute(req.kind, ticks),
            Err(proto::Error::InvalidOneofTag { group: "kind", tag })
                if frame.first() == Some(&tag) && (tag == 0 || tag > REQUEST_VARIANTS) =>
            {
                self.respond_error(error_code::UNKNOWN_REQUEST)
            }
            Err(_) => {
                self.counters.undecodable_frames += 1;
                self.drop_connection();
            }
        }
    }

    fn execute(&mut self, kind: RequestKind, ticks: u64) {
        use RequestKind as K;
        match kind {
            K::Status(req) => self.status(req, ticks),
            K::StartMicrophone(c) => self.start(SourceConfig::Microphone(c), ticks),
            K::StartScan(c) => self.start(SourceConfig::Scan(c), ticks),
            K::StartAccel(c) => self.start(SourceConfig::Accel(c), ticks),
            K::StartAccelEvent(c) => self.start(SourceConfig::AccelEvent(c), ticks),
            K::StartBattery(c) => self.start(SourceConfig::Battery(c), ticks),
            K::StopMicrophone(_) => self.stop(Source::Microphone),
            K::StopScan(_) => self.stop(Source::Scan),
            K::StopAccel(_) => self.stop(Source::Accel),
            K::StopAccelEvent(_) => self.stop(Source::AccelEvent),
            K::StopBattery(_) => self.stop(Source::Battery),
            K::StreamStartMicrophone(_) => self.set_stream(Source::Microphone, true),
            K::StreamStartScan(_) => self.set_stream(Source::Scan, true),
            K::StreamStartAccel(_) => self.set_stream(Source::Accel, true),
            K::StreamStartAccelEvent(_) => self.set_stream(Source::AccelEvent, true),
            K::StreamStartBattery(_) => self.set_stream(Source::Battery, true),
            K::StreamStopMicrophone(_) => self.set_stream(Source::Microphone, false),
            K::StreamStopScan(_) => self.set_stream(Source::Scan, false),
            K::StreamStopAccel(_) => self.set_stream(Source::Accel, false),
            K::StreamStopAccelEvent(_) => self.set_stream(Source::AccelEvent, false),
            K::StreamStopBattery(_) => self.set_stream(Source::Battery, false),
            K::DataRequest(req) => self.data_request(req),
            K::Restart(_) => self.restart(),
            K::Identify(req) => self.events.push(BadgeEvent::Identify {
                led: req.led,
                seconds: req.seconds,
            }),
            K::Selftest(_) => self.respond(ResponseKind::Selftest(SelftestResponse {
                passed: peripheral::ALL & !self.faults,
                failed: self.faults,
            })),
        }
    }

    fn status(&mut self, req: proto::StatusRequest, ticks: u64) {
        let before_sync = self.clock.is_synced().then(|| self.timestamp(ticks));
        if let Some(a) = req.assignment {
            self.id = a.id;
            self.group = a.group;
        }
        let sample = SyncSample {
            received_ms: req.timestamp.as_millis(),
            ticks,
        };
        match self.clock.on_sync(sample) {
            Ok(outcome) => self.sync_errors.extend(outcome.error_ms),
            Err(_) => self.events.push(BadgeEvent::SyncRejected),
        }
        let status = StatusResponse {
            status_flags: self.status_flags().0,
            id: self.id,
            group: self.group,
            battery: self.battery.byte(),
            timestamp: self.timestamp(ticks),
            before_sync,
        };
        self.respond(ResponseKind::Status(status));
    }

    fn start(&mut self, config: SourceConfig, ticks: u64) {
        if config.validate().is_err() {
            self.respond_error(error_code::INVALID_CONFIG);
            return;
        }
        let now = self.timestamp(ticks);
        let source = config.source();
        match self.recorder.start(config.clone(), &now) {
            StartOutcome::Unchanged => {}
            outcome => {
                if outcome == StartOutcome::Restarted {
                    self.schedule(Job::Process(source));
                }
                self.events.push(BadgeEvent::SourceStarted(config));
            }
        }
    }

    fn stop(&mut self, source: Source) {
        if !self.recorder.is_running(source) {
            return;
        }
        if self.recorder.stop(source) {
            self.schedule(Job::Process(source));
        }
        self.events.push(BadgeEvent::SourceStopped(source));
    }

    fn set_stream(&mut self, source: Source, on: bool) {
        if on && !self.recorder.is_running(source) {
            self.respond_error(error_code::SOURCE_NOT_RUNNING);
            return;
        }
        if self.recorder.is_streaming(source) != on {
            self.recorder.set_streaming(source, on);
            self.events.push(if on {
                BadgeEvent::StreamStarted(source)
            } else {
                BadgeEvent::StreamStopped(source)
            });
        }
    }

    fn data_request(&mut self, req: proto::DataRequest) {
        let Some(source) = Source::from_u8(req.source) else {
            self.respond_error(error_code::UNKNOWN_SOURCE);
            return;
        };
        // Chunks finalized before the request are part of the answer.
        self.process(source);
        match self.storer.query(source, &req.since) {
            Ok(cursor) => self.pending.push_back(Pending::Data(cursor)),
            Err(_) => self.respond(ResponseKind::DataEnd(DataEnd {
                source: req.source,
                chunks: 0,
                corrupted: 0,
            })),
        }
    }

    /// Stops every source, flushes their chunks to storage and reboots.
    /// Storage, id and group survive; the clock and the connection do not.
    pub fn restart(&mut self) {
        for s in Source::ALL {
            self.recorder.stop(s);
            self.process(s);
        }
        self.recorder = Recorder::new();
        self.clock = SyncState::new(self.config.sync);
        self.jobs.clear();
        if self.connected {
            self.on_disconnect();
            self.events.push(BadgeEvent::Disconnect);
        }
        // The partitions were mounted from this very storage a moment ago;
        // remounting cannot find anything new to reject.
        let _ = self.storer.fs_mut().remount();
        self.events.push(BadgeEvent::Restart);
    }

    // ----- streaming -------------------------------------------------------

    /// Packs buffered stream points into stream responses while the TX FIFO
    /// has room. Points that do not fit stay buffered (and may be evicted).
    pub fn stream(&mut self, ticks: u64) {
        if !self.connected {
            return;
        }
        let timestamp = self.timestamp(ticks);
        for s in Source::ALL {
            if !self.recorder.is_streaming(s) {
                continue;
            }
            while self.recorder.stream_len(s) > 0 {
                let kind = match self.recorder.drain_stream(s, STREAM_BATCH[s.index()]) {
                    StreamPoints::Microphone(values) => ResponseKind::MicrophoneStream(MicrophoneStream {
                        timestamp: timestamp.clone(),
                        values,
                    }),
                    StreamPoints::Scan(obs) => ResponseKind::ScanStream(ScanStream {
                        timestamp: timestamp.clone(),
                        observations: obs.into_iter().map(|(id, rssi)| ScanObservation { id, rssi }).collect(),
                    }),
                    StreamPoints::Accel(samples) => ResponseKind::AccelStream(AccelStream {
                        timestamp: timestamp.clone(),
                        samples: samples.into_iter().map(|[x, y, z]| AccelSample { x, y, z }).collect(),
                    }),
                    StreamPoints::AccelEvent(_) => ResponseKind::AccelEventStream(AccelEventStream {
                        timestamp: timestamp.clone(),
                    }),
                    StreamPoints::Battery(v) => ResponseKind::BatteryStream(BatteryStream {
                        timestamp: timestamp.clone(),
                        voltage: v[0],
                    }),
                };
                let Ok(bytes) = (Response { kind }).encode() else {
                    continue;
                };
                if self.sender.push_frame(&bytes).is_err() {
                    // The drained points are lost, as the buffer would have
                    // evicted them anyway.
                    return;
                }
            }
        }
    }

    // ----- timer callbacks -------------------------------------------------

    /// Microphone sampling timer.
    pub fn mic_sample(&mut self, adc: u8) {
        self.recorder.mic_sample(adc);
    }

    /// Microphone averaging timer.
    pub fn mic_average(&mut self, ticks: u64) -> Result<(), EmptyWindow> {
        let now = self.timestamp(ticks);
        if self.recorder.mic_average(&now)? {
            self.schedule(Job::Process(Source::Microphone));
        }
        self.schedule_stream(Source::Microphone);
        Ok(())
    }

    /// Scan period timer; the driver calls [`Badge::scan_end`] after the
    /// configured scan duration.
    pub fn scan_begin(&mut self, ticks: u64) {
        let now = self.timestamp(ticks);
        self.recorder.scan_begin(&now);
    }

    /// An advertisement heard during a scan. Only badges and beacons of our
    /// own group count.
    pub fn scan_report(&mut self, advertising: &[u8], rssi: i8) {
        if let Ok(p) = AdvertisingPacket::decode(advertising) {
            if p.group == self.group {
                self.recorder.scan_observe(p.id, rssi);
                self.schedule_stream(Source::Scan);
            }
        }
    }

    pub fn scan_end(&mut self) {
        if self.recorder.scan_end() {
            self.schedule(Job::Process(Source::Scan));
        }
    }

    /// Accelerometer FIFO read timer with the samples read, in mg.
    pub fn accel_read(&mut self, samples: &[[i16; 3]], ticks: u64) {
        let now = self.timestamp(ticks);
        if self.recorder.accel_samples(samples, &now) > 0 {
            self.schedule(Job::Process(Source::Accel));
        }
        self.schedule_stream(Source::Accel);
    }

    /// Motion interrupt of the accelerometer, raised by its own detector
    /// configured from the accel event source settings.
    pub fn accel_motion(&mut self, ticks: u64) {
        let now = self.timestamp(ticks);
        if self.recorder.accel_event(&now) {
            self.schedule(Job::Process(Source::AccelEvent));
            self.schedule_stream(Source::AccelEvent);
        }
    }

    /// Battery timer with a 10-bit supply reading.
    pub fn battery_read(&mut self, adc10: u16, ticks: u64) {
        let volts = self.battery.update(adc10);
        let now = self.timestamp(ticks);
        if self.recorder.battery_record(volts, &now) {
            self.schedule(Job::Process(Source::Battery));
            self.schedule_stream(Source::Battery);
        }
    }

    fn schedule_stream(&mut self, source: Source) {
        if self.connected && self.recorder.is_streaming(source) {
            self.schedule(Job::Stream);
        }
    }
}

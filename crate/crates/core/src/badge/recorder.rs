//! Sampling side of the recording pipelines.
//!
//! Timer callbacks feed samples in; finished chunks are published to a
//! chunk FIFO per source, from which the processing job takes them. Raw
//! data points additionally go to a circular FIFO per source while that
//! source is being streamed.

use super::chunks::{Aggregation, Chunk, Source, SourceConfig, ACCEL_CHUNK_POINTS, MIC_CHUNK_POINTS};
use super::processing::{
    accel_magnitude, sort_and_truncate, EmptyWindow, HighPass, MicAccumulator, ScanAccumulator, ACCEL_HIGH_PASS_HZ,
};
use super::proto::{AccelChunk, AccelEventChunk, BatteryChunk, MicrophoneChunk, ScanChunk, Timestamp};
use crate::fifo::{ChunkFifo, CircularFifo, WriteSlot};

/// Chunk slots per source.
pub const CHUNK_SLOTS: [usize; 5] = [4, 2, 4, 4, 2];
/// Streaming buffer depth per source, in data points.
pub const STREAM_DEPTH: [usize; 5] = [64, 64, 64, 16, 4];

/// What a start request did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartOutcome {
    Started,
    /// Already running with identical parameters; nothing changed.
    Unchanged,
    /// Running with other parameters; the open chunk was finalized and the
    /// source restarted.
    Restarted,
}

#[derive(Debug)]
struct Pipe<T> {
    fifo: ChunkFifo<T>,
    open: Option<WriteSlot>,
}

impl<T: Default> Pipe<T> {
    fn new(slots: usize) -> Self {
        Pipe {
            fifo: ChunkFifo::new(slots),
            open: None,
        }
    }
}

impl<T> Pipe<T> {
    /// Opens a fresh chunk. A reclaimed slot still holds the sacrificed
    /// chunk, so `init` must reset every field.
    fn open(&mut self, init: impl FnOnce(&mut T)) {
        debug_assert!(self.open.is_none());
        // Every slot is either free, finalized or being read; with at
        // least two slots one can always be claimed.
        if let Ok(h) = self.fifo.open_write() {
            init(self.fifo.write_slot(&h));
            self.open = Some(h);
        }
    }

    fn current(&mut self) -> Option<&mut T> {
        let h = self.open.as_ref()?;
        Some(self.fifo.write_slot(h))
    }

    fn close(&mut self) -> bool {
        match self.open.take() {
            Some(h) => self.fifo.close_write(h).is_ok(),
            None => false,
        }
    }

    fn cancel(&mut self) {
        if let Some(h) = self.open.take() {
            let _ = self.fifo.cancel_write(h);
        }
    }

    fn pop(&mut self) -> Option<T>
    where
        T: Clone,
    {
        let h = self.fifo.open_read().ok()??;
        let chunk = self.fifo.read_slot(&h).clone();
        self.fifo.close_read(h).ok()?;
        Some(chunk)
    }
}

/// Raw data points waiting to be streamed.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamPoints {
    Microphone(Vec<u8>),
    Scan(Vec<(u16, i8)>),
    Accel(Vec<[i16; 3]>),
    AccelEvent(usize),
    Battery(Vec<f32>),
}

#[derive(Debug)]
struct Streams {
    enabled: [bool; 5],
    mic: CircularFifo<u8>,
    scan: CircularFifo<(u16, i8)>,
    accel: CircularFifo<[i16; 3]>,
    event: CircularFifo<()>,
    battery: CircularFifo<f32>,
}

impl Streams {
    fn new() -> Self {
        Streams {
            enabled: [false; 5],
            mic: CircularFifo::new(STREAM_DEPTH[0]),
            scan: CircularFifo::new(STREAM_DEPTH[1]),
            accel: CircularFifo::new(STREAM_DEPTH[2]),
            event: CircularFifo::new(STREAM_DEPTH[3]),
            battery: CircularFifo::new(STREAM_DEPTH[4]),
        }
    }

    fn clear(&mut self, source: Source) {
        match source {
            Source::Microphone => self.mic.clear(),
            Source::Scan => self.scan.clear(),
            Source::Accel => self.accel.clear(),
            Source::AccelEvent => self.event.clear(),
            Source::Battery => self.battery.clear(),
        }
    }
}

/// Counters that let the pipelines be audited: every closed chunk is
/// stored, overwritten, still pending, or failed to store.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipelineCounters {
    pub closed: u64,
    pub overwritten: u64,
    pub pending: u64,
}

#[derive(Debug)]
pub struct Recorder {
    configs: [Option<SourceConfig>; 5],
    mic: Pipe<MicrophoneChunk>,
    mic_acc: MicAccumulator,
    empty_windows: u64,
    scan: Pipe<ScanChunk>,
    scan_acc: Option<ScanAccumulator>,
    accel: Pipe<AccelChunk>,
    accel_filter: Option<HighPass>,
    event: Pipe<AccelEventChunk>,
    battery: Pipe<BatteryChunk>,
    streams: Streams,
}

impl Default for Recorder {
    fn default() -> Self {
        Recorder::new()
    }
}

impl Recorder {
    pub fn new() -> Self {
        Recorder {
            configs: Default::default(),
            mic: Pipe::new(CHUNK_SLOTS[0]),
            mic_acc: MicAccumulator::default(),
            empty_windows: 0,
            scan: Pipe::new(CHUNK_SLOTS[1]),
            scan_acc: None,
            accel: Pipe::new(CHUNK_SLOTS[2]),
            accel_filter: None,
            event: Pipe::new(CHUNK_SLOTS[3]),
            battery: Pipe::new(CHUNK_SLOTS[4]),
            streams: Streams::new(),
        }
    }

    pub fn config(&self, source: Source) -> Option<&SourceConfig> {
        self.configs[source.index()].as_ref()
    }

    pub fn is_running(&self, source: Source) -> bool {
        self.configs[source.index()].is_some()
    }

    /// Starts a source; the caller has validated `config`.
    pub fn start(&mut self, config: SourceConfig, now: &Timestamp) -> StartOutcome {
        let source = config.source();
        let outcome = match &self.configs[source.index()] {
            Some(c) if *c == config => return StartOutcome::Unchanged,
            Some(_) => {
                self.stop(source);
                StartOutcome::Restarted
            }
            None => StartOutcome::Started,
        };
        match &config {
            SourceConfig::Microphone(c) => {
                self.mic_acc = MicAccumulator::default();
                let period = c.avg_period_ms;
                self.mic.open(|chunk| reset_mic(chunk, now, period));
            }
            SourceConfig::Accel(c) => {
                self.accel_filter = Some(HighPass::new(ACCEL_HIGH_PASS_HZ, c.datarate_hz as f64));
                self.accel.open(|chunk| reset_accel(chunk, now));
            }
            _ => {}
        }
        self.configs[source.index()] = Some(config);
        outcome
    }

    /// Stops a source. A partly filled chunk is finalized so its data is
    /// stored; an empty one is discarded. Returns whether a chunk was
    /// finalized. Streaming of the source ends too.
    pub fn stop(&mut self, source: Source) -> bool {
        if self.configs[source.index()].take().is_none() {
            return false;
        }
        self.streams.enabled[source.index()] = false;
        self.streams.clear(source);
        match source {
            Source::Microphone => {
                self.mic_acc = MicAccumulator::default();
                close_if(&mut self.mic, |c| !c.data.is_empty())
            }
            Source::Scan => {
                let closed = self.finish_scan();
                self.scan_acc = None;
                closed
            }
            Source::Accel => {
                self.accel_filter = None;
                close_if(&mut self.accel, |c| !c.magnitudes.is_empty())
            }
            Source::AccelEvent | Source::Battery => false,
        }
    }

    pub fn set_streaming(&mut self, source: Source, on: bool) {
        self.streams.enabled[source.index()] = on;
        if !on {
            self.streams.clear(source);
        }
    }

    pub fn is_streaming(&self, source: Source) -> bool {
        self.streams.enabled[source.index()]
    }

    /// One microphone ADC reading (sampling timer).
    pub fn mic_sample(&mut self, adc: u8) {
        if self.is_running(Source::Microphone) {
            self.mic_acc.push(adc);
        }
    }

    /// Averaging timer: appends the window average. Returns whether a full
    /// chunk was finalized; the next chunk starts at `now`.
    pub fn mic_average(&mut self, now: &Timestamp) -> Result<bool, EmptyWindow> {
        let Some(SourceConfig::Microphone(cfg)) = &self.configs[0] else {
            return Ok(false);
        };
        let period = cfg.avg_period_ms;
        let avg = match self.mic_acc.take() {
            Ok(avg) => avg,
            Err(e) => {
                self.empty_windows += 1;
                return Err(e);
            }
        };
        if self.streams.enabled[0] {
            self.streams.mic.push(avg);
        }
        let Some(chunk) = self.mic.current() else {
            return Ok(false);
        };
        chunk.data.push(avg);
        if chunk.data.len() < MIC_CHUNK_POINTS {
            return Ok(false);
        }
        self.mic.close();
        self.mic.open(|c| reset_mic(c, now, period));
        Ok(true)
    }

    /// Averaging windows that saw no sample.
    pub fn empty_windows(&self) -> u64 {
        self.empty_windows
    }

    /// Scan period timer: opens a scan chunk stamped `now`.
    pub fn scan_begin(&mut self, now: &Timestamp) {
        let Some(SourceConfig::Scan(cfg)) = &self.configs[1] else {
            return;
        };
        let aggregation = Aggregation::from_u8(cfg.aggregation).unwrap_or(Aggregation::Mean);
        if self.scan.open.is_some() {
            self.finish_scan();
        }
        self.scan_acc = Some(ScanAccumulator::new(aggregation));
        self.scan.open(|c| {
            c.timestamp = now.clone();
            c.devices.clear();
        });
    }

    pub fn scan_in_progress(&self) -> bool {
        self.scan.open.is_some()
    }

    /// One received advertisement of a device in our group.
    pub fn scan_observe(&mut self, id: u16, rssi: i8) {
        if let Some(acc) = &mut self.scan_acc {
            acc.observe(id, rssi);
            if self.streams.enabled[1] {
                self.streams.scan.push((id, rssi));
            }
        }
    }

    /// Scan duration expired: writes the aggregated devices and finalizes
    /// the chunk.
    pub fn scan_end(&mut self) -> bool {
        let closed = self.finish_scan();
        self.scan_acc = None;
        closed
    }

    fn finish_scan(&mut self) -> bool {
        let devices = self.scan_acc.as_ref().map(|a| a.results()).unwrap_or_default();
        match self.scan.current() {
            Some(chunk) => {
                chunk.devices = devices;
                self.scan.close()
            }
            None => false,
        }
    }

    /// Samples read from the accelerometer FIFO, in mg. Returns the number
    /// of chunks finalized.
    pub fn accel_samples(&mut self, samples: &[[i16; 3]], now: &Timestamp) -> usize {
        let Some(filter) = &mut self.accel_filter else {
            return 0;
        };
        let mut closed = 0;
        for s in samples {
            if self.streams.enabled[2] {
                self.streams.accel.push(*s);
            }
            let hp = filter.filter(s.map(f64::from));
            let Some(chunk) = self.accel.current() else {
                continue;
            };
            chunk.magnitudes.push(accel_magnitude(hp));
            if chunk.magnitudes.len() >= ACCEL_CHUNK_POINTS {
                self.accel.close();
                self.accel.open(|c| reset_accel(c, now));
                closed += 1;
            }
        }
        closed
    }

    /// Motion interrupt: one single-event chunk.
    pub fn accel_event(&mut self, now: &Timestamp) -> bool {
        if !self.is_running(Source::AccelEvent) {
            return false;
        }
        if self.streams.enabled[3] {
            self.streams.event.push(());
        }
        self.event.open(|c| c.timestamp = now.clone());
        self.event.close()
    }

    /// Battery source timer: records the averaged voltage.
    pub fn battery_record(&mut self, volts: f64, now: &Timestamp) -> bool {
        if !self.is_running(Source::Battery) {
            return false;
        }
        if self.streams.enabled[4] {
            self.streams.battery.push(volts as f32);
        }
        self.battery.open(|c| {
            c.timestamp = now.clone();
            c.voltage = volts as f32;
        });
        self.battery.close()
    }

    /// Oldest finalized chunk of a source, ready to be stored. Scan chunks
    /// come out sorted and truncated.
    pub fn take_finalized(&mut self, source: Source) -> Option<Chunk> {
        Some(match source {
            Source::Microphone => Chunk::Microphone(self.mic.pop()?),
            Source::Scan => {
                let mut c = self.scan.pop()?;
                sort_and_truncate(&mut c.devices);
                Chunk::Scan(c)
            }
            Source::Accel => Chunk::Accel(self.accel.pop()?),
            Source::AccelEvent => Chunk::AccelEvent(self.event.pop()?),
            Source::Battery => Chunk::Battery(self.battery.pop()?),
        })
    }

    pub fn pending(&self, source: Source) -> usize {
        match source {
            Source::Microphone => self.mic.fifo.pending(),
            Source::Scan => self.scan.fifo.pending(),
            Source::Accel => self.accel.fifo.pending(),
            Source::AccelEvent => self.event.fifo.pending(),
            Source::Battery => self.battery.fifo.pending(),
        }
    }

    pub fn counters(&self, source: Source) -> PipelineCounters {
        let (closed, overwritten) = match source {
            Source::Microphone => (self.mic.fifo.finalized_count(), self.mic.fifo.overwritten_count()),
            Source::Scan => (self.scan.fifo.finalized_count(), self.scan.fifo.overwritten_count()),
            Source::Accel => (self.accel.fifo.finalized_count(), self.accel.fifo.overwritten_count()),
            Source::AccelEvent => (self.event.fifo.finalized_count(), self.event.fifo.overwritten_count()),
            Source::Battery => (self.battery.fifo.finalized_count(), self.battery.fifo.overwritten_count()),
        };
        PipelineCounters {
            closed,
            overwritten,
            pending: self.pending(source) as u64,
        }
    }

    /// Takes up to `max` buffered stream points of a source.
    pub fn drain_stream(&mut self, source: Source, max: usize) -> StreamPoints {
        fn take<T>(f: &mut CircularFifo<T>, max: usize) -> Vec<T> {
            std::iter::from_fn(|| f.pop()).take(max).collect()
        }
        let s = &mut self.streams;
        match source {
            Source::Microphone => StreamPoints::Microphone(take(&mut s.mic, max)),
            Source::Scan => StreamPoints::Scan(take(&mut s.scan, max)),
            Source::Accel => StreamPoints::Accel(take(&mut s.accel, max)),
            Source::AccelEvent => StreamPoints::AccelEvent(take(&mut s.event, max).len()),
            Source::Battery => StreamPoints::Battery(take(&mut s.battery, max)),
        }
    }

    pub fn stream_len(&self, source: Source) -> usize {
        let s = &self.streams;
        match source {
            Source::Microphone => s.mic.len(),
            Source::Scan => s.scan.len(),
            Source::Accel => s.accel.len(),
            Source::AccelEvent => s.event.len(),
            Source::Battery => s.battery.len(),
        }
    }
}

fn reset_mic(c: &mut MicrophoneChunk, now: &Timestamp, period: u16) {
    c.timestamp = now.clone();
    c.sample_period_ms = period;
    c.data.clear();
}

fn reset_accel(c: &mut AccelChunk, now: &Timestamp) {
    c.timestamp = now.clone();
    c.magnitudes.clear();
}

fn close_if<T>(pipe: &mut Pipe<T>, keep: impl FnOnce(&T) -> bool) -> bool {
    match pipe.current() {
        Some(c) if keep(c) => pipe.close(),
        Some(_) => {
            pipe.cancel();
            false
        }
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::badge::proto::ScanConfig;

    fn ts(ms: i64) -> Timestamp {
        Timestamp::from_millis(ms)
    }

    fn mic_on(r: &mut Recorder) {
        assert_eq!(r.start(SourceConfig::default_for(Source::Microphone), &ts(0)), StartOutcome::Started);
    }

    #[test]
    fn mic_chunk_closes_after_112_windows() {
        let mut r = Recorder::new();
        mic_on(&mut r);
        for w in 0..MIC_CHUNK_POINTS {
            r.mic_sample(128 + (w % 3) as u8);
            let closed = r.mic_average(&ts(50 * (w as i64 + 1))).unwrap();
            assert_eq!(closed, w + 1 == MIC_CHUNK_POINTS);
        }
        let Some(Chunk::Microphone(c)) = r.take_finalized(Source::Microphone) else {
            panic!("no chunk")
        };
        assert_eq!(c.timestamp, ts(0));
        assert_eq!(c.sample_period_ms, 50);
        assert_eq!(c.data.len(), 112);
        assert_eq!(&c.data[..3], &[0, 1, 2]);
    }

    #[test]
    fn empty_window_is_reported() {
        let mut r = Recorder::new();
        mic_on(&mut r);
        assert_eq!(r.mic_average(&ts(50)), Err(EmptyWindow));
        assert_eq!(r.empty_windows(), 1);
    }

    #[test]
    fn identical_start_is_ignored_and_changed_start_restarts() {
        let mut r = Recorder::new();
        mic_on(&mut r);
        r.mic_sample(140);
        r.mic_average(&ts(50)).unwrap();
        assert_eq!(r.start(SourceConfig::default_for(Source::Microphone), &ts(60)), StartOutcome::Unchanged);
        assert_eq!(r.pending(Source::Microphone), 0);
        let other = SourceConfig::Microphone(crate::badge::proto::MicrophoneConfig { avg_period_ms: 100 });
        assert_eq!(r.start(other, &ts(70)), StartOutcome::Restarted);
        assert_eq!(r.pending(Source::Microphone), 1, "partial chunk kept");
    }

    #[test]
    fn stop_discards_empty_chunk() {
        let mut r = Recorder::new();
        mic_on(&mut r);
        assert!(!r.stop(Source::Microphone));
        assert_eq!(r.counters(Source::Microphone), PipelineCounters::default());
        assert!(!r.stop(Source::Microphone));
    }

    #[test]
    fn scan_chunk_is_sorted_on_the_way_out() {
        let mut r = Recorder::new();
        r.start(SourceConfig::default_for(Source::Scan), &ts(0));
        r.scan_begin(&ts(15_000));
        for (id, rssi) in [(16001, -80), (5, -40), (16002, -60), (7, -90), (5, -42)] {
            r.scan_observe(id, rssi);
        }
        assert!(r.scan_end());
        let Some(Chunk::Scan(c)) = r.take_finalized(Source::Scan) else {
            panic!()
        };
        let got: Vec<_> = c.devices.iter().map(|d| (d.id, d.rssi, d.count)).collect();
        assert_eq!(got, [(16002, -60, 1), (16001, -80, 1), (5, -41, 2), (7, -90, 1)]);
        assert_eq!(c.timestamp, ts(15_000));
    }

    #[test]
    fn scan_max_aggregation() {
        let mut r = Recorder::new();
        let cfg = ScanConfig {
            window_ms: 100,
            interval_ms: 300,
            duration_ms: 3000,
            period_s: 15,
            aggregation: 1,
        };
        r.start(SourceConfig::Scan(cfg), &ts(0));
        r.scan_begin(&ts(0));
        r.scan_observe(3, -70);
        r.scan_observe(3, -50);
        r.scan_end();
        let Some(Chunk::Scan(c)) = r.take_finalized(Source::Scan) else {
            panic!()
        };
        assert_eq!(c.devices[0].rssi, -50);
    }

    #[test]
    fn accel_chunks_hold_fifty_magnitudes() {
        let mut r = Recorder::new();
        r.start(SourceConfig::default_for(Source::Accel), &ts(0));
        let samples: Vec<[i16; 3]> = (0..120).map(|i| [(i % 7) * 10, 0, 1000]).collect();
        assert_eq!(r.accel_samples(&samples, &ts(12_000)), 2);
        let Some(Chunk::Accel(c)) = r.take_finalized(Source::Accel) else {
            panic!()
        };
        assert_eq!(c.magnitudes.len(), 50);
        assert_eq!(c.magnitudes[0], 0, "gravity is filtered out");
    }

    #[test]
    fn overflow_reclaims_latest_and_counters_balance() {
        let mut r = Recorder::new();
        r.start(SourceConfig::default_for(Source::Battery), &ts(0));
        for i in 0..5 {
            assert!(r.battery_record(3.0, &ts(i)));
        }
        let c = r.counters(Source::Battery);
        assert_eq!(c.closed, 5);
        assert_eq!(c.overwritten + c.pending, 5);
        assert_eq!(c.pending, 2);
        let first = r.take_finalized(Source::Battery).unwrap();
        let last = r.take_finalized(Source::Battery).unwrap();
        assert_eq!(first.timestamp(), ts(0));
        assert_eq!(last.timestamp(), ts(4));
    }

    #[test]
    fn streaming_is_separate_from_chunks() {
        let mut r = Recorder::new();
        mic_on(&mut r);
        r.set_streaming(Source::Microphone, true);
        for i in 0..70u8 {
            r.mic_sample(128 + i);
            r.mic_average(&ts(i as i64 * 50)).unwrap();
        }
        assert_eq!(r.stream_len(Source::Microphone), STREAM_DEPTH[0]);
        let StreamPoints::Microphone(v) = r.drain_stream(Source::Microphone, 16) else {
            panic!()
        };
        assert_eq!(v, (6..22).collect::<Vec<u8>>(), "oldest points were evicted");
        r.stop(Source::Microphone);
        assert!(!r.is_streaming(Source::Microphone));
    }
}

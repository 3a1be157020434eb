//! Data sources, their parameters and the chunks they produce.

use thiserror::Error;

use super::proto::{
    AccelChunk, AccelConfig, AccelEventChunk, AccelEventConfig, BatteryChunk, BatteryConfig, MicrophoneChunk,
    MicrophoneConfig, ResponseKind, ScanChunk, ScanConfig, Timestamp,
};

/// Data points per microphone chunk. With the 6-byte dynamic-CRC element
/// header a full chunk occupies exactly 127 bytes of storage.
pub const MIC_CHUNK_POINTS: usize = 112;
/// Magnitudes per accelerometer chunk.
pub const ACCEL_CHUNK_POINTS: usize = 50;
/// Devices a scan chunk can collect while scanning.
pub const SCAN_CAPACITY: usize = 255;
/// Devices kept when a scan chunk is stored.
pub const SCAN_STORED_DEVICES: usize = 29;
/// Ids at or above this value belong to location beacons.
pub const BEACON_ID_MIN: u16 = 16_000;
pub const ACCEL_DATARATES: [u16; 7] = [1, 10, 25, 50, 100, 200, 400];
pub const ACCEL_FULL_SCALES: [u8; 4] = [2, 4, 8, 16];
/// Depth of the accelerometer's hardware FIFO.
pub const ACCEL_HW_FIFO_LEVELS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Microphone = 0,
    Scan = 1,
    Accel = 2,
    AccelEvent = 3,
    Battery = 4,
}

impl Source {
    pub const ALL: [Source; 5] = [
        Source::Microphone,
        Source::Scan,
        Source::Accel,
        Source::AccelEvent,
        Source::Battery,
    ];

    pub fn from_u8(v: u8) -> Option<Source> {
        Source::ALL.get(v as usize).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Source::Microphone => "mic",
            Source::Scan => "scan",
            Source::Accel => "accel",
            Source::AccelEvent => "accel_event",
            Source::Battery => "battery",
        }
    }

    pub fn from_name(name: &str) -> Option<Source> {
        Source::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl Timestamp {
    /// Splits milliseconds since the epoch. Negative times clamp to zero and
    /// times past the `u32` seconds range saturate.
    pub fn from_millis(ms: i64) -> Timestamp {
        let ms = ms.max(0) as u64;
        Timestamp {
            seconds: (ms / 1000).min(u32::MAX as u64) as u32,
            ms: (ms % 1000) as u16,
        }
    }

    pub fn as_millis(&self) -> i64 {
        self.seconds as i64 * 1000 + self.ms as i64
    }

    pub fn is_valid(&self) -> bool {
        self.ms < 1000
    }
}

impl Default for Timestamp {
    fn default() -> Self {
        Timestamp { seconds: 0, ms: 0 }
    }
}

macro_rules! chunk_default {
    ($($t:ident { $($f:ident : $v:expr),* }),* $(,)?) => {
        $(impl Default for $t {
            fn default() -> Self {
                $t { timestamp: Timestamp::default() $(, $f: $v)* }
            }
        })*
    };
}

chunk_default! {
    MicrophoneChunk { sample_period_ms: 0, data: Vec::with_capacity(MIC_CHUNK_POINTS) },
    ScanChunk { devices: Vec::new() },
    AccelChunk { magnitudes: Vec::with_capacity(ACCEL_CHUNK_POINTS) },
    AccelEventChunk {},
    BatteryChunk { voltage: 0.0 },
}

/// A recorded chunk of any source.
#[derive(Debug, Clone, PartialEq)]
pub enum Chunk {
    Microphone(MicrophoneChunk),
    Scan(ScanChunk),
    Accel(AccelChunk),
    AccelEvent(AccelEventChunk),
    Battery(BatteryChunk),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("chunk does not decode: {0}")]
    Decode(String),
    #[error("chunk violates its limits: {0}")]
    Encode(String),
}

impl Chunk {
    pub fn source(&self) -> Source {
        match self {
            Chunk::Microphone(_) => Source::Microphone,
            Chunk::Scan(_) => Source::Scan,
            Chunk::Accel(_) => Source::Accel,
            Chunk::AccelEvent(_) => Source::AccelEvent,
            Chunk::Battery(_) => Source::Battery,
        }
    }

    pub fn timestamp(&self) -> Timestamp {
        match self {
            Chunk::Microphone(c) => c.timestamp.clone(),
            Chunk::Scan(c) => c.timestamp.clone(),
            Chunk::Accel(c) => c.timestamp.clone(),
            Chunk::AccelEvent(c) => c.timestamp.clone(),
            Chunk::Battery(c) => c.timestamp.clone(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, ChunkError> {
        let r = match self {
            Chunk::Microphone(c) => c.encode(),
            Chunk::Scan(c) => c.encode(),
            Chunk::Accel(c) => c.encode(),
            Chunk::AccelEvent(c) => c.encode(),
            Chunk::Battery(c) => c.encode(),
        };
        r.map_err(|e| ChunkError::Encode(e.to_string()))
    }

    pub fn decode(source: Source, bytes: &[u8]) -> Result<Chunk, ChunkError> {
        let r = match source {
            Source::Microphone => MicrophoneChunk::decode(bytes).map(Chunk::Microphone),
            Source::Scan => ScanChunk::decode(bytes).map(Chunk::Scan),
            Source::Accel => AccelChunk::decode(bytes).map(Chunk::Accel),
            Source::AccelEvent => AccelEventChunk::decode(bytes).map(Chunk::AccelEvent),
            Source::Battery => BatteryChunk::decode(bytes).map(Chunk::Battery),
        };
        r.map_err(|e| ChunkError::Decode(e.to_string()))
    }

    pub fn into_response(self) -> ResponseKind {
        match self {
            Chunk::Microphone(c) => ResponseKind::MicrophoneChunk(c),
            Chunk::Scan(c) => ResponseKind::ScanChunk(c),
            Chunk::Accel(c) => ResponseKind::AccelChunk(c),
            Chunk::AccelEvent(c) => ResponseKind::AccelEventChunk(c),
            Chunk::Battery(c) => ResponseKind::BatteryChunk(c),
        }
    }

    pub fn from_response(kind: ResponseKind) -> Option<Chunk> {
        Some(match kind {
            ResponseKind::MicrophoneChunk(c) => Chunk::Microphone(c),
            ResponseKind::ScanChunk(c) => Chunk::Scan(c),
            ResponseKind::AccelChunk(c) => Chunk::Accel(c),
            ResponseKind::AccelEventChunk(c) => Chunk::AccelEvent(c),
            ResponseKind::BatteryChunk(c) => Chunk::Battery(c),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Max,
}

impl Aggregation {
    pub fn from_u8(v: u8) -> Option<Aggregation> {
        match v {
            0 => Some(Aggregation::Mean),
            1 => Some(Aggregation::Max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("microphone averaging period must be positive")]
    MicPeriod,
    #[error("scan timing must satisfy 0 < window <= interval <= duration <= period")]
    ScanTiming,
    #[error("unknown scan aggregation")]
    ScanAggregation,
    #[error("unsupported accelerometer datarate")]
    AccelDatarate,
    #[error("unknown accelerometer mode")]
    AccelMode,
    #[error("unsupported accelerometer full scale")]
    AccelFullScale,
    #[error("accelerometer FIFO read period would overflow the hardware FIFO")]
    AccelReadPeriod,
    #[error("motion threshold must be positive")]
    EventThreshold,
    #[error("battery read period must be positive")]
    BatteryPeriod,
}

/// Start parameters of one source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceConfig {
    Microphone(MicrophoneConfig),
    Scan(ScanConfig),
    Accel(AccelConfig),
    AccelEvent(AccelEventConfig),
    Battery(BatteryConfig),
}

impl SourceConfig {
    pub fn source(&self) -> Source {
        match self {
            SourceConfig::Microphone(_) => Source::Microphone,
            SourceConfig::Scan(_) => Source::Scan,
            SourceConfig::Accel(_) => Source::Accel,
            SourceConfig::AccelEvent(_) => Source::AccelEvent,
            SourceConfig::Battery(_) => Source::Battery,
        }
    }

    /// Typical parameters for each source.
    pub fn default_for(source: Source) -> SourceConfig {
        match source {
            Source::Microphone => SourceConfig::Microphone(MicrophoneConfig { avg_period_ms: 50 }),
            Source::Scan => SourceConfig::Scan(ScanConfig {
                window_ms: 100,
                interval_ms: 300,
                duration_ms: 3000,
                period_s: 15,
                aggregation: 0,
            }),
            Source::Accel => SourceConfig::Accel(AccelConfig {
                datarate_hz: 10,
                mode: 0,
                full_scale_g: 2,
                fifo_read_period_ms: 100,
            }),
            Source::AccelEvent => SourceConfig::AccelEvent(AccelEventConfig {
                threshold_mg: 250,
                min_duration_ms: 20,
                dead_time_ms: 1000,
            }),
            Source::Battery => SourceConfig::Battery(BatteryConfig { read_period_s: 60 }),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            SourceConfig::Microphone(c) if c.avg_period_ms == 0 => Err(ConfigError::MicPeriod),
            SourceConfig::Scan(c) => {
                let ordered = c.window_ms > 0
                    && c.window_ms <= c.interval_ms
                    && c.interval_ms <= c.duration_ms
                    && c.duration_ms as u32 <= c.period_s as u32 * 1000;
                if !ordered {
                    Err(ConfigError::ScanTiming)
                } else if Aggregation::from_u8(c.aggregation).is_none() {
                    Err(ConfigError::ScanAggregation)
                } else {
                    Ok(())
                }
            }
            SourceConfig::Accel(c) => {
                if !ACCEL_DATARATES.contains(&c.datarate_hz) {
                    Err(ConfigError::AccelDatarate)
                } else if c.mode > 2 {
                    Err(ConfigError::AccelMode)
                } else if !ACCEL_FULL_SCALES.contains(&c.full_scale_g) {
                    Err(ConfigError::AccelFullScale)
                } else if c.fifo_read_period_ms == 0
                    || c.fifo_read_period_ms as u32 * c.datarate_hz as u32 > ACCEL_HW_FIFO_LEVELS * 1000
                {
                    Err(ConfigError::AccelReadPeriod)
                } else {
                    Ok(())
                }
            }
            SourceConfig::AccelEvent(c) if c.threshold_mg == 0 => Err(ConfigError::EventThreshold),
            SourceConfig::Battery(c) if c.read_period_s == 0 => Err(ConfigError::BatteryPeriod),
            _ => Ok(()),
        }
    }
}

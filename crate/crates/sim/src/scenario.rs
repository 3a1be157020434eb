//! Scenario description, loaded from JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use badge_core::badge::chunks::SourceConfig;
use badge_core::badge::proto::{AccelConfig, AccelEventConfig, BatteryConfig, MicrophoneConfig, ScanConfig};
use badge_core::badge::Source;
use badge_core::timebase::{SyncConfig, SyncMode};

use crate::oscillator::DriftModel;
use crate::signals::{AudioParams, BatteryParams, MotionParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Invalid(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub duration_s: f64,
    /// Hub wall-clock time at simulation start, in ms since the epoch.
    #[serde(default = "default_epoch")]
    pub epoch_ms: i64,
    #[serde(default)]
    pub transport: TransportConfig,
    #[serde(default)]
    pub pump: PumpMode,
    #[serde(default)]
    pub badges: Vec<BadgeSpec>,
    #[serde(default)]
    pub beacons: Vec<BeaconSpec>,
    #[serde(default)]
    pub hub: HubPlan,
    #[serde(default)]
    pub faults: FaultPlan,
    #[serde(default)]
    pub environment: Environment,
}

fn default_epoch() -> i64 {
    1_600_000_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportConfig {
    pub interval_ms: f64,
    pub packets_per_event: usize,
    /// Packets the radio stack buffers for transmission.
    pub buffer_packets: usize,
    /// Age of the hub timestamp in a status request when it reaches the
    /// badge, drawn uniformly from `[0, sync_jitter_ms]`.
    pub sync_jitter_ms: f64,
    /// Delay before a busy handler step is retried.
    pub retry_delay_ms: f64,
}

impl Default for TransportConfig {
    fn default() -> Self {
        TransportConfig {
            interval_ms: 50.0,
            packets_per_event: 6,
            buffer_packets: 6,
            sync_jitter_ms: 5.0,
            retry_delay_ms: 25.0,
        }
    }
}

/// How slices get from the TX FIFO into the radio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PumpMode {
    /// A timer hands over one slice per period.
    Timer { period_ms: f64 },
    /// Every slice is a job in the application scheduler, which is shared
    /// with `queue_load` other jobs of `event_cost_ms` each.
    Scheduler { queue_load: u32, event_cost_ms: f64 },
    /// The radio's transmit-complete callback hands over the next slice.
    Callback,
}

impl Default for PumpMode {
    fn default() -> Self {
        PumpMode::Timer { period_ms: 6.0 }
    }
}

impl PumpMode {
    pub fn scheduler_default() -> Self {
        PumpMode::Scheduler {
            queue_load: 8,
            event_cost_ms: 3.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PumpMode::Timer { .. } => "timer",
            PumpMode::Scheduler { .. } => "scheduler",
            PumpMode::Callback => "callback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncSettings {
    pub mode: SyncModeName,
    pub alpha: f64,
    pub f_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncModeName {
    Constant,
    Ewma,
}

impl Default for SyncSettings {
    fn default() -> Self {
        let c = SyncConfig::default();
        SyncSettings {
            mode: SyncModeName::Ewma,
            alpha: c.alpha,
            f_dev: c.f_dev,
        }
    }
}

impl SyncSettings {
    pub fn constant() -> Self {
        SyncSettings {
            mode: SyncModeName::Constant,
            ..SyncSettings::default()
        }
    }

    pub fn ewma(alpha: f64, f_dev: f64) -> Self {
        SyncSettings {
            mode: SyncModeName::Ewma,
            alpha,
            f_dev,
        }
    }

    pub fn to_config(self) -> SyncConfig {
        SyncConfig {
            mode: match self.mode {
                SyncModeName::Constant => SyncMode::Constant,
                SyncModeName::Ewma => SyncMode::Ewma,
            },
            alpha: self.alpha,
            f_dev: self.f_dev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BadgeSpec {
    pub id: u16,
    pub group: u8,
    /// Position on a line in metres, for signal strength.
    #[serde(default)]
    pub position: f64,
    #[serde(default)]
    pub drift: DriftModel,
    #[serde(default)]
    pub sync: SyncSettings,
    /// Sources the hub starts after every connect.
    #[serde(default)]
    pub sources: Vec<SourceStart>,
    /// Sources the hub streams after starting them.
    #[serde(default)]
    pub stream: Vec<String>,
}

/// A source and parameters overriding its defaults, e.g.
/// `{"source": "scan", "period_s": 30}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStart {
    pub source: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, u64>,
}

impl SourceStart {
    pub fn to_config(&self) -> Result<SourceConfig, ScenarioError> {
        let Some(source) = Source::from_name(&self.source) else {
            return invalid(format!("unknown source `{}`", self.source));
        };
        let mut cfg = SourceConfig::default_for(source);
        for (key, &v) in &self.params {
            let ok = match &mut cfg {
                SourceConfig::Microphone(MicrophoneConfig { avg_period_ms }) => match key.as_str() {
                    "avg_period_ms" => set(avg_period_ms, v),
                    _ => None,
                },
                SourceConfig::Scan(ScanConfig {
                    window_ms,
                    interval_ms,
                    duration_ms,
                    period_s,
                    aggregation,
                }) => match key.as_str() {
                    "window_ms" => set(window_ms, v),
                    "interval_ms" => set(interval_ms, v),
                    "duration_ms" => set(duration_ms, v),
                    "period_s" => set(period_s, v),
                    "aggregation" => set(aggregation, v),
                    _ => None,
                },
                SourceConfig::Accel(AccelConfig {
                    datarate_hz,
                    mode,
                    full_scale_g,
                    fifo_read_period_ms,
                }) => match key.as_str() {
                    "datarate_hz" => set(datarate_hz, v),
                    "mode" => set(mode, v),
                    "full_scale_g" => set(full_scale_g, v),
                    "fifo_read_period_ms" => set(fifo_read_period_ms, v),
                    _ => None,
                },
                SourceConfig::AccelEvent(AccelEventConfig {
                    threshold_mg,
                    min_duration_ms,
                    dead_time_ms,
                }) => match key.as_str() {
                    "threshold_mg" => set(threshold_mg, v),
                    "min_duration_ms" => set(min_duration_ms, v),
                    "dead_time_ms" => set(dead_time_ms, v),
                    _ => None,
                },
                SourceConfig::Battery(BatteryConfig { read_period_s }) => match key.as_str() {
                    "read_period_s" => set(read_period_s, v),
                    _ => None,
                },
            };
            if ok.is_none() {
                return invalid(format!("bad parameter `{key}` = {v} for source `{}`", self.source));
            }
        }
        if let Err(e) = cfg.validate() {
            return invalid(format!("source `{}`: {e}", self.source));
        }
        Ok(cfg)
    }
}

fn set<T: TryFrom<u64>>(field: &mut T, v: u64) -> Option<()> {
    *field = T::try_from(v).ok()?;
    Some(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeaconSpec {
    pub id: u16,
    pub group: u8,
    #[serde(default)]
    pub position: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HubPlan {
    /// Connect to every badge at time zero.
    pub connect_at_start: bool,
    /// Reconnect this long after a connection is lost; `null` stays away.
    pub reconnect_after_s: Option<f64>,
    /// Periodic status requests with gaps drawn uniformly from the range.
    pub sync: Option<SyncPlan>,
    pub data_requests: Vec<DataRequestPlan>,
}

impl Default for HubPlan {
    fn default() -> Self {
        HubPlan {
            connect_at_start: true,
            reconnect_after_s: Some(5.0),
            sync: None,
            data_requests: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncPlan {
    pub min_gap_s: f64,
    pub max_gap_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataRequestPlan {
    pub at_s: f64,
    pub badge: usize,
    pub source: String,
    /// Hub time in ms since the epoch; 0 asks for everything.
    #[serde(default)]
    pub since_ms: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultPlan {
    pub power_cuts: Vec<PowerCutPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCutPlan {
    pub at_s: f64,
    pub badge: usize,
    /// Physical bytes the storage may still commit before power fails.
    #[serde(default)]
    pub after_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Environment {
    pub audio: AudioParams,
    /// ADC conversions per microphone sampling tick, 50 µs apart.
    pub mic_samples_per_tick: u32,
    pub motion: MotionParams,
    pub battery: BatteryParams,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            audio: AudioParams::default(),
            mic_samples_per_tick: 1,
            motion: MotionParams::default(),
            battery: BatteryParams::default(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return invalid("duration_s must be a finite non-negative number");
        }
        let t = &self.transport;
        if !(t.interval_ms > 0.0) || t.packets_per_event == 0 || t.buffer_packets == 0 {
            return invalid("transport interval, packets per event and buffer must be positive");
        }
        if !(t.sync_jitter_ms >= 0.0) || !(t.retry_delay_ms > 0.0) {
            return invalid("sync jitter must be non-negative and retry delay positive");
        }
        match self.pump {
            PumpMode::Timer { period_ms } if !(period_ms > 0.0) => return invalid("pump period must be positive"),
            PumpMode::Scheduler { event_cost_ms, .. } if !(event_cost_ms > 0.0) => {
                return invalid("scheduler event cost must be positive")
            }
            _ => {}
        }
        for (i, b) in self.badges.iter().enumerate() {
            b.drift.validate().map_err(|e| ScenarioError::Invalid(format!("badge {i}: {e}")))?;
            let s = b.sync;
            if !(0.0..=1.0).contains(&s.alpha) || !(s.f_dev >= 0.0 && s.f_dev < 32768.0) {
                return invalid(format!("badge {i}: sync alpha or f_dev out of range"));
            }
            for src in &b.sources {
                src.to_config()?;
            }
            for name in &b.stream {
                if Source::from_name(name).is_none() {
                    return invalid(format!("badge {i}: unknown stream source `{name}`"));
                }
            }
        }
        if let Some(p) = self.hub.sync {
            if !(p.min_gap_s >= 0.0 && p.max_gap_s >= p.min_gap_s && p.max_gap_s > 0.0) {
                return invalid("sync gaps must satisfy 0 <= min <= max, max > 0");
            }
        }
        for r in &self.hub.data_requests {
            if r.badge >= self.badges.len() || Source::from_name(&r.source).is_none() || !(r.at_s >= 0.0) {
                return invalid(format!("bad data request {r:?}"));
            }
        }
        for c in &self.faults.power_cuts {
            if c.badge >= self.badges.len() || !(c.at_s >= 0.0) {
                return invalid(format!("bad power cut {c:?}"));
            }
        }
        if self.environment.mic_samples_per_tick == 0 {
            return invalid("mic_samples_per_tick must be at least 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = Scenario::from_json(r#"{"seed": 1, "duration_s": 10}"#).unwrap();
        assert_eq!(s.transport, TransportConfig::default());
        assert_eq!(s.pump, PumpMode::Timer { period_ms: 6.0 });
        assert!(s.badges.is_empty());
    }

    #[test]
    fn source_parameters_override_defaults() {
        let s = SourceStart {
            source: "scan".into(),
            params: [("period_s".to_string(), 30)].into(),
        };
        let SourceConfig::Scan(c) = s.to_config().unwrap() else { panic!() };
        assert_eq!((c.period_s, c.window_ms), (30, 100));
    }

    #[test]
    fn rejects_bad_fields() {
        for text in [
            r#"{"seed": 1, "duration_s": -1}"#,
            r#"{"seed": 1, "duration_s": 1, "bogus": 2}"#,
            r#"{"seed": 1, "duration_s": 1, "badges": [{"id": 1, "group": 1, "sources": [{"source": "mic", "rate": 3}]}]}"#,
            r#"{"seed": 1, "duration_s": 1, "badges": [{"id": 1, "group": 1, "sources": [{"source": "scan", "window_ms": 900}]}]}"#,
            r#"{"seed": 1, "duration_s": 1, "hub": {"data_requests": [{"at_s": 1, "badge": 0, "source": "mic"}]}}"#,
            r#"{"seed": 1, "duration_s": 1, "badges": [{"id": 1, "group": 1, "drift": {"kind": "constant", "offset_hz": 80}}]}"#,
        ] {
            assert!(Scenario::from_json(text).is_err(), "{text}");
        }
    }
}

//! Golden-bytes fixtures: a fixed corpus of protocol messages with their
//! encodings, shared with hub implementations in other languages.
//!
//! The fixture directory holds one `NN_name.bin` file per message and an
//! `index.json` listing, for each fixture, the message type, the bytes in
//! hex, the field values as JSON and a Python constructor expression for
//! the generated Python bindings.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value as Json};
use tinybuf::{FieldType, Message, Scalar, Schema, Value};

use badge_core::badge::proto::*;
use badge_core::badge::protocol_schema;

pub const INDEX_FILE: &str = "index.json";
pub const FIXTURE_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fixture {
    pub name: String,
    /// `Request` or `Response`.
    pub message: &'static str,
    #[serde(serialize_with = "as_hex")]
    pub bytes: Vec<u8>,
    pub value: Json,
    pub python: String,
}

fn as_hex<S: serde::Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex(bytes))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn ts(seconds: u32, ms: u16) -> Timestamp {
    Timestamp { seconds, ms }
}

fn empty() -> Empty {
    Empty {}
}

fn requests() -> Vec<(&'static str, RequestKind)> {
    use RequestKind as K;
    vec![
        (
            "status_assign",
            K::Status(StatusRequest {
                timestamp: ts(1_600_000_000, 123),
                assignment: Some(Assignment { id: 1, group: 7 }),
            }),
        ),
        (
            "status_plain",
            K::Status(StatusRequest {
                timestamp: ts(1_600_000_600, 999),
                assignment: None,
            }),
        ),
        ("start_microphone", K::StartMicrophone(MicrophoneConfig { avg_period_ms: 50 })),
        (
            "start_scan",
            K::StartScan(ScanConfig {
                window_ms: 100,
                interval_ms: 300,
                duration_ms: 3000,
                period_s: 15,
                aggregation: 1,
            }),
        ),
        (
            "start_accel",
            K::StartAccel(AccelConfig {
                datarate_hz: 50,
                mode: 1,
                full_scale_g: 4,
                fifo_read_period_ms: 500,
            }),
        ),
        (
            "start_accel_event",
            K::StartAccelEvent(AccelEventConfig {
                threshold_mg: 250,
                min_duration_ms: 20,
                dead_time_ms: 1000,
            }),
        ),
        ("start_battery", K::StartBattery(BatteryConfig { read_period_s: 60 })),
        ("stop_microphone", K::StopMicrophone(empty())),
        ("stop_scan", K::StopScan(empty())),
        ("stop_accel", K::StopAccel(empty())),
        ("stop_accel_event", K::StopAccelEvent(empty())),
        ("stop_battery", K::StopBattery(empty())),
        ("stream_start_microphone", K::StreamStartMicrophone(empty())),
        ("stream_start_scan", K::StreamStartScan(empty())),
        ("stream_start_accel", K::StreamStartAccel(empty())),
        ("stream_start_accel_event", K::StreamStartAccelEvent(empty())),
        ("stream_start_battery", K::StreamStartBattery(empty())),
        ("stream_stop_microphone", K::StreamStopMicrophone(empty())),
        ("stream_stop_scan", K::StreamStopScan(empty())),
        ("stream_stop_accel", K::StreamStopAccel(empty())),
        ("stream_stop_accel_event", K::StreamStopAccelEvent(empty())),
        ("stream_stop_battery", K::StreamStopBattery(empty())),
        (
            "data_request_mic",
            K::DataRequest(DataRequest {
                source: 0,
                since: ts(1_600_000_000, 0),
            }),
        ),
        (
            "data_request_all_scans",
            K::DataRequest(DataRequest {
                source: 1,
                since: ts(0, 0),
            }),
        ),
        ("restart", K::Restart(empty())),
        ("identify", K::Identify(IdentifyRequest { led: 1, seconds: 10 })),
        ("selftest", K::Selftest(empty())),
        (
            "start_scan_extremes",
            K::StartScan(ScanConfig {
                window_ms: u16::MAX,
                interval_ms: u16::MAX,
                duration_ms: u16::MAX,
                period_s: u16::MAX,
                aggregation: 0,
            }),
        ),
    ]
}

fn responses() -> Vec<(&'static str, ResponseKind)> {
    use ResponseKind as K;
    let scan = |n: usize| ScanChunk {
        timestamp: ts(1_600_000_015, 250),
        devices: (0..n)
            .map(|i| ScanResultData {
                id: if i < 2 { 16_000 + i as u16 } else { i as u16 },
                rssi: -40 - i as i8,
                count: 1 + i as u8,
            })
            .collect(),
    };
    vec![
        (
            "status_synced",
            K::Status(StatusResponse {
                status_flags: 0x03,
                id: 1,
                group: 7,
                battery: 200,
                timestamp: ts(1_600_000_000, 130),
                before_sync: Some(ts(1_600_000_000, 121)),
            }),
        ),
        (
            "status_unsynced",
            K::Status(StatusResponse {
                status_flags: 0,
                id: 0,
                group: 0,
                battery: 0,
                timestamp: ts(1_600_000_000, 130),
                before_sync: None,
            }),
        ),
        (
            "microphone_chunk_full",
            K::MicrophoneChunk(MicrophoneChunk {
                timestamp: ts(1_600_000_005, 50),
                sample_period_ms: 50,
                data: (0..112).map(|i| (i * 7 % 256) as u8).collect(),
            }),
        ),
        (
            "microphone_chunk_partial",
            K::MicrophoneChunk(MicrophoneChunk {
                timestamp: ts(1_600_000_010, 0),
                sample_period_ms: 50,
                data: vec![0, 1, 2, 255],
            }),
        ),
        ("scan_chunk_29", K::ScanChunk(scan(29))),
        ("scan_chunk_empty", K::ScanChunk(scan(0))),
        (
            "accel_chunk",
            K::AccelChunk(AccelChunk {
                timestamp: ts(1_600_000_020, 100),
                magnitudes: (0..50).map(|i| i * 1000).collect(),
            }),
        ),
        (
            "accel_event_chunk",
            K::AccelEventChunk(AccelEventChunk {
                timestamp: ts(1_600_000_021, 7),
            }),
        ),
        (
            "battery_chunk",
            K::BatteryChunk(BatteryChunk {
                timestamp: ts(1_600_000_060, 0),
                voltage: 2.9,
            }),
        ),
        (
            "data_end",
            K::DataEnd(DataEnd {
                source: 0,
                chunks: 50,
                corrupted: 1,
            }),
        ),
        (
            "selftest",
            K::Selftest(SelftestResponse {
                passed: 0x1D,
                failed: 0x02,
            }),
        ),
        ("error_unknown_request", K::Error(ErrorResponse { code: 1 })),
        (
            "microphone_stream",
            K::MicrophoneStream(MicrophoneStream {
                timestamp: ts(1_600_000_030, 500),
                values: (0..16).collect(),
            }),
        ),
        (
            "scan_stream",
            K::ScanStream(ScanStream {
                timestamp: ts(1_600_000_031, 1),
                observations: vec![
                    ScanObservation { id: 2, rssi: -60 },
                    ScanObservation { id: 16_001, rssi: -72 },
                ],
            }),
        ),
        (
            "accel_stream",
            K::AccelStream(AccelStream {
                timestamp: ts(1_600_000_032, 2),
                samples: vec![
                    AccelSample { x: 0, y: 0, z: 1000 },
                    AccelSample {
                        x: -32768,
                        y: 32767,
                        z: -1,
                    },
                ],
            }),
        ),
        (
            "accel_event_stream",
            K::AccelEventStream(AccelEventStream {
                timestamp: ts(1_600_000_033, 3),
            }),
        ),
        (
            "battery_stream",
            K::BatteryStream(BatteryStream {
                timestamp: ts(1_600_000_034, 4),
                voltage: 3.55,
            }),
        ),
        (
            "data_end_empty",
            K::DataEnd(DataEnd {
                source: 4,
                chunks: 0,
                corrupted: 0,
            }),
        ),
        (
            "error_invalid_config",
            K::Error(ErrorResponse { code: 2 }),
        ),
        (
            "data_end_max",
            K::DataEnd(DataEnd {
                source: 2,
                chunks: u32::MAX,
                corrupted: u16::MAX,
            }),
        ),
        (
            "status_max",
            K::Status(StatusResponse {
                status_flags: 0xFF,
                id: u16::MAX,
                group: u8::MAX,
                battery: u8::MAX,
                timestamp: ts(u32::MAX, 999),
                before_sync: Some(ts(0, 0)),
            }),
        ),
        (
            "scan_chunk_one",
            K::ScanChunk(ScanChunk {
                timestamp: ts(1, 1),
                devices: vec![ScanResultData {
                    id: 3,
                    rssi: -128,
                    count: 255,
                }],
            }),
        ),
    ]
}

/// The fixture corpus, encoded with the generated bindings.
pub fn corpus() -> Vec<Fixture> {
    let schema = protocol_schema();
    let mut out = Vec::new();
    for (name, kind) in requests() {
        let bytes = Request { kind }.encode().expect("fixture encodes");
        out.push(fixture(schema, name, "Request", bytes));
    }
    for (name, kind) in responses() {
        let bytes = Response { kind }.encode().expect("fixture encodes");
        out.push(fixture(schema, name, "Response", bytes));
    }
    assert_eq!(out.len(), FIXTURE_COUNT);
    out
}

fn fixture(schema: &Schema, name: &str, message: &'static str, bytes: Vec<u8>) -> Fixture {
    let value = schema.decode(message, &bytes).expect("generated and dynamic codecs agree");
    Fixture {
        name: format!("{}_{name}", message.to_lowercase()),
        message,
        value: message_json(&value),
        python: python_expr(schema, message, &value),
        bytes,
    }
}

fn scalar_json(s: &Scalar) -> Json {
    match *s {
        Scalar::F32(v) => json!(v as f64),
        Scalar::F64(v) => json!(v),
        other => match other.as_i128() {
            Some(v) if v < 0 => json!(v as i64),
            Some(v) => json!(v as u64),
            None => Json::Null,
        },
    }
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Scalar(s) => scalar_json(s),
        Value::Message(m) => message_json(m),
        Value::List(items) => Json::Array(items.iter().map(value_json).collect()),
    }
}

fn message_json(m: &Message) -> Json {
    Json::Object(m.iter().map(|(k, v)| (k.to_string(), value_json(v))).collect())
}

fn python_scalar(s: &Scalar) -> String {
    match *s {
        Scalar::F32(v) => format!("{:?}", v as f64),
        Scalar::F64(v) => format!("{v:?}"),
        other => other.as_i128().expect("integer scalar").to_string(),
    }
}

fn python_value(schema: &Schema, ty: &FieldType, v: &Value) -> String {
    match (ty, v) {
        (_, Value::Scalar(s)) => python_scalar(s),
        (FieldType::Message(name), Value::Message(m)) => python_expr(schema, name, m),
        (_, Value::List(items)) => {
            let parts: Vec<String> = items.iter().map(|i| python_value(schema, ty, i)).collect();
            format!("[{}]", parts.join(", "))
        }
        _ => unreachable!("decoded values match their schema"),
    }
}

/// Constructor expression for the generated Python dataclasses.
pub fn python_expr(schema: &Schema, message: &str, m: &Message) -> String {
    let desc = schema.message(message).expect("known message");
    let args: Vec<String> = desc
        .fields
        .iter()
        .filter_map(|f| {
            let v = m.get(&f.name)?;
            Some(format!("{}={}", f.name, python_value(schema, &f.ty, v)))
        })
        .collect();
    format!("{message}({})", args.join(", "))
}

/// Writes the corpus into `dir`, replacing earlier fixture files.
pub fn write_fixtures(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let fixtures = corpus();
    for (i, f) in fixtures.iter().enumerate() {
        fs::write(dir.join(format!("{i:02}_{}.bin", f.name)), &f.bytes)?;
    }
    fs::write(dir.join(INDEX_FILE), index_json(&fixtures))
}

pub fn index_json(fixtures: &[Fixture]) -> String {
    let doc = json!({ "schema": "protocol.tb", "fixtures": fixtures });
    serde_json::to_string_pretty(&doc).expect("fixtures serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_covers_every_oneof_member() {
        let fixtures = corpus();
        let requests = fixtures.iter().filter(|f| f.message == "Request").count();
        assert_eq!(requests, 28);
        let mut tags: Vec<(&str, u8)> = fixtures.iter().map(|f| (f.message, f.bytes[0])).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 25 + 14);
    }

    #[test]
    fn python_expression_names_fields() {
        let f = &corpus()[0];
        assert_eq!(
            f.python,
            "Request(status=StatusRequest(timestamp=Timestamp(seconds=1600000000, ms=123), \
             assignment=Assignment(id=1, group=7)))"
        );
    }
}

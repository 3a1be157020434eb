//! Request builders and response decoding for the hub side of the protocol.

use badge_core::badge::proto::{
    self, Assignment, DataRequest, Empty, Request, RequestKind, Response, StatusRequest, Timestamp,
};
use badge_core::badge::{Source, SourceConfig};

pub fn encode(kind: RequestKind) -> Vec<u8> {
    Request { kind }.encode().expect("requests built here are always encodable")
}

pub fn decode_response(payload: &[u8]) -> Result<Response, proto::Error> {
    Response::decode(payload)
}

pub fn status(hub_ms: i64, assignment: Option<(u16, u8)>) -> RequestKind {
    RequestKind::Status(StatusRequest {
        timestamp: Timestamp::from_millis(hub_ms),
        assignment: assignment.map(|(id, group)| Assignment { id, group }),
    })
}

pub fn start(config: &SourceConfig) -> RequestKind {
    match config.clone() {
        SourceConfig::Microphone(c) => RequestKind::StartMicrophone(c),
        SourceConfig::Scan(c) => RequestKind::StartScan(c),
        SourceConfig::Accel(c) => RequestKind::StartAccel(c),
        SourceConfig::AccelEvent(c) => RequestKind::StartAccelEvent(c),
        SourceConfig::Battery(c) => RequestKind::StartBattery(c),
    }
}

pub fn stop(source: Source) -> RequestKind {
    match source {
        Source::Microphone => RequestKind::StopMicrophone(Empty {}),
        Source::Scan => RequestKind::StopScan(Empty {}),
        Source::Accel => RequestKind::StopAccel(Empty {}),
        Source::AccelEvent => RequestKind::StopAccelEvent(Empty {}),
        Source::Battery => RequestKind::StopBattery(Empty {}),
    }
}

pub fn stream_start(source: Source) -> RequestKind {
    match source {
        Source::Microphone => RequestKind::StreamStartMicrophone(Empty {}),
        Source::Scan => RequestKind::StreamStartScan(Empty {}),
        Source::Accel => RequestKind::StreamStartAccel(Empty {}),
        Source::AccelEvent => RequestKind::StreamStartAccelEvent(Empty {}),
        Source::Battery => RequestKind::StreamStartBattery(Empty {}),
    }
}

pub fn stream_stop(source: Source) -> RequestKind {
    match source {
        Source::Microphone => RequestKind::StreamStopMicrophone(Empty {}),
        Source::Scan => RequestKind::StreamStopScan(Empty {}),
        Source::Accel => RequestKind::StreamStopAccel(Empty {}),
        Source::AccelEvent => RequestKind::StreamStopAccelEvent(Empty {}),
        Source::Battery => RequestKind::StreamStopBattery(Empty {}),
    }
}

pub fn data_request(source: Source, since_ms: i64) -> RequestKind {
    RequestKind::DataRequest(DataRequest {
        source: source as u8,
        since: Timestamp::from_millis(since_ms),
    })
}

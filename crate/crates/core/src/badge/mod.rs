//! The badge application: recording pipelines, storage of chunks, the
//! framed request/response protocol and advertising.
//!
//! Everything here is driven from outside: a host (the simulator, or a test)
//! calls the timer-side entry points of [`Badge`] when sampling timers fire
//! and runs the returned [`Job`]s in its main loop. Time is passed in as the
//! 32768 Hz tick counter of the badge's own oscillator.

pub mod advertising;
pub mod chunks;
pub mod handler;
pub mod processing;
pub mod recorder;
pub mod sender;
pub mod storer;

/// Types generated from `protocol.tb` by the tinybuf compiler.
#[allow(dead_code, unused_variables, clippy::all)]
pub mod proto {
    include!(concat!(env!("OUT_DIR"), "/protocol_bindings.rs"));
}

use std::sync::OnceLock;

pub use advertising::{AdvertisingPacket, StatusFlags};
pub use chunks::{Chunk, Source, SourceConfig};
pub use handler::{Badge, BadgeConfig, BadgeCounters, BadgeEvent, Job, StepOutcome, TimerKind, TimerSpec};
pub use recorder::Recorder;
pub use sender::{frame, FrameError, FrameReader, Sender};
pub use storer::Storer;

/// Source text of the protocol schema.
pub const PROTOCOL_SCHEMA: &str = include_str!("../../protocol.tb");

/// The parsed protocol schema, for dynamic encoding and for emitting
/// descriptors and bindings.
pub fn protocol_schema() -> &'static tinybuf::Schema {
    static SCHEMA: OnceLock<tinybuf::Schema> = OnceLock::new();
    SCHEMA.get_or_init(|| tinybuf::parse_schema(PROTOCOL_SCHEMA).expect("protocol.tb is valid"))
}

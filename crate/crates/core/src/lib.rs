//! Host-runnable core of a wearable social-sensing badge firmware.
//!
//! - [`vmem`]: flash and EEPROM models behind one address space.
//! - [`seqfs`]: crash-safe sequential filesystem on top of it.
//! - [`fifo`]: chunk and streaming FIFOs.
//! - [`timebase`]: drift-compensating clock synchronization.
//! - [`badge`]: recording pipelines, storage, protocol and advertising.

pub mod badge;
pub mod fifo;
pub mod seqfs;
pub mod timebase;
pub mod vmem;

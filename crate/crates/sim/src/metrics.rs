//! Metric rows and their CSV and JSON output.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One accepted sync message whose error could be measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorRow {
    pub time_s: f64,
    pub badge: u16,
    /// Badge estimate minus hub timestamp, before the update.
    pub error_ms: f64,
}

/// One completed data request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    pub badge: u16,
    pub source: String,
    pub request_s: f64,
    pub last_chunk_s: f64,
    pub chunks: u32,
    /// Frame bytes of the chunk responses, length prefixes included.
    pub bytes: u64,
    pub bytes_per_s: f64,
    pub corrupted: u16,
    pub timestamps_monotonic: bool,
}

/// Recording and storage totals of one source at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageRow {
    pub badge: u16,
    pub source: String,
    pub chunks_closed: u64,
    pub chunks_stored: u64,
    pub chunks_failed: u64,
    pub chunks_overwritten: u64,
    pub chunks_pending: u64,
    pub elements_alive: u64,
}

/// Elements of one partition around a power cut and reboot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub time_s: f64,
    pub badge: u16,
    pub source: String,
    pub elements_at_cut: u64,
    pub elements_recovered: u64,
    /// Finalized chunks that were still waiting in RAM.
    pub chunks_lost_in_ram: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BadgeSummary {
    pub id: u16,
    pub requests: u64,
    pub undecodable_frames: u64,
    pub dropped_connections: u64,
    pub error_responses: u64,
    pub empty_mic_windows: u64,
    pub reboots: u64,
    pub sync_count: u64,
    pub sync_mae_ms: Option<f64>,
    pub sync_max_abs_ms: Option<f64>,
    pub stream_messages: u64,
    pub connection_events: u64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub max_packets_per_event: usize,
    /// Largest badge to hub byte count in any one-second window aligned to
    /// the connection grid.
    pub max_bytes_per_s: u64,
    pub max_scheduler_queue: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub duration_s: f64,
    pub events: u64,
    pub max_event_queue: usize,
    pub link_ceiling_bytes_per_s: f64,
    pub badges: Vec<BadgeSummary>,
    /// SHA-256 over the processed event trace.
    pub trace_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub sync_errors: Vec<SyncErrorRow>,
    pub throughput: Vec<ThroughputRow>,
    pub storage: Vec<StorageRow>,
    pub recovery: Vec<RecoveryRow>,
    pub summary: Summary,
}

pub const SYNC_ERRORS_CSV: &str = "sync_errors.csv";
pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const STORAGE_CSV: &str = "storage.csv";
pub const RECOVERY_CSV: &str = "recovery.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Mean absolute value, `None` for an empty slice.
pub fn mae(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64)
}

pub fn max_abs(values: &[f64]) -> Option<f64> {
    values.iter().map(|v| v.abs()).reduce(f64::max)
}

/// CSV text with a header row, even when there are no rows.
pub fn to_csv<T: Serialize>(header: &[&str], rows: &[T]) -> io::Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

impl Metrics {
    /// File name and content of every output file.
    pub fn files(&self) -> io::Result<Vec<(&'static str, String)>> {
        Ok(vec![
            (SYNC_ERRORS_CSV, to_csv(&["time_s", "badge", "error_ms"], &self.sync_errors)?),
            (
                THROUGHPUT_CSV,
                to_csv(
                    &[
                        "badge",
                        "source",
                        "request_s",
                        "last_chunk_s",
                        "chunks",
                        "bytes",
                        "bytes_per_s",
                        "corrupted",
                        "timestamps_monotonic",
                    ],
                    &self.throughput,
                )?,
            ),
            (
                STORAGE_CSV,
                to_csv(
                    &[
                        "badge",
                        "source",
                        "chunks_closed",
                        "chunks_stored",
                        "chunks_failed",
                        "chunks_overwritten",
                        "chunks_pending",
                        "elements_alive",
                    ],
                    &self.storage,
                )?,
            ),
            (
                RECOVERY_CSV,
                to_csv(
                    &[
                        "time_s",
                        "badge",
                        "source",
                        "elements_at_cut",
                        "elements_recovered",
                        "chunks_lost_in_ram",
                    ],
                    &self.recovery,
                )?,
            ),
            (SUMMARY_JSON, serde_json::to_string_pretty(&self.summary)? + "\n"),
        ])
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, content) in self.files()? {
            fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_metrics_still_have_headers() {
        let files = Metrics::default().files().unwrap();
        assert_eq!(files[0].1, "time_s,badge,error_ms\n");
        assert_eq!(files.len(), 5);
    }

    #[test]
    fn rows_follow_header_order() {
        let m = Metrics {
            sync_errors: vec![SyncErrorRow {
                time_s: 1.5,
                badge: 3,
                error_ms: -2.0,
            }],
            ..Metrics::default()
        };
        assert_eq!(m.files().unwrap()[0].1, "time_s,badge,error_ms\n1.5,3,-2.0\n");
    }

    #[test]
    fn mae_and_max() {
        assert_eq!(mae(&[1.0, -3.0]), Some(2.0));
        assert_eq!(max_abs(&[1.0, -3.0]), Some(3.0));
        assert_eq!(mae(&[]), None);
    }
}

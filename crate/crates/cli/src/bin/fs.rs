//! Inspects the filesystem inside a badge memory image.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use badge_core::badge::storer::default_partitions;
use badge_core::badge::{Chunk, Source, Storer};
use badge_core::seqfs::PartitionConfig;
use badge_core::vmem::VirtualStorage;
use badge_sim::faults::compact_layout;

#[derive(Parser)]
#[command(name = "fs", about = "Inspect badge memory images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the partitions of an image, or the elements of one partition.
    Inspect {
        image: PathBuf,
        /// Partition id (1 mic, 2 scan, 3 accel, 4 accel events, 5 battery).
        #[arg(long)]
        partition: Option<u16>,
        /// Partition layout the image was written with.
        #[arg(long, value_enum, default_value = "default")]
        layout: Layout,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    /// The badge firmware layout.
    Default,
    /// The small layout of the power cut campaign.
    Compact,
}

fn main() -> Result<()> {
    let Command::Inspect { image, partition, layout } = Cli::parse().command;
    let bytes = fs::read(&image).with_context(|| format!("reading {}", image.display()))?;
    let storage = VirtualStorage::from_image(&bytes).context("not a memory image")?;
    let (storer, parts): (Storer, Vec<(Source, PartitionConfig)>) = match layout {
        Layout::Default => (Storer::new(storage)?, default_partitions().into()),
        Layout::Compact => {
            let l = compact_layout(storage.flash_size());
            (Storer::with_layout(storage, l)?, l.into_iter().map(|(s, _, c)| (s, c)).collect())
        }
    };
    let fs = storer.fs();
    let mut out = String::new();

    let Some(id) = partition else {
        writeln!(out, "{:>3}  {:<12} {:>8} {:>9}", "id", "source", "elements", "bytes")?;
        for (source, cfg) in &parts {
            let elements = fs.elements(storer.handle(*source))?;
            let bytes: usize = elements.iter().map(|e| e.len).sum();
            writeln!(out, "{:>3}  {:<12} {:>8} {:>9}", cfg.id, source.name(), elements.len(), bytes)?;
        }
        return emit(&out);
    };

    let Some((source, cfg)) = parts.into_iter().find(|(_, c)| c.id == id) else {
        bail!("no partition with id {id}");
    };
    writeln!(out, "partition {id} ({}), {} bytes, header {} B", source.name(), cfg.size, cfg.header_size())?;
    let h = storer.handle(source);
    for e in fs.elements(h)? {
        let summary = match fs.read(h, &e).map_err(anyhow::Error::from).and_then(|b| Ok(Chunk::decode(source, &b)?)) {
            Ok(chunk) => {
                let ts = chunk.timestamp();
                format!("{}.{:03}", ts.seconds, ts.ms)
            }
            Err(err) => format!("unreadable: {err}"),
        };
        writeln!(out, "rec {:>5}  addr {:>7}  len {:>5}  {summary}", e.rec, e.addr, e.len)?;
    }
    emit(&out)
}

/// Writes the report; a reader that stopped early is not an error.
fn emit(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

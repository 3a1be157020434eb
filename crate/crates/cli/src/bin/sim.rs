//! Simulator front end: scenario runs, the measurement setups, the power
//! cut campaign and the TCP bridge.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use badge_core::badge::BadgeConfig;
use badge_core::vmem::VirtualStorage;
use badge_sim::bridge::Bridge;
use badge_sim::experiments::{self, SyncExperiment, THROUGHPUT_CHUNKS};
use badge_sim::faults;
use badge_sim::golden;
use badge_sim::scenario::{PumpMode, Scenario, SyncSettings};
use badge_sim::World;

#[derive(Parser)]
#[command(name = "sim", about = "Deterministic badge simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Overrides the seed of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV and JSON metrics.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Directory for the final memory images (`badge-<id>.bin`).
    #[arg(long)]
    dump_mem: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Measures microphone transfer throughput for one pump mode.
    Throughput {
        #[arg(long, value_enum, default_value = "timer")]
        mode: Mode,
        #[arg(long, default_value_t = 6.0)]
        period_ms: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the long clock sync experiment.
    Sync {
        /// Averaging weight; 0 selects constant-slope mode.
        #[arg(long, default_value_t = 0.11)]
        alpha: f64,
        #[arg(long, default_value_t = 3.833)]
        fdev: f64,
        #[arg(long, default_value_t = 2.2)]
        drift_hz: f64,
        #[arg(long, default_value_t = experiments::SYNC_DURATION_S / 3600.0)]
        hours: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Cuts power in the middle of random stores and checks recovery.
    Faults {
        #[arg(long, default_value_t = 1000)]
        cuts: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Serves one badge over TCP on localhost.
    Bridge {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Memory image to serve; otherwise prerecorded microphone chunks.
        #[arg(long)]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = THROUGHPUT_CHUNKS)]
        chunks: usize,
    },
    /// Regenerates the golden fixtures and Python bindings.
    Golden {
        #[arg(long, default_value = "fixtures/golden")]
        out: PathBuf,
        #[arg(long, default_value = "bindings/python/protocol.py")]
        python: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Timer,
    Scheduler,
    Callback,
}

fn dump(dir: &Path, name: &str, storage: &VirtualStorage) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, storage.dump()).with_context(|| format!("writing {}", path.display()))?;
    println!("memory image {}", path.display());
    Ok(())
}

fn run(path: &Path, common: Common) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut scenario = Scenario::from_json(&text)?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    let outcome = World::new(scenario)?.run()?;
    let summary = &outcome.metrics.summary;
    println!(
        "{} events, {} badges, trace {}",
        summary.events,
        summary.badges.len(),
        summary.trace_digest
    );
    for b in &summary.badges {
        println!(
            "badge {}: {} syncs, MAE {}, {} B up, {} reboots",
            b.id,
            b.sync_count,
            b.sync_mae_ms.map_or("n/a".into(), |m| format!("{m:.2} ms")),
            b.bytes_up,
            b.reboots
        );
    }
    if let Some(dir) = &common.out_dir {
        outcome.metrics.write_to(dir)?;
        println!("metrics in {}", dir.display());
    }
    if let Some(dir) = &common.dump_mem {
        for badge in outcome.badges {
            let id = badge.id();
            dump(dir, &format!("badge-{id}.bin"), &badge.into_storage())?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { scenario, common } => run(&scenario, common)?,
        Command::Throughput { mode, period_ms, common } => {
            let mode = match mode {
                Mode::Timer => PumpMode::Timer { period_ms },
                Mode::Scheduler => PumpMode::scheduler_default(),
                Mode::Callback => PumpMode::Callback,
            };
            let image = experiments::prerecorded_mic_image(THROUGHPUT_CHUNKS);
            let scenario = experiments::throughput_scenario(mode, common.seed.unwrap_or(0));
            if let Some(dir) = &common.out_dir {
                let mut world = World::new(scenario.clone())?;
                world.set_storage(0, VirtualStorage::from_image(&image.dump())?)?;
                world.run()?.metrics.write_to(dir)?;
            }
            let r = experiments::measure_throughput_on(scenario, &image)?;
            println!(
                "{}: {} chunks, {} B in {:.3} s = {:.1} B/s (peak {} B/s, link ceiling {} B/s)",
                mode.name(),
                r.chunks,
                r.bytes,
                r.elapsed_s,
                r.bytes_per_s,
                r.max_bytes_per_s,
                r.ceiling_bytes_per_s
            );
            if let Some(dir) = &common.dump_mem {
                dump(dir, "badge-1.bin", &image)?;
            }
        }
        Command::Sync { alpha, fdev, drift_hz, hours, common } => {
            let settings = if alpha == 0.0 {
                SyncSettings::constant()
            } else {
                SyncSettings::ewma(alpha, fdev)
            };
            let exp = SyncExperiment {
                seed: common.seed.unwrap_or(1),
                drift_hz,
                settings,
                duration_s: hours * 3600.0,
                ..SyncExperiment::default()
            };
            if common.out_dir.is_some() || common.dump_mem.is_some() {
                let out = World::new(exp.scenario())?.run()?;
                if let Some(dir) = &common.out_dir {
                    out.metrics.write_to(dir)?;
                }
                if let Some(dir) = &common.dump_mem {
                    for badge in out.badges {
                        dump(dir, &format!("badge-{}.bin", badge.id()), &badge.into_storage())?;
                    }
                }
            }
            let r = exp.run()?;
            println!(
                "{} syncs: MAE {:.2} ms, max |error| {:.2} ms",
                r.errors.len(),
                r.mae_ms,
                r.max_abs_ms
            );
        }
        Command::Faults { cuts, common } => {
            let (report, storage) = faults::run_campaign_with_image(common.seed.unwrap_or(1), cuts);
            println!(
                "{} cuts over {} stores: {} phantom, {} lost, {} misordered, {} collateral, {} completed anyway",
                report.cuts,
                report.stores,
                report.phantoms,
                report.lost,
                report.order_violations,
                report.collateral_changes,
                report.completed_despite_cut
            );
            if let Some(dir) = &common.dump_mem {
                dump(dir, "campaign.bin", &storage)?;
            }
            if !report.is_clean() {
                bail!("recovery check failed");
            }
        }
        Command::Bridge { port, image, chunks } => {
            let storage = match image {
                Some(path) => VirtualStorage::from_image(&fs::read(&path)?)?,
                None => experiments::prerecorded_mic_image(chunks),
            };
            let mut bridge = Bridge::bind(("127.0.0.1", port), BadgeConfig::default(), storage)?;
            println!("badge bridge listening on {}", bridge.local_addr()?);
            bridge.serve_forever()?;
        }
        Command::Golden { out, python } => {
            golden::write_fixtures(&out)?;
            let bindings = tinybuf::emit_bindings(badge_core::badge::protocol_schema(), "python")?;
            fs::write(&python, bindings)?;
            println!("{} fixtures in {}, bindings in {}", golden::FIXTURE_COUNT, out.display(), python.display());
        }
    }
    Ok(())
}

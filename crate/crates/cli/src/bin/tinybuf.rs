//! Tinybuf schema compiler.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "tinybuf", about = "Compile tinybuf schemas into bindings or descriptors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a schema file into the output directory.
    Compile {
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "rust")]
        target: Target,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Rust,
    Python,
    /// JSON descriptor for the dynamic codec.
    Descriptor,
}

impl Target {
    fn extension(self) -> &'static str {
        match self {
            Target::Rust => "rs",
            Target::Python => "py",
            Target::Descriptor => "json",
        }
    }
}

fn compile(schema: &PathBuf, target: Target, out: &PathBuf) -> Result<Option<PathBuf>> {
    let text = fs::read_to_string(schema).with_context(|| format!("reading {}", schema.display()))?;
    let parsed = match tinybuf::parse_schema(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}:{e}", schema.display());
            return Ok(None);
        }
    };
    let output = match target {
        Target::Rust => tinybuf::emit_bindings(&parsed, "rust")?,
        Target::Python => tinybuf::emit_bindings(&parsed, "python")?,
        Target::Descriptor => tinybuf::emit_descriptor(&parsed),
    };
    let stem = schema.file_stem().and_then(|s| s.to_str()).unwrap_or("schema");
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(format!("{stem}.{}", target.extension()));
    fs::write(&path, output).with_context(|| format!("writing {}", path.display()))?;
    Ok(Some(path))
}

fn main() -> ExitCode {
    let Command::Compile { schema, target, out } = Cli::parse().command;
    match compile(&schema, target, &out) {
        Ok(Some(path)) => {
            println!("wrote {}", path.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

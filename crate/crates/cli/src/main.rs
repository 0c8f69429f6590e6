use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use isodesign_cli::figure::{self, FigureTag};
use isodesign_cli::{run, CliError, Mode, RawConfig, RunConfig, Status};

#[derive(Parser)]
#[command(name = "isodesign", version, about = "Isospectral design of 1D Schrödinger potentials")]
struct Cli {
    /// Root for output directories when --out is not given.
    #[arg(long, global = true, env = "ISODESIGN_OUT", default_value = "isodesign-out")]
    out_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a base system directly.
    Solve(Common),
    /// Run a transformation chain with an oracle check after every step.
    Design(Common),
    /// Zones of a periodic system, zone shifts and gap closure.
    Band(Common),
    /// Tight-binding lattice states.
    Lattice(Common),
    /// Emit the data behind one figure layout.
    Figure {
        tag: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        points: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    truncation: Option<f64>,
    /// Extra `key=value` settings, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn configured(common: Common, mode: Mode, root: PathBuf) -> Result<(RunConfig, PathBuf), CliError> {
    let mut raw = match &common.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        raw.apply(k.trim(), v.trim())?;
    }
    if let Some(p) = common.points {
        raw.set("points", p.to_string());
    }
    if let Some(t) = common.tol {
        raw.set("tol", t.to_string());
    }
    if let Some(l) = common.truncation {
        raw.set("truncation", l.to_string());
    }
    let cfg = RunConfig::resolve(raw, mode)?;
    let out = common
        .out
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| root.join(mode.name()));
    Ok((cfg, out))
}

fn execute(cli: Cli) -> Result<Status, CliError> {
    let (outcome, out) = match cli.command {
        Command::Figure { tag, out, points } => {
            let tag: FigureTag = tag.parse()?;
            let outcome = figure::emit(tag, points)?;
            (outcome, out.unwrap_or_else(|| cli.out_root.join(tag.name())))
        }
        command => {
            let (common, mode) = match command {
                Command::Solve(c) => (c, Mode::Solve),
                Command::Design(c) => (c, Mode::Design),
                Command::Band(c) => (c, Mode::Band),
                Command::Lattice(c) => (c, Mode::Lattice),
                Command::Figure { .. } => unreachable!(),
            };
            let (cfg, out) = configured(common, mode, cli.out_root)?;
            (run::run(&cfg)?, out)
        }
    };
    let manifest = outcome.write(&out)?;
    print!("{}", manifest.report());
    println!("output: {}", out.display());
    Ok(manifest.status)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geoproxy::evaluation::{format_r2, write_reports, Level};
use geoproxy::pipeline::{self, ModelKind, PipelineConfig};
use geoproxy::synth::{generate_world, WorldSpec};
use geoproxy::Error;

/// Village-scale living-standards measurement from satellite-style imagery.
#[derive(Debug, Parser)]
#[command(name = "geoproxy", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// JSON pipeline config; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed for every stochastic stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 gives the reference single-threaded run.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (the dataset directory for synth-gen).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset directory written by synth-gen.
    #[arg(long, global = true, value_name = "DIR")]
    data: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world dataset.
    SynthGen {
        /// World spec in key = value form; defaults apply when omitted.
        #[arg(long, value_name = "FILE")]
        spec: Option<PathBuf>,
    },
    /// Build cloud-free 224x224 tiles for every village of one round.
    Composite {
        /// Census year (2001, 2011) or round number (1, 2).
        #[arg(long)]
        year: String,
    },
    /// Derive village asset vectors and tehsil vectors from the census tables.
    BuildAssets,
    /// Train the direct asset model on 2011 tiles.
    Train,
    /// Train the nightlight baseline on 2011 tiles.
    TrainNightlight,
    /// Transfer a trained model to demographics and survey factors.
    Transfer {
        /// asset or nightlight; both when omitted.
        #[arg(long)]
        path: Option<String>,
    },
    /// Score 2001 predictions of a 2011 model under each alignment transform.
    TemporalEval {
        #[arg(long, default_value = "asset")]
        path: String,
    },
    /// Per-outcome R² of a prediction table against a truth table.
    Evaluate {
        /// Wide CSV of predictions keyed by its first column
        #[arg(long, value_name = "FILE")]
        pred: PathBuf,
        /// Wide CSV of true values with the same key column
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
        /// village, tehsil or district.
        #[arg(long, default_value = "village")]
        level: String,
        /// Path tag written into the report.
        #[arg(long, default_value = "")]
        tag: String,
    },
    /// Collect all reports into report/report.md with SVG charts.
    Report,
}

fn init_logging() -> Result<(), Error> {
    let level = match std::env::var("GEOPROXY_LOG").as_deref() {
        Err(_) | Ok("") | Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        Ok("warn") => log::LevelFilter::Warn,
        Ok(other) => return Err(Error::input(format!("GEOPROXY_LOG must be debug, info or warn, got '{other}'"))),
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp_millis()
        .target(env_logger::Target::Stderr)
        .init();
    Ok(())
}

fn resolve_config(global: &Global) -> Result<PipelineConfig, Error> {
    let mut cfg = match &global.config {
        Some(path) => PipelineConfig::read(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = Some(seed);
    }
    if let Some(threads) = global.threads {
        cfg.threads = Some(threads);
    }
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    if let Some(data) = &global.data {
        cfg.data = data.clone();
    }
    Ok(cfg)
}

fn set_threads(cfg: &PipelineConfig) -> Result<(), Error> {
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn synth_gen(global: &Global, cfg: &PipelineConfig, spec_path: Option<&PathBuf>) -> Result<(), Error> {
    let mut spec = match spec_path.or(cfg.world_spec.as_ref()) {
        Some(path) => WorldSpec::read(path)?,
        None => WorldSpec::default(),
    };
    if let Some(seed) = global.seed.or(cfg.seed) {
        spec.seed = seed;
    }
    let out = global.out.clone().unwrap_or_else(|| cfg.data.clone());
    generate_world(&spec, &out)?;
    println!("wrote {} villages to {}", spec.n_villages, out.display());
    Ok(())
}

fn parse_level(s: &str) -> Result<Level, Error> {
    match s {
        "village" => Ok(Level::Village),
        "tehsil" => Ok(Level::Tehsil),
        "district" => Ok(Level::District),
        _ => Err(Error::input(format!("unknown level '{s}'"))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let cfg = resolve_config(&cli.global)?;
    set_threads(&cfg)?;
    if !matches!(cli.command, Command::SynthGen { .. } | Command::Evaluate { .. }) {
        cfg.validate()?;
    }
    match cli.command {
        Command::SynthGen { spec } => synth_gen(&cli.global, &cfg, spec.as_ref())?,
        Command::Composite { year } => {
            let s = pipeline::composite(&cfg, pipeline::parse_round_year(&year)?)?;
            println!(
                "composited {} villages for {} ({} total gaps)",
                s.villages, s.year, s.total_gaps
            );
        }
        Command::BuildAssets => {
            let s = pipeline::build_assets(&cfg)?;
            println!("{} village asset vectors, {} rejected", s.villages, s.rejected_villages.len());
        }
        Command::Train | Command::TrainNightlight => {
            let s = if matches!(cli.command, Command::Train) {
                pipeline::train_asset_model(&cfg)?
            } else {
                pipeline::train_nightlight_model(&cfg)?
            };
            for r in &s.reports {
                println!("{}\t{}", r.outcome, format_r2(r.r2));
            }
        }
        Command::Transfer { path } => {
            let paths = match path {
                Some(p) => vec![ModelKind::parse(&p)?],
                None => ModelKind::ALL.to_vec(),
            };
            for p in paths {
                let s = pipeline::transfer(&cfg, p)?;
                for r in &s.demographics {
                    println!("{}\t{}\t{}", p.name(), r.outcome, format_r2(r.r2));
                }
            }
        }
        Command::TemporalEval { path } => {
            let report = pipeline::temporal(&cfg, ModelKind::parse(&path)?)?;
            for r in &report.rows {
                println!("{}\t{}\t{}", r.outcome, r.transform.name(), format_r2(r.r2));
            }
        }
        Command::Evaluate { pred, truth, level, tag } => {
            let reports = pipeline::evaluate_tables(&pred, &truth, parse_level(&level)?, &tag)?;
            std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
            write_reports(&cfg.out.join("evaluation.csv"), &reports)?;
            for r in &reports {
                println!("{}\t{}", r.outcome, format_r2(r.r2));
            }
        }
        Command::Report => println!("{}", pipeline::report(&cfg)?.display()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Err(e) = init_logging() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

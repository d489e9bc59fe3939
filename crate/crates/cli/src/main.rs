//! Command-line front end for the cell-free uplink simulator.
//!
//! Subcommands: `layout` (inspect one placement), `run` (full experiment),
//! `sweep` (parameter sweep), `srs-estimate` (sounding-stage quality dump),
//! `report` (summarize written outputs). Exit codes: 0 success, 1
//! configuration error (bad flags, unreadable or invalid config, output
//! hash mismatch), 2 runtime error (pipeline or IO failure).

use cellfree_core::config::{parse_config, parse_sweep, SimConfig};
use cellfree_core::evaluation::{mean_and_stderr, median};
use cellfree_core::experiment::{
    describe_layout, run_experiment, run_sweep, survey_srs, RateReport,
};
use cellfree_core::report::{
    emit_run, emit_sweep, read_run_summary, read_sweep_json, read_user_csv, OutputFormat,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "cellfree",
    version,
    about = "Uplink system-level simulator for user-centric cell-free massive MIMO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place one network layout, run the association, and dump it as JSON.
    Layout {
        #[command(flatten)]
        io: IoArgs,
        /// Layout index (selects the placement substream).
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Run the configured Monte-Carlo experiment and write the results.
    Run {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Expand a sweep spec, run every combination, and write the table.
    Sweep {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Run the sounding stage on one layout and dump per-edge subspace
    /// quality as JSON.
    SrsEstimate {
        #[command(flatten)]
        io: IoArgs,
        /// Layout index (selects the placement substream).
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Summarize previously written outputs in a directory.
    Report {
        /// Directory holding users.csv / summary.json / sweep.json.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Verify the outputs against this config's hash.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct IoArgs {
    /// TOML config file (sweep spec for `sweep`).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. The degree never changes output
    /// bytes.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
    /// Directory the outputs are written into.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Which output files to write.
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn parts(self) -> Vec<OutputFormat> {
        match self {
            Format::Csv => vec![OutputFormat::Csv],
            Format::Json => vec![OutputFormat::Json],
            Format::Both => vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

const EXIT_CONFIG: i32 = 1;
const EXIT_RUNTIME: i32 = 2;

struct Failure {
    code: i32,
    message: String,
}

fn config_err(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.to_string(),
    }
}

fn runtime_err(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.to_string(),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful outcomes; everything else is
            // a configuration problem.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(f) = dispatch(cli) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Layout { io, index } => cmd_layout(&io, index),
        Command::Run { io } => cmd_run(&io),
        Command::Sweep { io } => cmd_sweep(&io),
        Command::SrsEstimate { io, index } => cmd_srs_estimate(&io, index),
        Command::Report { out_dir, config } => cmd_report(&out_dir, config.as_deref()),
    }
}

fn read_config_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))
}

fn load_config(io: &IoArgs) -> Result<SimConfig, Failure> {
    let text = read_config_file(&io.config)?;
    let mut cfg = parse_config(&text).map_err(config_err)?;
    if let Some(seed) = io.seed {
        cfg.mc.seed = seed;
    }
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| runtime_err(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| runtime_err(format!("cannot serialize: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))
}

fn cmd_layout(io: &IoArgs, index: usize) -> Result<(), Failure> {
    let cfg = load_config(io)?;
    let description = describe_layout(&cfg, index).map_err(runtime_err)?;
    let path = io.out_dir.join("layout.json");
    write_json(&description, &path)?;
    println!(
        "layout {index}: {} RUs, {} UEs, outage fraction {:.4} -> {}",
        description.ru_positions.len(),
        description.ue_positions.len(),
        description.outage_fraction,
        path.display()
    );
    Ok(())
}

fn run_report(cfg: &SimConfig, parallel: usize) -> Result<RateReport, Failure> {
    let work = || run_experiment(cfg);
    if parallel > 0 {
        let pool = rayon_pool(parallel)?;
        pool.install(work).map_err(runtime_err)
    } else {
        work().map_err(runtime_err)
    }
}

fn rayon_pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err(format!("cannot build a {threads}-thread pool: {e}")))
}

fn cmd_run(io: &IoArgs) -> Result<(), Failure> {
    let cfg = load_config(io)?;
    let t0 = Instant::now();
    let report = run_report(&cfg, io.parallel)?;
    let elapsed = t0.elapsed();
    let mut written = Vec::new();
    for format in io.format.parts() {
        written.extend(emit_run(&report, format, &io.out_dir).map_err(runtime_err)?);
    }
    println!(
        "mean sum SE {:.4} ± {:.4} bit/s/Hz, outage fraction {:.4} ({} layouts × {} realizations, {:.1} s)",
        report.mean_sum_se_bps_hz,
        report.stderr_sum_se_bps_hz,
        report.outage_fraction,
        cfg.mc.n_layouts,
        cfg.mc.n_realizations,
        elapsed.as_secs_f64()
    );
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(io: &IoArgs) -> Result<(), Failure> {
    let text = read_config_file(&io.config)?;
    let mut spec = parse_sweep(&text).map_err(config_err)?;
    if let Some(seed) = io.seed {
        spec.base.mc.seed = seed;
    }
    let table = run_sweep(&spec, io.parallel).map_err(runtime_err)?;
    let mut written = Vec::new();
    for format in io.format.parts() {
        written.extend(emit_sweep(&table, format, &io.out_dir).map_err(runtime_err)?);
    }
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} rows ({} failed), best rows flagged per group {:?}",
        table.rows.len(),
        failed,
        table.group_by
    );
    for row in table.rows.iter().filter(|r| r.best_in_group) {
        let settings: Vec<String> = row
            .settings
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        println!(
            "  best: row {} [{}] sum SE {:.4} bit/s/Hz",
            row.index,
            settings.join(", "),
            row.sum_se_bps_hz.unwrap_or(f64::NAN)
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_srs_estimate(io: &IoArgs, index: usize) -> Result<(), Failure> {
    let cfg = load_config(io)?;
    let survey = survey_srs(&cfg, index).map_err(runtime_err)?;
    let path = io.out_dir.join("srs.json");
    write_json(&survey, &path)?;
    println!(
        "layout {index}: {} served edges, {} fallbacks, median power efficiency {} -> {}",
        survey.served_edges,
        survey.fallback_edges,
        survey
            .median_power_efficiency
            .map(|p| format!("{p:.4}"))
            .unwrap_or_else(|| "n/a".into()),
        path.display()
    );
    Ok(())
}

fn cmd_report(out_dir: &Path, config: Option<&Path>) -> Result<(), Failure> {
    let expected_hash = match config {
        None => None,
        Some(path) => {
            let text = read_config_file(path)?;
            // A sweep spec is also acceptable; hash whichever parses.
            let hash = parse_config(&text)
                .map(|c| c.hash())
                .or_else(|_| parse_sweep(&text).map(|s| s.hash()))
                .map_err(config_err)?;
            Some(hash)
        }
    };
    let check = |label: &str, found: &str| -> Result<(), Failure> {
        if let Some(expect) = &expected_hash {
            if expect != found {
                return Err(config_err(format!(
                    "{label} was produced by config {found}, not the given config {expect}"
                )));
            }
            println!("{label}: config hash verified ({found})");
        }
        Ok(())
    };

    let mut seen = false;
    let summary_path = out_dir.join("summary.json");
    if summary_path.exists() {
        seen = true;
        let summary = read_run_summary(&summary_path).map_err(runtime_err)?;
        check("summary.json", &summary.config_hash)?;
        println!(
            "run: mean sum SE {:.4} ± {:.4} bit/s/Hz over {} layouts, outage fraction {:.4}",
            summary.mean_sum_se_bps_hz,
            summary.stderr_sum_se_bps_hz,
            summary.n_layouts,
            summary.outage_fraction
        );
    }
    let users_path = out_dir.join("users.csv");
    if users_path.exists() {
        seen = true;
        let (hash, users) = read_user_csv(&users_path).map_err(runtime_err)?;
        check("users.csv", &hash)?;
        let se: Vec<f64> = users.iter().map(|u| u.se_bps_hz).collect();
        let (mean, stderr) = mean_and_stderr(&se).map_err(runtime_err)?;
        let med = median(&se).map_err(runtime_err)?;
        let outages = users.iter().filter(|u| u.outage).count();
        println!(
            "users: {} records, per-user SE mean {:.4} ± {:.4}, median {:.4} bit/s/Hz, {} outages",
            users.len(),
            mean,
            stderr,
            med,
            outages
        );
    }
    let sweep_path = out_dir.join("sweep.json");
    if sweep_path.exists() {
        seen = true;
        let table = read_sweep_json(&sweep_path).map_err(runtime_err)?;
        check("sweep.json", &table.spec_hash)?;
        println!("sweep: {} rows over {:?}", table.rows.len(), table.params);
        for row in table.rows.iter().filter(|r| r.best_in_group) {
            let settings: Vec<String> = row
                .settings
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect();
            println!(
                "  best: row {} [{}] sum SE {:.4} bit/s/Hz",
                row.index,
                settings.join(", "),
                row.sum_se_bps_hz.unwrap_or(f64::NAN)
            );
        }
    }
    if !seen {
        return Err(runtime_err(format!(
            "no outputs found in {}",
            out_dir.display()
        )));
    }
    Ok(())
}

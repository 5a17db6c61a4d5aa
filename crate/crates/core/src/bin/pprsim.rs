//! Command-line front end: `run` sweeps the experiment grid and writes a
//! CSV; `calibrate` searches per-SNR confidence thresholds and writes a
//! threshold-table file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relay_ppr::detect::DetectionMode;
use relay_ppr::harness::calibrate::{calibrate_thresholds, CalibrationGrid};
use relay_ppr::harness::config::{
    self, load_config_file, parse_f64_list, parse_scheme_list, parse_usize_list,
};
use relay_ppr::harness::csv::emit_csv;
use relay_ppr::harness::{run_experiment, SimConfig};
use relay_ppr::protocol::FadingModel;
use relay_ppr::Result;

#[derive(Parser)]
#[command(name = "pprsim", about = "Relay-assisted partial packet recovery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep and write results as CSV.
    Run(RunArgs),
    /// Search per-SNR confidence thresholds and write a threshold table.
    Calibrate(CalibrateArgs),
}

/// Options shared by both subcommands; flags override config-file values.
#[derive(Args)]
struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed for reproducible runs.
    #[arg(long)]
    seed: Option<u64>,

    /// Trials per grid point.
    #[arg(long)]
    trials: Option<usize>,

    /// Comma-separated SNR grid in dB.
    #[arg(long = "snr-db")]
    snr_db: Option<String>,

    /// Comma-separated relay-to-destination distances in meters.
    #[arg(long = "d-rd-m")]
    d_rd_m: Option<String>,

    /// Comma-separated retransmission caps.
    #[arg(long = "n-retx")]
    n_retx: Option<String>,

    /// Number of sources.
    #[arg(long)]
    k: Option<usize>,

    /// Number of relays.
    #[arg(long)]
    u: Option<usize>,

    /// Data bits per packet.
    #[arg(long = "l-data")]
    l_data: Option<usize>,

    /// Spreading factor.
    #[arg(long)]
    v: Option<usize>,

    /// Path-loss exponent.
    #[arg(long)]
    alpha: Option<f64>,

    /// Source-to-destination distance in meters.
    #[arg(long = "d-sd-m")]
    d_sd_m: Option<f64>,

    /// Source-to-relay distance in meters.
    #[arg(long = "d-sr-m")]
    d_sr_m: Option<f64>,

    /// Detector iterations.
    #[arg(long = "mud-iterations")]
    mud_iterations: Option<usize>,

    /// Largest relay frame delay in chips.
    #[arg(long = "max-delay-chips")]
    max_delay_chips: Option<usize>,

    /// Per-node transmit power.
    #[arg(long = "tx-power")]
    tx_power: Option<f64>,

    /// Force zero noise variance at every grid point.
    #[arg(long)]
    noiseless: bool,

    /// Fading model: rayleigh or unit.
    #[arg(long)]
    fading: Option<String>,

    /// Threshold-table file (lines of <snr_db>=<threshold>).
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,

    /// Schemes to sweep: idma_ppr, traditional_arq, or both.
    #[arg(long)]
    scheme: Option<String>,

    /// Detection mode: threshold or genie.
    #[arg(long)]
    detection: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Output threshold-table path.
    #[arg(long)]
    out: PathBuf,

    /// Smallest threshold on the search grid.
    #[arg(long = "t-min", default_value_t = 1e-8)]
    t_min: f64,

    /// Largest threshold on the search grid.
    #[arg(long = "t-max", default_value_t = 1e-3)]
    t_max: f64,

    /// Number of log-spaced grid points.
    #[arg(long = "t-points", default_value_t = 21)]
    t_points: usize,
}

fn build_config(common: &CommonArgs) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    if let Some(path) = &common.config {
        load_config_file(path, &mut cfg)?;
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    if let Some(list) = &common.snr_db {
        cfg.snr_db = parse_f64_list("snr-db", list)?;
    }
    if let Some(list) = &common.d_rd_m {
        cfg.d_rd_m = parse_f64_list("d-rd-m", list)?;
    }
    if let Some(list) = &common.n_retx {
        cfg.n_retx = parse_usize_list("n-retx", list)?;
    }
    if let Some(k) = common.k {
        cfg.num_sources = k;
    }
    if let Some(u) = common.u {
        cfg.num_relays = u;
    }
    if let Some(l) = common.l_data {
        cfg.l_data = l;
    }
    if let Some(v) = common.v {
        cfg.spreading_factor = v;
    }
    if let Some(alpha) = common.alpha {
        cfg.path_loss_alpha = alpha;
    }
    if let Some(d) = common.d_sd_m {
        cfg.d_sd_m = d;
    }
    if let Some(d) = common.d_sr_m {
        cfg.d_sr_m = d;
    }
    if let Some(n) = common.mud_iterations {
        cfg.mud_iterations = n;
    }
    if let Some(n) = common.max_delay_chips {
        cfg.max_delay_chips = n;
    }
    if let Some(p) = common.tx_power {
        cfg.tx_power = p;
    }
    if common.noiseless {
        cfg.noiseless = true;
    }
    if let Some(fading) = &common.fading {
        cfg.fading = fading.parse::<FadingModel>()?;
    }
    if let Some(path) = &common.thresholds {
        cfg.threshold_table = config::read_threshold_table_file(path)?;
    }
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<()> {
    let mut cfg = build_config(&args.common)?;
    if let Some(schemes) = &args.scheme {
        cfg.schemes = parse_scheme_list(schemes)?;
    }
    if let Some(detection) = &args.detection {
        cfg.detection = detection.parse::<DetectionMode>()?;
    }
    let rows = run_experiment(&cfg)?;
    emit_csv(&rows, &args.out)?;
    eprintln!(
        "wrote {} rows ({} schemes x {} SNRs x {} distances x {} retry caps) to {}",
        rows.len(),
        cfg.schemes.len(),
        cfg.snr_db.len(),
        cfg.d_rd_m.len(),
        cfg.n_retx.len(),
        args.out.display()
    );
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let cfg = build_config(&args.common)?;
    let grid = CalibrationGrid {
        t_min: args.t_min,
        t_max: args.t_max,
        points: args.t_points,
    };
    let (table, points) = calibrate_thresholds(&cfg, &grid)?;
    config::write_threshold_table_file(&args.out, &table)?;
    for p in &points {
        eprintln!(
            "snr {:>5} dB -> threshold {:.3e} (throughput {:.4})",
            p.snr_db, p.threshold, p.throughput
        );
    }
    eprintln!("wrote {} thresholds to {}", points.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Calibrate(args) => calibrate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ddmodem::modem::{iq, ModemConfig};
use ddmodem::QamConstellation;
use ddmodem_harness::config::{ExperimentConfig, ExperimentKind};
use ddmodem_harness::error::{HarnessError, HarnessResult};
use ddmodem_harness::{codec, report};

#[derive(Parser)]
#[command(name = "ddmodem", version, about = "Delay-Doppler modem experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file, or `-` for stdin.
    config: String,
    /// Result CSV; overrides `output_path`. Without either, the CSV goes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Run trials on one thread (results are identical either way).
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Bit/frame error rates: `ber_sweep` (default) or `mobility`.
    Ber(RunArgs),
    /// Condition-number histograms (`cond_hist`).
    Cond(RunArgs),
    /// Precoding SNR distributions (`precode_cdf`).
    Precode(RunArgs),
    /// Peak-to-average power (`papr`).
    Papr(RunArgs),
    /// Punctured-cell interference (`urllc`).
    Urllc(RunArgs),
    /// ASCII bits to raw little-endian f64 IQ.
    Modulate {
        config: String,
        #[arg(long)]
        bits: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Raw IQ back to ASCII bits (hard decisions, no channel).
    Demodulate {
        config: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Version, capabilities and the grid/derived-parameter table of a
    /// configuration (defaults when none is given).
    Info { config: Option<String> },
}

fn read_config(source: &str) -> HarnessResult<ExperimentConfig> {
    let text = if source == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(source).map_err(|e| HarnessError::Config(format!("cannot read {source}: {e}")))?
    };
    ExperimentConfig::from_json(&text)
}

fn run_experiment(args: &RunArgs, allowed: &[ExperimentKind]) -> HarnessResult<()> {
    let mut cfg = read_config(&args.config)?;
    match cfg.experiment {
        None => cfg.experiment = Some(allowed[0]),
        Some(k) if allowed.contains(&k) => {}
        Some(k) => {
            let want: Vec<_> = allowed.iter().map(|a| a.name()).collect();
            return Err(HarnessError::config("experiment", format!("{} does not match this subcommand (expected {})", k.name(), want.join(" or "))));
        }
    }
    if args.serial {
        cfg.parallel = false;
    }
    if let Some(o) = &args.output {
        cfg.output_path = Some(o.clone());
    }
    let start = Instant::now();
    let table = ddmodem_harness::run(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    match &cfg.output_path {
        Some(path) => {
            report::write_outputs(&table, &cfg, path, wall)?;
            eprintln!("wrote {} rows to {} in {wall:.2} s", table.rows().len(), path.display());
        }
        None => table.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}

fn modulate(config: &str, bits: &Path, output: &Path) -> HarnessResult<()> {
    let cfg = read_config(config)?;
    let text = std::fs::read_to_string(bits).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", bits.display())))?;
    let samples = codec::modulate_bits(&cfg, &codec::parse_bits(&text)?)?;
    iq::write_iq(std::fs::File::create(output)?, &samples)?;
    Ok(())
}

fn demodulate(config: &str, input: &Path, output: &Path) -> HarnessResult<()> {
    let cfg = read_config(config)?;
    let file = std::fs::File::open(input).map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", input.display())))?;
    let samples = iq::read_iq(std::io::BufReader::new(file)).map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::write(output, codec::format_bits(&codec::demodulate_iq(&cfg, &samples)?))?;
    Ok(())
}

fn info(config: Option<&str>) -> HarnessResult<()> {
    let cfg = match config {
        Some(c) => read_config(c)?,
        None => ExperimentConfig::default(),
    };
    let g = cfg.grid.grid()?;
    let cp = cfg.grid.cp_length;
    let modem = ModemConfig::new(g, cp, cfg.modem_mode, QamConstellation::new(cfg.constellation_order)?)?;
    println!("ddmodem {}", env!("CARGO_PKG_VERSION"));
    println!("core library {}", ddmodem::VERSION);
    println!("experiments: ber_sweep mobility cond_hist precode_cdf papr urllc");
    println!("modem modes: otfs_multicarrier otfs_zak_cp_free ofdm sc_fdma");
    println!("constellations: 4 16 64 256 (Gray-coded QAM)");
    println!("worker threads: {}", rayon::current_num_threads());
    println!();
    let rows: Vec<(&str, String)> = vec![
        ("experiment", cfg.experiment.map_or("(none)", |k| k.name()).to_string()),
        ("delay bins N", g.n_delay().to_string()),
        ("Doppler bins M", g.m_doppler().to_string()),
        ("subcarrier spacing", format!("{} Hz", g.subcarrier_spacing())),
        ("symbol duration", format!("{:.6e} s", g.symbol_duration())),
        ("delay resolution", format!("{:.6e} s", g.delay_resolution())),
        ("Doppler resolution", format!("{:.6e} Hz", g.doppler_resolution())),
        ("delay period", format!("{:.6e} s", g.delay_period())),
        ("Doppler period", format!("{:.6e} Hz", g.doppler_period())),
        ("sample rate", format!("{} Hz", g.sample_rate())),
        ("bandwidth", format!("{} Hz", g.bandwidth())),
        ("frame duration, no CP", format!("{:.6e} s", g.frame_duration())),
        ("frame duration with CP", format!("{:.6e} s", modem.signal_len() as f64 / g.sample_rate())),
        ("cyclic prefix", format!("{cp} samples ({:.6e} s)", cp as f64 / g.sample_rate())),
        ("CP efficiency", format!("{:.4}", modem.cp_efficiency())),
        ("samples per frame", modem.signal_len().to_string()),
        ("modem mode", serde_json::to_string(&cfg.modem_mode).expect("mode serializes").trim_matches('"').to_string()),
        ("bits per frame", codec::bits_per_frame(&cfg)?.to_string()),
        ("SNR points (dB)", cfg.snr_db.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")),
        ("trials", cfg.n_trials.to_string()),
        ("master seed", cfg.master_seed.to_string()),
        ("config hash", report::config_hash(&cfg)),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("{k:<width$}  {v}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ber(a) => run_experiment(a, &[ExperimentKind::BerSweep, ExperimentKind::Mobility]),
        Command::Cond(a) => run_experiment(a, &[ExperimentKind::CondHist]),
        Command::Precode(a) => run_experiment(a, &[ExperimentKind::PrecodeCdf]),
        Command::Papr(a) => run_experiment(a, &[ExperimentKind::Papr]),
        Command::Urllc(a) => run_experiment(a, &[ExperimentKind::Urllc]),
        Command::Modulate { config, bits, output } => modulate(config, bits, output),
        Command::Demodulate { config, input, output } => demodulate(config, input, output),
        Command::Info { config } => info(config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ddmodem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

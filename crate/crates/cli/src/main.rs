//! Command-line runner for the hybridbeam experiments.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hybridbeam::harness::figures::{beampattern, convergence, write_beampattern, write_convergence};
use hybridbeam::harness::{run_experiment, ExperimentConfig, Scheme, SweepAxis};

#[derive(Parser)]
#[command(name = "hybridbeam", version, about = "Hybrid and analog beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quiescent and nulled beam patterns plus nulling depths.
    Beampattern(CommonArgs),
    /// Monte Carlo sum-rate against SNR.
    SumrateSnr(CommonArgs),
    /// Monte Carlo sum-rate against antenna count.
    SumrateNbs(CommonArgs),
    /// Per-iteration objective traces on one instance.
    Convergence(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment file; the built-in preset is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Root seed; trial t uses seed + t.
    #[arg(long)]
    seed: Option<u64>,
    /// Trial count.
    #[arg(long)]
    trials: Option<usize>,
}

impl CommonArgs {
    fn load(&self, preset: fn() -> ExperimentConfig) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display()))?,
            None => preset(),
        };
        if let Some(seed) = self.seed {
            config.run.root_seed = seed;
        }
        if let Some(trials) = self.trials {
            config.run.trials = trials;
        }
        config.validate()?;
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(config)
    }
}

fn output_file(out: &Path, config: &ExperimentConfig, fallback: &str) -> PathBuf {
    let name = Path::new(&config.run.output_path)
        .file_name()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(fallback));
    out.join(name)
}

fn sumrate(args: &CommonArgs, preset: fn() -> ExperimentConfig, axis: SweepAxis) -> Result<bool> {
    let config = args.load(preset)?;
    if config.sweep.axis != axis {
        log::warn!("config sweeps {:?}, subcommand expects {:?}", config.sweep.axis, axis);
    }
    let result = run_experiment(&config)?;
    let path = output_file(&args.out, &config, "results.csv");
    result.write_csv_path(&path)?;
    for &v in &config.sweep.values {
        let means: Vec<String> = config
            .run
            .schemes
            .iter()
            .map(|&s| format!("{s}={:.4}", result.mean_sum_rate(s, v).unwrap_or(f64::NAN)))
            .collect();
        println!("{v}: {}", means.join(" "));
    }
    for f in result.failures() {
        log::error!("{f}");
    }
    println!("wrote {} rows to {}", result.rows().len(), path.display());
    Ok(result.failures().is_empty())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Beampattern(args) => {
            let config = args.load(ExperimentConfig::beampattern_preset)?;
            if !config.run.schemes.contains(&Scheme::Amm) {
                anyhow::bail!("beampattern requires the amm scheme");
            }
            let report = beampattern(&config)?;
            let files = write_beampattern(&report, &args.out)?;
            for d in &report.depths {
                println!(
                    "user {} {} range {} [{:.3}, {:.3}] deg: {:.2} dB",
                    d.user, d.beam, d.range_index, d.lo_deg, d.hi_deg, d.depth_db
                );
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
        Command::SumrateSnr(args) => sumrate(&args, ExperimentConfig::sumrate_snr_preset, SweepAxis::SnrDb),
        Command::SumrateNbs(args) => sumrate(&args, ExperimentConfig::sumrate_nbs_preset, SweepAxis::NBs),
        Command::Convergence(args) => {
            let config = args.load(ExperimentConfig::convergence_preset)?;
            let rows = convergence(&config)?;
            let path = output_file(&args.out, &config, "convergence.csv");
            let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_convergence(&rows, BufWriter::new(file))?;
            println!("wrote {} trace points to {}", rows.len(), path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

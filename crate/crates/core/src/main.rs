use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use csa_mimo::analysis::fig1_curve;
use csa_mimo::harness::{
    emit_analysis_csv, emit_csv, emit_singleton_csv, parse_ka_range, run_plr_sweep_with_workers,
    run_singleton_experiment, Settings, SingletonSpec,
};
use csa_mimo::sis::{ReceiverOptions, SnbGeneratorUpdate};
use csa_mimo::{Algorithm, DecodeCriterion, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    /// Packet loss rate over full frames.
    Plr,
    /// Single-slot singleton decoding failure.
    Singleton,
    /// Closed-form singleton failure curve.
    Analysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Criterion {
    Bit,
    Symbol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SnbGenerator {
    Measured,
    Skip,
}

/// Grant-free coded slotted ALOHA over a massive-MIMO uplink.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// TOML configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "plr")]
    experiment: Experiment,
    /// Comma-separated list of SNB, PAB, PRCE, LOGICAL.
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated active-user counts.
    #[arg(long)]
    ka: Option<String>,
    /// start:stop:step, stop inclusive.
    #[arg(long)]
    ka_range: Option<String>,
    /// Maximum frames per point (PLR).
    #[arg(long)]
    frames: Option<u64>,
    #[arg(long)]
    min_frames: Option<u64>,
    #[arg(long)]
    target_losses: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n_slots: Option<usize>,
    #[arg(long)]
    n_pilots: Option<usize>,
    #[arg(long)]
    n_d: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    latency_ms: Option<f64>,
    #[arg(long)]
    symbol_rate: Option<f64>,
    #[arg(long, value_enum)]
    decode_criterion: Option<Criterion>,
    /// SNB update in the slot where a user was decoded.
    #[arg(long, value_enum, default_value = "measured")]
    snb_generator: SnbGenerator,
    /// Users on the probed pilot (singleton, analysis).
    #[arg(long, default_value_t = 1)]
    a_pilot: usize,
    /// Slot populations start:stop:step (singleton, analysis).
    #[arg(long, default_value = "1:150:1")]
    a_total_range: String,
    /// Fraction of other-pilot users subtracted beforehand (singleton).
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    /// Trials per point (singleton).
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Write 0 for wall_seconds so repeated runs produce identical files.
    #[arg(long)]
    no_timing: bool,
    #[arg(long, default_value = "out.csv")]
    out: PathBuf,
}

impl Cli {
    fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        let ka_values = match (&self.ka, &self.ka_range) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("--ka and --ka-range are exclusive".into())),
            (Some(list), None) => Some(
                list.split(',')
                    .map(|s| s.trim().parse().map_err(|_| Error::InvalidConfig(format!("bad --ka entry '{s}'"))))
                    .collect::<Result<Vec<usize>>>()?,
            ),
            (None, Some(range)) => Some(parse_ka_range(range)?),
            (None, None) => None,
        };
        let algorithms = self
            .algorithm
            .as_deref()
            .map(|a| a.split(',').map(str::parse).collect::<Result<Vec<Algorithm>>>())
            .transpose()?;
        let flags = Settings {
            m: self.m,
            n_slots: self.n_slots,
            n_p: self.n_pilots,
            n_d: self.n_d,
            r: self.r,
            noise_var: self.noise_var,
            t: self.t,
            latency_ms: self.latency_ms,
            symbol_rate: self.symbol_rate,
            decode_criterion: self.decode_criterion.map(|c| match c {
                Criterion::Bit => DecodeCriterion::Bit,
                Criterion::Symbol => DecodeCriterion::Symbol,
            }),
            ka_values,
            algorithms,
            min_frames: self.min_frames,
            max_frames: self.frames,
            target_loss_events: self.target_losses,
            base_seed: self.seed,
            ..Settings::default()
        };
        let mut merged = file.overlay(flags);
        if let (Some(max), None) = (self.frames, merged.min_frames) {
            merged.min_frames = Some(max.min(100));
        }
        Ok(merged)
    }
}

fn run(cli: &Cli) -> Result<()> {
    let settings = cli.settings()?;
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    match cli.experiment {
        Experiment::Plr => {
            let mut spec = settings.sweep_spec()?;
            spec.record_timing = !cli.no_timing;
            spec.options = ReceiverOptions {
                snb_generator: match cli.snb_generator {
                    SnbGenerator::Measured => SnbGeneratorUpdate::MeasuredNorm,
                    SnbGenerator::Skip => SnbGeneratorUpdate::Skip,
                },
            };
            let records = run_plr_sweep_with_workers(&spec, workers)?;
            for r in &records {
                eprintln!(
                    "{:<8} ka={:<5} frames={:<6} lost={:<8} plr={:.3e} [{:.2e}, {:.2e}]",
                    r.algorithm, r.ka, r.frames_run, r.packets_lost, r.plr, r.ci_low, r.ci_high
                );
            }
            emit_csv(&records, &cli.out)
        }
        Experiment::Singleton => {
            let config = settings.system_config()?;
            let algorithms = settings.algorithms.clone().unwrap_or(vec![Algorithm::Snb]);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut records = Vec::new();
            for alg in algorithms {
                for a_total in parse_ka_range(&cli.a_total_range)?.into_iter().filter(|&a| a >= cli.a_pilot) {
                    let spec = SingletonSpec {
                        m: config.m,
                        n_p: config.n_p,
                        n_d: config.n_d,
                        t: config.t,
                        noise_var: config.noise_var,
                        a_pilot: cli.a_pilot,
                        a_total,
                        p: cli.p,
                        trials: cli.trials,
                        algorithm: alg,
                        criterion: config.decode_criterion,
                        seed: settings.base_seed.unwrap_or(1),
                        ..SingletonSpec::default()
                    };
                    let rec = pool.install(|| run_singleton_experiment(&spec))?;
                    eprintln!("{:<4} |A|={:<4} fail={:.4e}", rec.algorithm, rec.a_total, rec.fail_prob);
                    records.push(rec);
                }
            }
            emit_singleton_csv(&records, &cli.out)
        }
        Experiment::Analysis => {
            let config = settings.system_config()?;
            let range = parse_ka_range(&cli.a_total_range)?.into_iter().filter(|&a| a >= cli.a_pilot);
            let curve = fig1_curve(config.m, config.n_d, config.t, cli.a_pilot, range)?;
            emit_analysis_csv(&curve, &cli.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

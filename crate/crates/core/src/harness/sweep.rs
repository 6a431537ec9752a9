use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{wilson_interval, Z_95};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::frame::{generate_user_plans, FrameAssembler};
use crate::model::RandomStream;
use crate::sis::{
    initial_statistics, logical_peel, logical_peel_plans, Algorithm, DecodeReport, ReceiverOptions, ReceiverState,
};

/// A packet loss rate sweep over active-user counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Scenario template; `k_a` is overridden by every entry of `ka_values`.
    pub config: SystemConfig,
    pub ka_values: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub min_frames: u64,
    pub max_frames: u64,
    pub target_loss_events: u64,
    pub base_seed: u64,
    /// Frames simulated between two checks of the stopping rule. The rule is
    /// only evaluated at batch boundaries, so results do not depend on the
    /// number of workers.
    pub batch_frames: u64,
    /// Write measured wall time; when false `wall_seconds` is 0 and the
    /// output is bit-reproducible.
    pub record_timing: bool,
    pub options: ReceiverOptions,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            config: SystemConfig::default(),
            ka_values: vec![800],
            algorithms: vec![Algorithm::Pab],
            min_frames: 100,
            max_frames: 10_000,
            target_loss_events: 100,
            base_seed: 1,
            batch_frames: 8,
            record_timing: true,
            options: ReceiverOptions::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.min_frames == 0 {
            return Err(Error::InvalidConfig("min_frames must be at least 1".into()));
        }
        if self.max_frames < self.min_frames {
            return Err(Error::InvalidConfig(format!(
                "max_frames {} below min_frames {}",
                self.max_frames, self.min_frames
            )));
        }
        if self.target_loss_events == 0 {
            return Err(Error::InvalidConfig("target_loss_events must be at least 1".into()));
        }
        if self.batch_frames == 0 {
            return Err(Error::InvalidConfig("batch_frames must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithm selected".into()));
        }
        if self.ka_values.iter().any(|&k| k as u64 > u32::MAX as u64) {
            return Err(Error::InvalidConfig("k_a too large".into()));
        }
        Ok(())
    }
}

/// Packet loss rate estimate at one (algorithm, K_a) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlrRecord {
    pub algorithm: Algorithm,
    pub mac: String,
    pub ka: usize,
    pub frames_run: u64,
    pub packets_sent: u64,
    pub packets_lost: u64,
    pub plr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_n_up: f64,
    pub mean_n_pa: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    frames: u64,
    lost: u64,
    n_up: u64,
    n_pa: u64,
    seconds: f64,
    done: bool,
}

struct FrameOutcome {
    reports: Vec<(Algorithm, DecodeReport, f64)>,
}

fn simulate_frame(
    config: &SystemConfig,
    assembler: &FrameAssembler,
    stream: RandomStream,
    algorithms: &[Algorithm],
    options: ReceiverOptions,
) -> Result<FrameOutcome> {
    let start = Instant::now();
    let mut rng = stream.rng();
    let plans = generate_user_plans(config, &mut rng)?;
    let mut reports = Vec::with_capacity(algorithms.len());
    if algorithms.iter().any(|a| a.needs_signals()) {
        let frame = assembler.assemble(plans, &mut rng)?;
        let stats = initial_statistics(&frame)?;
        let shared = start.elapsed().as_secs_f64();
        for &alg in algorithms {
            let t0 = Instant::now();
            let rep = if alg == Algorithm::Logical {
                logical_peel(&frame)
            } else {
                let mut state = ReceiverState::from_statistics(&frame, stats.clone()).with_options(options);
                state.run(alg)?;
                state.report()
            };
            reports.push((alg, rep, shared + t0.elapsed().as_secs_f64()));
        }
    } else {
        let shared = start.elapsed().as_secs_f64();
        for &alg in algorithms {
            let t0 = Instant::now();
            let rep = logical_peel_plans(&plans, config.n_slots, config.n_p);
            reports.push((alg, rep, shared + t0.elapsed().as_secs_f64()));
        }
    }
    Ok(FrameOutcome { reports })
}

/// Runs the sweep on the current rayon pool.
///
/// Frame `i` at `K_a` always uses the stream `(base_seed, K_a, i)`, so all
/// algorithms of one sweep see the same frames.
pub fn run_plr_sweep(spec: &SweepSpec) -> Result<Vec<PlrRecord>> {
    spec.validate()?;
    let mut algorithms = spec.algorithms.clone();
    algorithms.dedup();
    let mut records = Vec::new();
    for &ka in &spec.ka_values {
        let config = spec.config.with_k_a(ka);
        let assembler = FrameAssembler::new(&config)?;
        let mut tallies = vec![Tally::default(); algorithms.len()];
        let mut next = 0u64;
        while tallies.iter().any(|t| !t.done) {
            let running: Vec<Algorithm> =
                algorithms.iter().zip(&tallies).filter(|(_, t)| !t.done).map(|(a, _)| *a).collect();
            let end = (next + spec.batch_frames).min(spec.max_frames);
            let outcomes = (next..end)
                .into_par_iter()
                .map(|i| {
                    simulate_frame(
                        &config,
                        &assembler,
                        RandomStream::for_frame(spec.base_seed, ka, i),
                        &running,
                        spec.options,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            for outcome in &outcomes {
                for (alg, rep, secs) in &outcome.reports {
                    let idx = algorithms.iter().position(|a| a == alg).expect("running subset");
                    let t = &mut tallies[idx];
                    t.frames += 1;
                    t.lost += rep.lost_count as u64;
                    t.n_up += rep.n_up as u64;
                    t.n_pa += rep.n_pa as u64;
                    t.seconds += secs;
                }
            }
            next = end;
            for t in tallies.iter_mut().filter(|t| !t.done) {
                t.done =
                    t.frames >= spec.max_frames || (t.frames >= spec.min_frames && t.lost >= spec.target_loss_events);
            }
        }
        for (alg, t) in algorithms.iter().zip(&tallies) {
            let sent = t.frames * ka as u64;
            let (ci_low, ci_high) = wilson_interval(t.lost, sent, Z_95);
            records.push(PlrRecord {
                algorithm: *alg,
                mac: "baseline".into(),
                ka,
                frames_run: t.frames,
                packets_sent: sent,
                packets_lost: t.lost,
                plr: if sent == 0 { 0.0 } else { t.lost as f64 / sent as f64 },
                ci_low,
                ci_high,
                mean_n_up: t.n_up as f64 / t.frames as f64,
                mean_n_pa: t.n_pa as f64 / t.frames as f64,
                wall_seconds: if spec.record_timing { t.seconds } else { 0.0 },
            });
        }
    }
    // algorithm-major, in the order requested
    records.sort_by_key(|r| algorithms.iter().position(|a| *a == r.algorithm));
    Ok(records)
}

/// Runs the sweep on a dedicated pool of `workers` threads.
pub fn run_plr_sweep_with_workers(spec: &SweepSpec, workers: usize) -> Result<Vec<PlrRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_plr_sweep(spec))
}

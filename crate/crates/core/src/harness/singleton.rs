//! Single-slot experiment: one probed user on pilot 0 shares it with
//! `a_pilot - 1` users decoded elsewhere, and `a_total - a_pilot` users sit
//! on the other pilots. The pilot-sharers are subtracted with the chosen
//! algorithm and the probed user's decode is attempted.

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{wilson_interval, Z_95};
use crate::config::{DecodeCriterion, SystemConfig};
use crate::error::{Error, Result};
use crate::frame::{FrameAssembler, UserPlan};
use crate::model::{draw_channel_vector, draw_complex_gaussian, qpsk_modulate, RandomStream, SimRng, C64};
use crate::receiver::{
    compute_combining_statistics, estimate_pilot_channel, genie_bounded_distance_decode, mrc_payload_estimate,
    no_estimate_threshold,
};
use crate::sis::{pab_channel_estimate, subtract_contribution, Algorithm};

/// How the slot is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlotModel {
    /// `Projected` for SNB, `Full` otherwise.
    #[default]
    Auto,
    /// The received matrices `P` and `Y` are built and processed in full.
    Full,
    /// SNB only: the probed pilot's `phi`, `f`, `g` are drawn from their
    /// exact joint law without forming `P` and `Y`. The pilot noise
    /// `Z_p s^T / N_P` is CN(0, sigma^2 / N_P) per antenna and, given `phi`,
    /// `phi^H Z` is CN(0, sigma^2 ||phi||^2) per symbol.
    Projected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingletonSpec {
    pub m: usize,
    pub n_p: usize,
    pub n_d: usize,
    pub t: usize,
    pub noise_var: f64,
    pub a_pilot: usize,
    pub a_total: usize,
    /// Fraction of the other-pilot users already subtracted (PAB replica mode).
    pub p: f64,
    pub trials: u64,
    pub algorithm: Algorithm,
    pub criterion: DecodeCriterion,
    pub seed: u64,
    pub model: SlotModel,
}

impl Default for SingletonSpec {
    fn default() -> Self {
        let c = SystemConfig::default();
        Self {
            m: c.m,
            n_p: c.n_p,
            n_d: c.n_d,
            t: c.t,
            noise_var: c.noise_var,
            a_pilot: 1,
            a_total: 1,
            p: 0.0,
            trials: 10_000,
            algorithm: Algorithm::Snb,
            criterion: DecodeCriterion::Bit,
            seed: 1,
            model: SlotModel::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletonRecord {
    pub algorithm: Algorithm,
    pub a_total: usize,
    pub a_pilot: usize,
    pub p: f64,
    pub trials: u64,
    pub failures: u64,
    pub fail_prob: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SingletonSpec {
    fn validate(&self) -> Result<SlotModel> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidParameter(format!("p must lie in [0, 1], got {}", self.p)));
        }
        if self.a_pilot == 0 || self.a_total < self.a_pilot {
            return Err(Error::InvalidParameter(format!(
                "need a_total >= a_pilot >= 1, got {} and {}",
                self.a_total, self.a_pilot
            )));
        }
        if self.n_p < 2 && self.a_total > self.a_pilot {
            return Err(Error::InvalidParameter("other-pilot users need at least two pilots".into()));
        }
        let model = match (self.model, self.algorithm) {
            (_, Algorithm::Prce | Algorithm::Logical) => {
                return Err(Error::InvalidParameter("singleton experiment supports SNB and PAB".into()))
            }
            (SlotModel::Projected, Algorithm::Pab) => {
                return Err(Error::InvalidParameter("the projected slot model only supports SNB".into()))
            }
            (SlotModel::Auto, Algorithm::Snb) => SlotModel::Projected,
            (SlotModel::Auto, _) => SlotModel::Full,
            (m, _) => m,
        };
        self.config().validate()?;
        Ok(model)
    }

    fn config(&self) -> SystemConfig {
        SystemConfig {
            k_a: self.a_total,
            m: self.m,
            n_slots: 1,
            n_p: self.n_p,
            n_d: self.n_d,
            r: 1,
            noise_var: self.noise_var,
            t: self.t,
            decode_criterion: self.criterion,
            ..SystemConfig::default()
        }
    }

    /// Number of other-pilot users subtracted before the probe.
    pub fn presubtracted(&self) -> usize {
        ((self.a_total - self.a_pilot) as f64 * self.p).round() as usize
    }

    fn stream(&self, trial: u64) -> RandomStream {
        let id = ((self.a_pilot as u64) << 56) ^ ((self.a_total as u64) << 36) ^ trial;
        RandomStream::new(self.seed, id)
    }
}

fn random_bits(rng: &mut SimRng, n_d: usize) -> Vec<bool> {
    (0..2 * n_d).map(|_| rng.random()).collect()
}

/// Users `0..a_pilot` on pilot 0, the rest uniformly on pilots `1..n_p`.
fn singleton_plans(spec: &SingletonSpec, rng: &mut SimRng) -> Result<Vec<UserPlan>> {
    (0..spec.a_total)
        .map(|u| {
            let pilot = if u < spec.a_pilot { 0 } else { rng.random_range(1..spec.n_p) };
            let payload_bits = random_bits(rng, spec.n_d);
            Ok(UserPlan {
                user_id: u,
                slot_indices: vec![0],
                pilot_choice: vec![pilot],
                payload: qpsk_modulate(&payload_bits)?,
                payload_bits,
            })
        })
        .collect()
}

fn snb_remove_sharers(spec: &SingletonSpec, f: &mut Array1<C64>, g: &mut f64, payloads: &[Vec<C64>]) {
    let norm = spec.m as f64;
    for x in payloads.iter().take(spec.a_pilot).skip(1) {
        for (fv, xv) in f.iter_mut().zip(x) {
            *fv -= xv * norm;
        }
        *g -= norm;
    }
}

fn full_trial(spec: &SingletonSpec, assembler: &FrameAssembler, rng: &mut SimRng) -> Result<bool> {
    let plans = singleton_plans(spec, rng)?;
    let frame = assembler.assemble(plans, rng)?;
    let mut slot = frame.slots.into_iter().next().expect("one slot");
    let pilots = &frame.pilots;
    if spec.algorithm == Algorithm::Pab {
        let order = (spec.a_pilot..spec.a_pilot + spec.presubtracted()).chain(1..spec.a_pilot);
        for u in order {
            let plan = &frame.plans[u];
            let h = pab_channel_estimate(&slot.y, plan.payload.symbols())?;
            subtract_contribution(&mut slot, pilots, plan.pilot_choice[0], h.view(), plan.payload.symbols());
        }
    }
    // SNB only edits the statistics of the subtracted users' own pilots, so
    // the other-pilot users never reach pilot 0.
    let phi = estimate_pilot_channel(&slot.p, pilots, 0);
    let (mut f, mut g) = compute_combining_statistics(phi.view(), &slot.y);
    if spec.algorithm == Algorithm::Snb {
        let payloads: Vec<Vec<C64>> = frame.plans.iter().map(|p| p.payload.0.clone()).collect();
        snb_remove_sharers(spec, &mut f, &mut g, &payloads);
    }
    decide(spec, f, g, &frame.plans[0].payload_bits)
}

fn projected_trial(spec: &SingletonSpec, rng: &mut SimRng) -> Result<bool> {
    let mut channels = Vec::with_capacity(spec.a_total);
    let mut payloads = Vec::with_capacity(spec.a_total);
    let mut bits0 = Vec::new();
    for u in 0..spec.a_total {
        let bits = random_bits(rng, spec.n_d);
        payloads.push(qpsk_modulate(&bits)?.0);
        if u == 0 {
            bits0 = bits;
        }
        channels.push(draw_channel_vector(rng, spec.m, 1.0)?.0);
    }
    let pilot_noise = spec.noise_var / spec.n_p as f64;
    let mut phi = Array1::from_shape_simple_fn(spec.m, || {
        if pilot_noise > 0.0 {
            draw_complex_gaussian(rng, pilot_noise)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    for h in channels.iter().take(spec.a_pilot) {
        phi += h;
    }
    let mut g: f64 = phi.iter().map(|c| c.norm_sqr()).sum();
    let mut f = Array1::<C64>::zeros(spec.n_d);
    for (h, x) in channels.iter().zip(&payloads) {
        let c: C64 = phi.iter().zip(h.iter()).map(|(a, b)| a.conj() * b).sum();
        for (fv, xv) in f.iter_mut().zip(x) {
            *fv += c * xv;
        }
    }
    if spec.noise_var > 0.0 {
        let var = spec.noise_var * g;
        for fv in f.iter_mut() {
            *fv += draw_complex_gaussian(rng, var);
        }
    }
    snb_remove_sharers(spec, &mut f, &mut g, &payloads);
    decide(spec, f, g, &bits0)
}

/// True when the probed user fails to decode.
fn decide(spec: &SingletonSpec, f: Array1<C64>, g: f64, truth: &[bool]) -> Result<bool> {
    match mrc_payload_estimate(f.view(), g, no_estimate_threshold(spec.m)) {
        None => Ok(true),
        Some(x_hat) => {
            Ok(!genie_bounded_distance_decode(x_hat.as_slice().expect("contiguous"), truth, spec.t, spec.criterion)?)
        }
    }
}

/// Empirical failure probability of the probed singleton user.
///
/// Trial `i` draws from its own stream, which does not depend on `p`, so
/// runs differing only in `p` see the same channels and payloads.
pub fn run_singleton_experiment(spec: &SingletonSpec) -> Result<SingletonRecord> {
    let model = spec.validate()?;
    let assembler = FrameAssembler::new(&spec.config())?;
    let failures = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = spec.stream(i).rng();
            let failed = match model {
                SlotModel::Projected => projected_trial(spec, &mut rng)?,
                _ => full_trial(spec, &assembler, &mut rng)?,
            };
            Ok(failed as u64)
        })
        .sum::<Result<u64>>()?;
    let (ci_low, ci_high) = wilson_interval(failures, spec.trials, Z_95);
    Ok(SingletonRecord {
        algorithm: spec.algorithm,
        a_total: spec.a_total,
        a_pilot: spec.a_pilot,
        p: spec.p,
        trials: spec.trials,
        failures,
        fail_prob: if spec.trials == 0 { 0.0 } else { failures as f64 / spec.trials as f64 },
        ci_low,
        ci_high,
    })
}

//! Iterative successive interference subtraction over a frame.
//!
//! Four receivers share one sweep loop: slots ascending, pilots ascending,
//! and every fresh decode is subtracted right away from the generator slot
//! and from all replica slots of the decoded user.
//!
//! * SNB edits only the combining statistics `f_j`, `g_j` of the decoded
//!   user's pilot, assuming `||h||^2 = M` in replica slots.
//! * PAB subtracts the full contribution from `P` and `Y`, with the pilot
//!   estimate `phi_j` in the generator slot and a payload-aided channel
//!   estimate in replica slots.
//! * PRCE is PAB with the true channels.
//! * LOGICAL peels the collision graph and needs no signals at all.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::frame::{resource_occupancy, FrameInstance, UserPlan};
use crate::model::{PilotSet, C64};
use crate::receiver::{
    fwht, genie_bounded_distance_decode, mrc_payload_estimate, no_estimate_threshold, SlotSignal, SlotStatistics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Snb,
    Pab,
    Prce,
    Logical,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Snb, Algorithm::Pab, Algorithm::Prce, Algorithm::Logical];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Snb => "SNB",
            Self::Pab => "PAB",
            Self::Prce => "PRCE",
            Self::Logical => "LOGICAL",
        }
    }

    /// Whether the receiver works on the received signals.
    pub fn needs_signals(self) -> bool {
        self != Self::Logical
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "SNB" => Ok(Self::Snb),
            "PAB" => Ok(Self::Pab),
            "PRCE" => Ok(Self::Prce),
            "LOGICAL" | "LOGIC" => Ok(Self::Logical),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl serde::Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Slot in which a subtraction happens, relative to where the user was decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubtractionMode {
    /// The slot where the user was decoded.
    Generator,
    /// Any other slot carrying a replica of the user.
    Replica,
}

/// What SNB does in the generator slot of a decoded user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnbGeneratorUpdate {
    /// Subtract with `||h||^2 := g_j` as measured when the user was decoded.
    #[default]
    MeasuredNorm,
    /// Leave the generator slot statistics alone.
    Skip,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReceiverOptions {
    pub snb_generator: SnbGeneratorUpdate,
}

/// Outcome of running one receiver over one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeReport {
    pub decoded_count: usize,
    pub lost_count: usize,
    /// Per-user decode flags.
    pub decoded: Vec<bool>,
    pub sweep_count: usize,
    /// Subtractions in generator slots.
    pub n_up: usize,
    /// Subtractions in replica slots.
    pub n_pa: usize,
}

impl DecodeReport {
    fn new(decoded: Vec<bool>, sweep_count: usize, n_up: usize, n_pa: usize) -> Self {
        let decoded_count = decoded.iter().filter(|&&d| d).count();
        Self { decoded_count, lost_count: decoded.len() - decoded_count, decoded, sweep_count, n_up, n_pa }
    }
}

/// Runs `algorithm` on `frame` with default options.
pub fn run_receiver(frame: &FrameInstance, algorithm: Algorithm) -> Result<DecodeReport> {
    run_receiver_with(frame, algorithm, ReceiverOptions::default())
}

pub fn run_receiver_with(
    frame: &FrameInstance,
    algorithm: Algorithm,
    options: ReceiverOptions,
) -> Result<DecodeReport> {
    Ok(run_receivers(frame, &[algorithm], options)?.remove(0))
}

/// Runs every algorithm in `algorithms` on the same frame, computing the
/// initial slot statistics once.
pub fn run_receivers(
    frame: &FrameInstance,
    algorithms: &[Algorithm],
    options: ReceiverOptions,
) -> Result<Vec<DecodeReport>> {
    let needs_stats = algorithms.iter().any(|a| a.needs_signals());
    let stats = if needs_stats { initial_statistics(frame)? } else { Vec::new() };
    algorithms
        .iter()
        .map(|&alg| {
            if alg == Algorithm::Logical {
                return Ok(logical_peel(frame));
            }
            let mut state = ReceiverState::from_statistics(frame, stats.clone()).with_options(options);
            state.run(alg)?;
            Ok(state.report())
        })
        .collect()
}

/// Logical peeling on the collision structure of `frame`.
pub fn logical_peel(frame: &FrameInstance) -> DecodeReport {
    logical_peel_plans(&frame.plans, frame.config.n_slots, frame.config.n_p)
}

/// Any (slot, pilot) resource holding exactly one undecoded user decodes it,
/// and a decoded user disappears from all its resources.
pub fn logical_peel_plans(plans: &[UserPlan], n_slots: usize, n_p: usize) -> DecodeReport {
    let occupancy = resource_occupancy(plans, n_slots, n_p);
    let mut remaining: Vec<Vec<usize>> = occupancy.iter().map(|slot| slot.iter().map(Vec::len).collect()).collect();
    let mut decoded = vec![false; plans.len()];
    let mut left = plans.len();
    let (mut sweeps, mut n_up, mut n_pa) = (0, 0, 0);
    while left > 0 {
        sweeps += 1;
        let mut progress = false;
        for slot in 0..n_slots {
            for pilot in 0..n_p {
                if remaining[slot][pilot] != 1 {
                    continue;
                }
                let user = occupancy[slot][pilot]
                    .iter()
                    .copied()
                    .find(|&u| !decoded[u])
                    .expect("count matches undecoded users");
                decoded[user] = true;
                left -= 1;
                progress = true;
                for (s, p) in plans[user].replicas() {
                    remaining[s][p] -= 1;
                    if s == slot {
                        n_up += 1;
                    } else {
                        n_pa += 1;
                    }
                }
            }
        }
        if !progress {
            break;
        }
    }
    DecodeReport::new(decoded, sweeps, n_up, n_pa)
}

/// Payload-aided channel estimate `Y x^H / ||x||^2` from the residual `y`.
pub fn pab_channel_estimate(y: &ndarray::Array2<C64>, payload: &[C64]) -> Result<Array1<C64>> {
    if y.ncols() != payload.len() {
        return Err(Error::InvalidInput(format!("payload of {} symbols against {} columns", payload.len(), y.ncols())));
    }
    let energy: f64 = payload.iter().map(|c| c.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(Error::InvalidInput("payload has zero energy".into()));
    }
    let inv = 1.0 / energy;
    Ok(Array1::from_iter(y.rows().into_iter().map(|row| {
        let acc: C64 = row.iter().zip(payload).map(|(a, b)| a * b.conj()).sum();
        acc * inv
    })))
}

/// Removes `h s_j` from `P` and `h x` from `Y`.
pub fn subtract_contribution(
    slot: &mut SlotSignal,
    pilots: &PilotSet,
    pilot: usize,
    h: ArrayView1<'_, C64>,
    payload: &[C64],
) {
    let h = h.to_vec();
    subtract_pilot(&mut slot.p, pilots, pilot, &h);
    subtract_payload(&mut slot.y, &h, payload);
}

fn subtract_pilot(p: &mut ndarray::Array2<C64>, pilots: &PilotSet, pilot: usize, h: &[C64]) {
    let s = pilots.row(pilot);
    let s = s.as_slice().expect("pilot rows are contiguous");
    let p = p.as_slice_mut().expect("signals are in standard layout");
    for (row, hm) in p.chunks_exact_mut(s.len()).zip(h.iter()) {
        for (v, &sv) in row.iter_mut().zip(s) {
            *v -= hm * sv;
        }
    }
}

/// A queued full-contribution subtraction; `channel: None` asks for the
/// payload-aided estimate from the residual at the time it is applied.
/// Generator-slot subtractions update the statistics right away
/// (`stats_done`) and only leave the signal update for later.
#[derive(Debug, Clone)]
struct Pending {
    user: usize,
    pilot: usize,
    channel: Option<Array1<C64>>,
    stats_done: bool,
}

/// Working state of one receiver on one frame.
///
/// SNB edits only `stats`; PAB and PRCE edit the residual signals and keep
/// `stats` consistent with them.
#[derive(Debug, Clone)]
pub struct ReceiverState<'a> {
    frame: &'a FrameInstance,
    options: ReceiverOptions,
    residual: Cow<'a, [SlotSignal]>,
    stats: Vec<SlotStatistics>,
    occupancy: Vec<Vec<Vec<usize>>>,
    decoded: Vec<bool>,
    subtracted: Vec<Vec<bool>>,
    // resources whose statistics changed since their last decode attempt
    dirty: Vec<Vec<bool>>,
    // full-contribution subtractions waiting for their slot to be visited
    pending: Vec<Vec<Pending>>,
    threshold: f64,
    n_up: usize,
    n_pa: usize,
    sweep_count: usize,
}

/// Statistics of every slot of the untouched frame.
pub fn initial_statistics(frame: &FrameInstance) -> Result<Vec<SlotStatistics>> {
    frame.slots.iter().map(|s| SlotStatistics::compute(s, &frame.pilots)).collect()
}

impl<'a> ReceiverState<'a> {
    pub fn new(frame: &'a FrameInstance) -> Result<Self> {
        Ok(Self::from_statistics(frame, initial_statistics(frame)?))
    }

    /// Starts from precomputed [`initial_statistics`], so several receivers
    /// can share one computation.
    pub fn from_statistics(frame: &'a FrameInstance, stats: Vec<SlotStatistics>) -> Self {
        let cfg = &frame.config;
        Self {
            frame,
            options: ReceiverOptions::default(),
            residual: Cow::Borrowed(&frame.slots),
            stats,
            occupancy: frame.occupancy(),
            decoded: vec![false; frame.plans.len()],
            subtracted: frame.plans.iter().map(|p| vec![false; p.slot_indices.len()]).collect(),
            dirty: vec![vec![true; cfg.n_p]; cfg.n_slots],
            pending: vec![Vec::new(); cfg.n_slots],
            threshold: no_estimate_threshold(cfg.m),
            n_up: 0,
            n_pa: 0,
            sweep_count: 0,
        }
    }

    pub fn with_options(mut self, options: ReceiverOptions) -> Self {
        self.options = options;
        self
    }

    /// Residual signals with every queued subtraction applied.
    pub fn residual(&mut self) -> &[SlotSignal] {
        self.settle();
        &self.residual
    }

    /// Slot statistics with every queued subtraction applied.
    pub fn stats(&mut self) -> &[SlotStatistics] {
        self.settle();
        &self.stats
    }

    fn settle(&mut self) {
        (0..self.frame.config.n_slots).for_each(|slot| self.flush(slot));
    }

    pub fn decoded(&self) -> &[bool] {
        &self.decoded
    }

    pub fn counters(&self) -> (usize, usize) {
        (self.n_up, self.n_pa)
    }

    pub fn report(&self) -> DecodeReport {
        DecodeReport::new(self.decoded.clone(), self.sweep_count, self.n_up, self.n_pa)
    }

    /// Marks `user` as decoded without touching any signal.
    pub fn mark_decoded(&mut self, user: usize) {
        self.decoded[user] = true;
    }

    /// Sweeps until a sweep decodes nobody new or every user is decoded.
    pub fn run(&mut self, algorithm: Algorithm) -> Result<()> {
        while self.decoded.iter().any(|&d| !d) {
            if self.sweep(algorithm)? == 0 {
                break;
            }
        }
        self.settle();
        Ok(())
    }

    /// One pass over all slots and pilots; returns the number of new decodes.
    pub fn sweep(&mut self, algorithm: Algorithm) -> Result<usize> {
        if algorithm == Algorithm::Logical {
            return Err(Error::InvalidInput("logical peeling does not run on signals".into()));
        }
        let cfg = &self.frame.config;
        let (n_slots, n_p) = (cfg.n_slots, cfg.n_p);
        self.sweep_count += 1;
        let mut found = 0;
        for slot in 0..n_slots {
            self.flush(slot);
            for pilot in 0..n_p {
                if !std::mem::take(&mut self.dirty[slot][pilot]) {
                    continue;
                }
                if let Some(user) = self.try_decode(slot, pilot)? {
                    self.decoded[user] = true;
                    found += 1;
                    self.subtract_user(algorithm, user, slot)?;
                }
            }
        }
        Ok(found)
    }

    /// MRC estimate on (slot, pilot) checked against every undecoded user on
    /// that resource; returns the first one that passes.
    pub fn try_decode(&self, slot: usize, pilot: usize) -> Result<Option<usize>> {
        let candidates = &self.occupancy[slot][pilot];
        if candidates.iter().all(|&u| self.decoded[u]) {
            return Ok(None);
        }
        let st = &self.stats[slot];
        let Some(x_hat) = mrc_payload_estimate(st.f.row(pilot), st.g[pilot], self.threshold) else {
            return Ok(None);
        };
        let x_hat = x_hat.as_slice().expect("owned row is contiguous");
        let cfg = &self.frame.config;
        for &u in candidates.iter().filter(|&&u| !self.decoded[u]) {
            if genie_bounded_distance_decode(x_hat, &self.frame.plans[u].payload_bits, cfg.t, cfg.decode_criterion)? {
                return Ok(Some(u));
            }
        }
        Ok(None)
    }

    fn subtract_user(&mut self, algorithm: Algorithm, user: usize, generator_slot: usize) -> Result<()> {
        let slots = self.frame.plans[user].slot_indices.clone();
        for slot in slots {
            let mode = if slot == generator_slot { SubtractionMode::Generator } else { SubtractionMode::Replica };
            match algorithm {
                Algorithm::Snb => self.snb_subtract(user, slot, mode)?,
                Algorithm::Pab => self.queue_pab(user, slot, mode)?,
                Algorithm::Prce => self.queue_prce(user, slot, mode)?,
                Algorithm::Logical => unreachable!("rejected in run"),
            }
        }
        Ok(())
    }

    fn claim(&mut self, user: usize, slot: usize, mode: SubtractionMode) -> Result<usize> {
        let (replica, pilot) = self.frame.plans[user].replica_in(slot).ok_or(Error::NoReplica { user, slot })?;
        if self.subtracted[user][replica] {
            return Err(Error::DoubleSubtraction { user, slot });
        }
        self.subtracted[user][replica] = true;
        match mode {
            SubtractionMode::Generator => self.n_up += 1,
            SubtractionMode::Replica => self.n_pa += 1,
        }
        Ok(pilot)
    }

    /// `f_j -= ||h||^2 x`, `g_j -= ||h||^2` on the user's pilot, with
    /// `||h||^2 = M` in replica slots.
    pub fn snb_subtract(&mut self, user: usize, slot: usize, mode: SubtractionMode) -> Result<()> {
        let pilot = self.claim(user, slot, mode)?;
        let st = &mut self.stats[slot];
        let norm = match (mode, self.options.snb_generator) {
            (SubtractionMode::Generator, SnbGeneratorUpdate::Skip) => return Ok(()),
            (SubtractionMode::Generator, SnbGeneratorUpdate::MeasuredNorm) => st.g[pilot],
            (SubtractionMode::Replica, _) => self.frame.config.m as f64,
        };
        let payload = self.frame.plans[user].payload.symbols();
        for (f, x) in st.f.row_mut(pilot).iter_mut().zip(payload) {
            *f -= x * norm;
        }
        st.g[pilot] -= norm;
        self.dirty[slot][pilot] = true;
        Ok(())
    }

    /// Full-contribution subtraction with the pilot estimate in the generator
    /// slot and the payload-aided estimate in replica slots.
    pub fn pab_subtract(&mut self, user: usize, slot: usize, mode: SubtractionMode) -> Result<()> {
        self.queue_pab(user, slot, mode)?;
        self.flush(slot);
        Ok(())
    }

    /// Full-contribution subtraction with the true channel.
    pub fn prce_subtract(&mut self, user: usize, slot: usize, mode: SubtractionMode) -> Result<()> {
        self.queue_prce(user, slot, mode)?;
        self.flush(slot);
        Ok(())
    }

    fn queue_pab(&mut self, user: usize, slot: usize, mode: SubtractionMode) -> Result<()> {
        let pilot = self.claim(user, slot, mode)?;
        match mode {
            SubtractionMode::Generator => {
                self.flush_unapplied(slot);
                let h = self.stats[slot].phi.row(pilot).to_owned();
                self.generator_statistics(slot, user, pilot, &h, true);
                self.pending[slot].push(Pending { user, pilot, channel: Some(h), stats_done: true });
            }
            SubtractionMode::Replica => {
                self.pending[slot].push(Pending { user, pilot, channel: None, stats_done: false });
            }
        }
        Ok(())
    }

    fn queue_prce(&mut self, user: usize, slot: usize, mode: SubtractionMode) -> Result<()> {
        let pilot = self.claim(user, slot, mode)?;
        let frame = self.frame;
        let h = frame.true_channel(user, slot).expect("claimed replica exists").0.clone();
        let stats_done = mode == SubtractionMode::Generator;
        if stats_done {
            self.flush_unapplied(slot);
            self.generator_statistics(slot, user, pilot, &h, false);
        }
        self.pending[slot].push(Pending { user, pilot, channel: Some(h), stats_done });
        Ok(())
    }

    fn flush_unapplied(&mut self, slot: usize) {
        if self.pending[slot].iter().any(|q| !q.stats_done) {
            self.flush(slot);
        }
    }

    /// Statistics after removing `h x` on `pilot`, before the signals follow.
    /// With `clears_pilot`, `h` is `phi_j` itself and the pilot is left empty.
    fn generator_statistics(&mut self, slot: usize, user: usize, pilot: usize, h: &Array1<C64>, clears_pilot: bool) {
        let frame = self.frame;
        let payload = frame.plans[user].payload.symbols();
        let hs = h.as_slice().expect("owned");
        let st = &mut self.stats[slot];

        // Pilots are exactly orthogonal, so only phi_j moves; every other f_k
        // shifts by (phi_k^H h) x.
        for k in 0..st.g.len() {
            if k == pilot {
                continue;
            }
            let c = inner(st.phi.row(k).as_slice().expect("standard layout"), hs);
            if c == ZERO {
                continue;
            }
            for (f, x) in st.f.row_mut(k).into_slice().expect("standard layout").iter_mut().zip(payload) {
                *f -= c * x;
            }
        }

        if clears_pilot {
            st.phi.row_mut(pilot).fill(ZERO);
            st.f.row_mut(pilot).fill(ZERO);
            st.g[pilot] = 0.0;
        } else {
            // (phi - h)^H (Y - h x) = f - (phi^H h) x - h^H Y + ||h||^2 x, with Y
            // the residual including the subtractions still queued
            let y = &self.residual[slot].y;
            let mut hy = Array1::<C64>::zeros(payload.len());
            let acc = hy.as_slice_mut().expect("owned");
            let ys = y.as_slice().expect("signals are in standard layout");
            for (row, hm) in ys.chunks_exact(acc.len()).zip(hs) {
                let w = hm.conj();
                acc.iter_mut().zip(row).for_each(|(a, v)| *a += w * v);
            }
            for q in &self.pending[slot] {
                let c =
                    inner(hs, q.channel.as_ref().expect("applied entries carry a channel").as_slice().expect("owned"));
                hy.zip_mut_with(&ArrayView1::from(frame.plans[q.user].payload.symbols()), |a, x| *a -= c * x);
            }
            let c = inner(st.phi.row(pilot).as_slice().expect("standard layout"), hs);
            let e: f64 = hs.iter().map(|v| v.norm_sqr()).sum();
            for ((f, x), q) in st.f.row_mut(pilot).iter_mut().zip(payload).zip(&hy) {
                *f += (e - c) * x - q;
            }
            let mut phi = st.phi.row_mut(pilot);
            phi.zip_mut_with(h, |a, b| *a -= b);
            st.g[pilot] = phi.iter().map(|v| v.norm_sqr()).sum();
        }
        self.dirty[slot].iter_mut().for_each(|d| *d = true);
    }

    /// Applies every queued subtraction of `slot`, in queue order.
    ///
    /// Nothing reads a slot between two visits, so deferring is exact. A
    /// payload-aided estimate sees the residual left by the subtractions
    /// queued before it: `h_i = (Y x_i^H - sum_{l<i} h_l x_l x_i^H) / ||x_i||^2`.
    fn flush(&mut self, slot: usize) {
        let queue = std::mem::take(&mut self.pending[slot]);
        if queue.is_empty() {
            return;
        }
        let frame = self.frame;
        let cfg = &frame.config;
        let (m, n_p, n_d, k) = (cfg.m, cfg.n_p, cfg.n_d, queue.len());
        let signal = &mut self.residual.to_mut()[slot];
        let st = &mut self.stats[slot];

        let mut x = Array2::<C64>::zeros((k, n_d));
        for (i, q) in queue.iter().enumerate() {
            x.row_mut(i).assign(&ArrayView1::from(frame.plans[q.user].payload.symbols()));
        }

        let mut h = Array2::<C64>::zeros((m, k));
        if queue.iter().any(|q| q.channel.is_none()) {
            let xc = x.mapv(|v| v.conj());
            let mut g = Array2::<C64>::zeros((m, k));
            general_mat_mul(ONE, &signal.y, &xc.t(), ZERO, &mut g);
            let gram = x.dot(&xc.t());
            for (i, q) in queue.iter().enumerate() {
                match &q.channel {
                    Some(c) => h.column_mut(i).assign(c),
                    None => {
                        let mut col = g.column(i).to_owned();
                        for l in 0..i {
                            let w = gram[[l, i]];
                            col.zip_mut_with(&h.column(l), |a, b| *a -= b * w);
                        }
                        let inv = 1.0 / gram[[i, i]].re;
                        h.column_mut(i).assign(&col.mapv(|v| v * inv));
                    }
                }
            }
        } else {
            for (i, q) in queue.iter().enumerate() {
                h.column_mut(i).assign(q.channel.as_ref().expect("known channel"));
            }
        }

        // Y -= H X
        general_mat_mul(-ONE, &h, &x, ONE, &mut signal.y);

        // per-pilot channel sums E; P -= E^T S through the pilot transform
        if k < n_p.trailing_zeros() as usize {
            for (i, q) in queue.iter().enumerate() {
                let col = h.column(i).to_vec();
                subtract_pilot(&mut signal.p, &frame.pilots, q.pilot, &col);
            }
        } else {
            // per-pilot channel sums through the pilot transform
            let mut e = Array2::<C64>::zeros((m, n_p));
            for (i, q) in queue.iter().enumerate() {
                e.column_mut(q.pilot).zip_mut_with(&h.column(i), |a, b| *a += b);
            }
            let mut buf = vec![ZERO; n_p];
            for (src, mut row) in e.rows().into_iter().zip(signal.p.rows_mut()) {
                buf.iter_mut().zip(src).for_each(|(b, v)| *b = *v);
                fwht(&mut buf);
                row.zip_mut_with(&ArrayView1::from(&buf), |a, b| *a -= b);
            }
        }

        let fresh: Vec<usize> = (0..k).filter(|&i| !queue[i].stats_done).collect();
        if fresh.is_empty() {
            return;
        }
        let mut touched = vec![false; n_p];
        let mut e = Array2::<C64>::zeros((n_p, m));
        let mut hf = Array2::<C64>::zeros((m, fresh.len()));
        let mut xf = Array2::<C64>::zeros((fresh.len(), n_d));
        for (c, &i) in fresh.iter().enumerate() {
            let q = &queue[i];
            e.row_mut(q.pilot).zip_mut_with(&h.column(i), |a, b| *a += b);
            touched[q.pilot] = true;
            hf.column_mut(c).assign(&h.column(i));
            xf.row_mut(c).assign(&x.row(i));
        }

        // Pilots are exactly orthogonal, so only the touched phi_j move and
        // every other f_k shifts by sum_i (phi_k^H h_i) x_i.
        // conj(Phi) H = conj(Phi conj(H)), conjugating the small factor
        let mut w = Array2::<C64>::zeros((n_p, fresh.len()));
        general_mat_mul(ONE, &st.phi, &hf.mapv(|v| v.conj()), ZERO, &mut w);
        w.mapv_inplace(|v| v.conj());
        general_mat_mul(-ONE, &w, &xf, ONE, &mut st.f);

        st.phi -= &e;
        let rows: Vec<usize> = (0..n_p).filter(|&j| touched[j]).collect();
        let mut a = Array2::<C64>::zeros((rows.len(), m));
        for (r, &j) in rows.iter().enumerate() {
            a.row_mut(r).assign(&st.phi.row(j).mapv(|v| v.conj()));
        }
        let mut fresh = Array2::<C64>::zeros((rows.len(), n_d));
        general_mat_mul(ONE, &a, &signal.y, ZERO, &mut fresh);
        for (r, &j) in rows.iter().enumerate() {
            st.f.row_mut(j).assign(&fresh.row(r));
            st.g[j] = st.phi.row(j).iter().map(|v| v.norm_sqr()).sum();
        }
        self.dirty[slot].iter_mut().for_each(|d| *d = true);
    }
}

/// `a^H b`, with four partial sums so the loop is not one long add chain.
fn inner(a: &[C64], b: &[C64]) -> C64 {
    let mut acc = [ZERO; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ar, br) = (ac.remainder(), bc.remainder());
    for (x, y) in ac.zip(bc) {
        for i in 0..4 {
            acc[i] += x[i].conj() * y[i];
        }
    }
    let tail: C64 = ar.iter().zip(br).map(|(x, y)| x.conj() * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn subtract_payload(y: &mut ndarray::Array2<C64>, h: &[C64], payload: &[C64]) {
    let n = payload.len();
    let y = y.as_slice_mut().expect("signals are in standard layout");
    for (row, hm) in y.chunks_exact_mut(n).zip(h) {
        for (v, x) in row.iter_mut().zip(payload) {
            *v -= hm * x;
        }
    }
}

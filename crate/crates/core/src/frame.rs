//! Baseline repetition coded slotted ALOHA: every active user sends `r`
//! copies of one payload in `r` distinct slots, picking a pilot at random in
//! each slot.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView1};
use rand::seq::index;
use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{
    build_hadamard_pilots, draw_channel_vector, draw_noise_matrix, qpsk_modulate, ChannelVector, PilotSet,
    QpskSequence, RandomStream, C64,
};
use crate::receiver::{fwht, SlotSignal};

/// Transmission plan of one active user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserPlan {
    pub user_id: usize,
    /// Distinct slot indices, ascending.
    pub slot_indices: Vec<usize>,
    /// Pilot used in `slot_indices[i]`.
    pub pilot_choice: Vec<usize>,
    pub payload: QpskSequence,
    pub payload_bits: Vec<bool>,
}

impl UserPlan {
    pub fn replicas(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.slot_indices.iter().copied().zip(self.pilot_choice.iter().copied())
    }

    /// Replica index and pilot of this user in `slot`, if it transmits there.
    pub fn replica_in(&self, slot: usize) -> Option<(usize, usize)> {
        self.slot_indices.iter().position(|&s| s == slot).map(|i| (i, self.pilot_choice[i]))
    }
}

/// Ground truth and received signals of one frame.
#[derive(Debug, Clone)]
pub struct FrameInstance {
    pub config: SystemConfig,
    pub pilots: PilotSet,
    pub plans: Vec<UserPlan>,
    /// `true_channels[user][i]` is the channel of replica `i` of `user`.
    pub true_channels: Vec<Vec<ChannelVector>>,
    pub slots: Vec<SlotSignal>,
    /// Noise matrices `(Z_p, Z)` per slot, kept only on request.
    pub noise: Option<Vec<(Array2<C64>, Array2<C64>)>>,
}

impl FrameInstance {
    /// Plans and signals of one frame, all drawn from `stream`.
    pub fn generate(config: &SystemConfig, stream: RandomStream) -> Result<Self> {
        let mut rng = stream.rng();
        let plans = generate_user_plans(config, &mut rng)?;
        assemble_frame(plans, config, &mut rng)
    }

    pub fn true_channel(&self, user: usize, slot: usize) -> Option<&ChannelVector> {
        let (i, _) = self.plans[user].replica_in(slot)?;
        Some(&self.true_channels[user][i])
    }

    /// `occupancy()[slot][pilot]` lists the users transmitting on that resource.
    pub fn occupancy(&self) -> Vec<Vec<Vec<usize>>> {
        resource_occupancy(&self.plans, self.config.n_slots, self.config.n_p)
    }
}

pub fn resource_occupancy(plans: &[UserPlan], n_slots: usize, n_p: usize) -> Vec<Vec<Vec<usize>>> {
    let mut occ = vec![vec![Vec::new(); n_p]; n_slots];
    for plan in plans {
        for (slot, pilot) in plan.replicas() {
            occ[slot][pilot].push(plan.user_id);
        }
    }
    occ
}

/// Draws slots, pilots and payload bits for the `k_a` active users.
pub fn generate_user_plans<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<Vec<UserPlan>> {
    config.validate()?;
    let SystemConfig { k_a, n_slots, n_p, n_d, r, .. } = *config;
    let mut plans = Vec::with_capacity(k_a);
    for user_id in 0..k_a {
        let mut slot_indices = index::sample(rng, n_slots, r).into_vec();
        slot_indices.sort_unstable();
        let pilot_choice = (0..r).map(|_| rng.random_range(0..n_p)).collect();
        let payload_bits: Vec<bool> = (0..2 * n_d).map(|_| rng.random()).collect();
        let payload = qpsk_modulate(&payload_bits)?;
        plans.push(UserPlan { user_id, slot_indices, pilot_choice, payload, payload_bits });
    }
    Ok(plans)
}

/// Superimposes all replicas slot by slot, drawing a fresh channel for every
/// (user, slot) pair and fresh noise for every slot.
pub fn assemble_frame<R: Rng + ?Sized>(
    plans: Vec<UserPlan>,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<FrameInstance> {
    FrameAssembler::new(config)?.assemble(plans, rng)
}

/// Frame assembly with optional retention of the noise matrices.
#[derive(Debug, Clone)]
pub struct FrameAssembler {
    config: SystemConfig,
    pilots: PilotSet,
    retain_noise: bool,
}

impl FrameAssembler {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config: config.clone(), pilots: build_hadamard_pilots(config.n_p)?, retain_noise: false })
    }

    pub fn retain_noise(mut self, retain: bool) -> Self {
        self.retain_noise = retain;
        self
    }

    pub fn assemble<R: Rng + ?Sized>(&self, plans: Vec<UserPlan>, rng: &mut R) -> Result<FrameInstance> {
        let cfg = &self.config;
        for plan in &plans {
            if plan.slot_indices.len() != plan.pilot_choice.len()
                || plan.payload.len() != cfg.n_d
                || plan.replicas().any(|(s, p)| s >= cfg.n_slots || p >= cfg.n_p)
            {
                return Err(Error::InvalidInput(format!("plan of user {} does not fit the frame", plan.user_id)));
            }
        }

        let mut per_slot: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); cfg.n_slots];
        for (u, plan) in plans.iter().enumerate() {
            for (i, (slot, pilot)) in plan.replicas().enumerate() {
                per_slot[slot].push((u, i, pilot));
            }
        }

        let mut true_channels: Vec<Vec<Option<ChannelVector>>> =
            plans.iter().map(|p| vec![None; p.slot_indices.len()]).collect();
        let mut slots = Vec::with_capacity(cfg.n_slots);
        let mut noise = self.retain_noise.then(Vec::new);

        for users in &per_slot {
            // channels first, in user order, then the two noise blocks
            let mut drawn = Vec::with_capacity(users.len());
            for &(u, i, pilot) in users {
                let hv = draw_channel_vector(rng, cfg.m, cfg.channel_var)?;
                drawn.push((u, pilot, hv.0.clone()));
                true_channels[u][i] = Some(hv);
            }
            let zp = draw_noise_matrix(rng, cfg.m, cfg.n_p, cfg.noise_var)?;
            let z = draw_noise_matrix(rng, cfg.m, cfg.n_d, cfg.noise_var)?;
            let mut p = zp.clone();
            let mut y = z.clone();
            if !drawn.is_empty() {
                // P = sum_j (sum of channels on pilot j) s_j, one transform per antenna
                let mut per_pilot = Array2::<C64>::zeros((cfg.m, cfg.n_p));
                for (_, pilot, h) in &drawn {
                    per_pilot.column_mut(*pilot).zip_mut_with(h, |a, b| *a += b);
                }
                let mut buf = vec![C64::new(0.0, 0.0); cfg.n_p];
                for (src, mut dst) in per_pilot.rows().into_iter().zip(p.rows_mut()) {
                    buf.iter_mut().zip(src.iter()).for_each(|(b, v)| *b = *v);
                    fwht(&mut buf);
                    dst.iter_mut().zip(&buf).for_each(|(d, v)| *d += v);
                }
            }
            if let [(u, _, h)] = drawn.as_slice() {
                // a lone user stays exactly h x
                for (hm, mut row) in h.iter().zip(y.rows_mut()) {
                    row.iter_mut().zip(plans[*u].payload.symbols()).for_each(|(v, w)| *v += hm * w);
                }
            } else if !drawn.is_empty() {
                let mut hmat = Array2::<C64>::zeros((cfg.m, drawn.len()));
                let mut xmat = Array2::<C64>::zeros((drawn.len(), cfg.n_d));
                for (k, (u, _, h)) in drawn.iter().enumerate() {
                    hmat.column_mut(k).assign(h);
                    xmat.row_mut(k).assign(&ArrayView1::from(plans[*u].payload.symbols()));
                }
                general_mat_mul(C64::new(1.0, 0.0), &hmat, &xmat, C64::new(1.0, 0.0), &mut y);
            }
            if let Some(n) = noise.as_mut() {
                n.push((zp, z));
            }
            slots.push(SlotSignal { p, y });
        }

        let true_channels = true_channels
            .into_iter()
            .map(|v| v.into_iter().map(|h| h.expect("every replica is placed in a slot")).collect())
            .collect();
        Ok(FrameInstance { config: cfg.clone(), pilots: self.pilots.clone(), plans, true_channels, slots, noise })
    }
}

/// Per-slot replica counts, `K_a r / N` on average.
pub fn slot_loads(plans: &[UserPlan], n_slots: usize) -> Vec<usize> {
    let mut loads = vec![0; n_slots];
    for plan in plans {
        for &s in &plan.slot_indices {
            loads[s] += 1;
        }
    }
    loads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RandomStream;

    fn small(k_a: usize, noise_var: f64) -> SystemConfig {
        SystemConfig { k_a, m: 8, n_slots: 6, n_p: 4, n_d: 12, r: 2, noise_var, ..SystemConfig::default() }
    }

    #[test]
    fn no_users() {
        let mut rng = RandomStream::new(1, 0).rng();
        let cfg = small(0, 0.1);
        assert!(generate_user_plans(&cfg, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn plans_are_well_formed() {
        let mut rng = RandomStream::new(1, 0).rng();
        let cfg = SystemConfig { k_a: 800, ..SystemConfig::default() };
        let plans = generate_user_plans(&cfg, &mut rng).unwrap();
        assert_eq!(plans.len(), 800);
        for (u, p) in plans.iter().enumerate() {
            assert_eq!(p.user_id, u);
            assert_eq!(p.slot_indices.len(), 3);
            assert!(p.slot_indices.windows(2).all(|w| w[0] < w[1]));
            assert!(p.pilot_choice.iter().all(|&j| j < 64));
            assert_eq!(p.payload.len(), 256);
            assert_eq!(p.payload_bits.len(), 512);
        }
    }

    #[test]
    fn all_slots_when_r_equals_n() {
        let mut rng = RandomStream::new(3, 0).rng();
        let cfg = SystemConfig { r: 6, ..small(20, 0.1) };
        for p in generate_user_plans(&cfg, &mut rng).unwrap() {
            assert_eq!(p.slot_indices, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn too_many_replicas() {
        let mut rng = RandomStream::new(3, 0).rng();
        let cfg = SystemConfig { r: 7, ..small(2, 0.1) };
        assert!(matches!(generate_user_plans(&cfg, &mut rng), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn single_user_noiseless_is_outer_product() {
        let mut rng = RandomStream::new(4, 0).rng();
        let cfg = small(1, 0.0);
        let plans = generate_user_plans(&cfg, &mut rng).unwrap();
        let frame = assemble_frame(plans, &cfg, &mut rng).unwrap();
        let plan = &frame.plans[0];
        for (i, (slot, pilot)) in plan.replicas().enumerate() {
            let h = frame.true_channels[0][i].as_array();
            let sig = &frame.slots[slot];
            for m in 0..cfg.m {
                for n in 0..cfg.n_p {
                    assert_eq!(sig.p[[m, n]], h[m] * frame.pilots.row(pilot)[n]);
                }
                for n in 0..cfg.n_d {
                    assert_eq!(sig.y[[m, n]], h[m] * plan.payload.0[n]);
                }
            }
        }
        let silent: Vec<usize> = (0..cfg.n_slots).filter(|s| !plan.slot_indices.contains(s)).collect();
        for s in silent {
            assert!(frame.slots[s].p.iter().chain(frame.slots[s].y.iter()).all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn superposition_leaves_noise() {
        let mut rng = RandomStream::new(5, 0).rng();
        let cfg = small(9, 0.1);
        let plans = generate_user_plans(&cfg, &mut rng).unwrap();
        let frame = FrameAssembler::new(&cfg).unwrap().retain_noise(true).assemble(plans, &mut rng).unwrap();
        let mut residual = frame.slots.clone();
        for (u, plan) in frame.plans.iter().enumerate() {
            for (i, (slot, pilot)) in plan.replicas().enumerate() {
                let h = frame.true_channels[u][i].as_array();
                for m in 0..cfg.m {
                    for n in 0..cfg.n_p {
                        residual[slot].p[[m, n]] -= h[m] * frame.pilots.row(pilot)[n];
                    }
                    for n in 0..cfg.n_d {
                        residual[slot].y[[m, n]] -= h[m] * plan.payload.0[n];
                    }
                }
            }
        }
        let noise = frame.noise.as_ref().unwrap();
        for (r, (zp, z)) in residual.iter().zip(noise) {
            for (a, b) in r.p.iter().zip(zp.iter()).chain(r.y.iter().zip(z.iter())) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn replicas_share_payload_but_not_channels() {
        let cfg = small(5, 0.1);
        let frame = FrameInstance::generate(&cfg, RandomStream::new(6, 0)).unwrap();
        for chans in &frame.true_channels {
            assert_eq!(chans.len(), 2);
            assert_ne!(chans[0], chans[1]);
        }
        assert!(frame.true_channel(0, frame.plans[0].slot_indices[0]).is_some());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = small(7, 0.1);
        let a = FrameInstance::generate(&cfg, RandomStream::new(8, 2)).unwrap();
        let b = FrameInstance::generate(&cfg, RandomStream::new(8, 2)).unwrap();
        assert_eq!(a.plans, b.plans);
        assert_eq!(a.slots, b.slots);
    }
}

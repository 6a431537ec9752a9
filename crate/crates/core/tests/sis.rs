use csa_mimo::frame::{FrameAssembler, UserPlan};
use csa_mimo::model::qpsk_modulate;
use csa_mimo::model::{RandomStream, C64};
use csa_mimo::sis::{pab_channel_estimate, run_receivers, ReceiverOptions, ReceiverState, SubtractionMode};
use csa_mimo::{Algorithm, FrameInstance, SystemConfig};
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn frame(k_a: usize, noise_var: f64, seed: u64) -> FrameInstance {
    let config = SystemConfig { k_a, noise_var, ..SystemConfig::default() };
    FrameInstance::generate(&config, RandomStream::for_frame(seed, k_a, 0)).unwrap()
}

fn max_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max)
}

#[test]
fn noiseless_cancellation_removes_the_user() {
    let f = frame(600, 0.0, 1);
    let occ = f.occupancy();
    // a user in a crowded slot, removed from one of its replica slots
    let (user, slot) = f
        .plans
        .iter()
        .flat_map(|p| p.slot_indices.iter().map(move |&s| (p.user_id, s)))
        .max_by_key(|&(_, s)| occ[s].iter().map(Vec::len).sum::<usize>())
        .unwrap();
    let mut state = ReceiverState::new(&f).unwrap();
    state.mark_decoded(user);
    state.prce_subtract(user, slot, SubtractionMode::Replica).unwrap();

    let (mut p, mut y) = (Array2::<C64>::zeros((256, 64)), Array2::<C64>::zeros((256, 256)));
    for (pilot, users) in occ[slot].iter().enumerate() {
        for &u in users.iter().filter(|&&u| u != user) {
            let h = &f.true_channel(u, slot).unwrap().0;
            let x = f.plans[u].payload.symbols();
            for m in 0..256 {
                for k in 0..64 {
                    p[[m, k]] += h[m] * f.pilots.matrix()[[pilot, k]];
                }
                for k in 0..256 {
                    y[[m, k]] += h[m] * x[k];
                }
            }
        }
    }
    let res = &state.residual()[slot];
    assert!(max_diff(&res.p, &p) < 1e-10);
    assert!(max_diff(&res.y, &y) < 1e-10);
}

#[test]
fn snb_leaves_signals_untouched() {
    let f = frame(800, 0.1, 2);
    let mut state = ReceiverState::new(&f).unwrap();
    state.run(Algorithm::Snb).unwrap();
    assert!(state.report().decoded_count > 700);
    assert_eq!(state.residual(), &f.slots[..]);
}

#[test]
fn sweeps_grow_the_decoded_set_and_stop() {
    for alg in [Algorithm::Snb, Algorithm::Pab, Algorithm::Prce] {
        let f = frame(1300, 0.1, 3);
        let mut state = ReceiverState::new(&f).unwrap();
        let mut prev = vec![false; f.plans.len()];
        let mut sweeps = 0;
        loop {
            let gained = state.sweep(alg).unwrap();
            sweeps += 1;
            let now = state.decoded().to_vec();
            assert!(prev.iter().zip(&now).all(|(a, b)| !a || *b), "{alg}: a user was undecoded");
            assert_eq!(now.iter().filter(|&&d| d).count(), prev.iter().filter(|&&d| d).count() + gained);
            prev = now;
            if gained == 0 || prev.iter().all(|&d| d) {
                break;
            }
            assert!(sweeps <= f.plans.len());
        }
        let rep = state.report();
        assert_eq!(rep.sweep_count, sweeps);
        assert!(rep.sweep_count <= rep.decoded_count + 1);
        println!("{alg}: {} decoded in {} sweeps", rep.decoded_count, rep.sweep_count);
    }
}

#[test]
fn receivers_are_deterministic_and_consistent() {
    let f = frame(1200, 0.1, 4);
    let a = run_receivers(&f, &Algorithm::ALL, ReceiverOptions::default()).unwrap();
    let b = run_receivers(&f, &Algorithm::ALL, ReceiverOptions::default()).unwrap();
    assert_eq!(a, b);
    for (alg, rep) in Algorithm::ALL.iter().zip(&a) {
        assert_eq!(*rep, csa_mimo::sis::run_receiver(&f, *alg).unwrap());
        assert_eq!(rep.decoded_count + rep.lost_count, 1200);
        assert_eq!(rep.decoded.iter().filter(|&&d| d).count(), rep.decoded_count);
        // every decoded user is subtracted from each of its other replicas
        if *alg != Algorithm::Logical {
            assert!(rep.n_pa <= 2 * rep.decoded_count);
            assert!(rep.n_up <= rep.decoded_count);
        }
    }
}

#[test]
fn stronger_receivers_lose_fewer_packets() {
    let mut lost = [0usize; 4];
    for seed in 0..3 {
        let f = frame(1500, 0.1, 10 + seed);
        for (l, rep) in lost.iter_mut().zip(run_receivers(&f, &Algorithm::ALL, ReceiverOptions::default()).unwrap()) {
            *l += rep.lost_count;
        }
    }
    println!("lost SNB {} PAB {} PRCE {} LOGICAL {}", lost[0], lost[1], lost[2], lost[3]);
    assert!(lost[0] > lost[1] && lost[1] >= lost[2] && lost[2] >= lost[3]);
}

#[test]
fn pab_estimate_error_falls_to_noise_after_removal() {
    // with every other user removed exactly, Y x^H / ||x||^2 - h = Z x^H / N_D
    let config = SystemConfig { k_a: 12, n_slots: 1, r: 1, ..SystemConfig::default() };
    let assembler = FrameAssembler::new(&config).unwrap();
    let (mut sum, mut n) = (0.0, 0usize);
    for trial in 0..60 {
        let mut rng = RandomStream::new(77, trial).rng();
        let plans = (0..12)
            .map(|u| {
                let payload_bits: Vec<bool> = (0..512).map(|_| rng.random()).collect();
                UserPlan {
                    user_id: u,
                    slot_indices: vec![0],
                    pilot_choice: vec![rng.random_range(0..64)],
                    payload: qpsk_modulate(&payload_bits).unwrap(),
                    payload_bits,
                }
            })
            .collect();
        let f = assembler.assemble(plans, &mut rng).unwrap();
        let mut state = ReceiverState::new(&f).unwrap();
        for u in 1..12 {
            state.prce_subtract(u, 0, SubtractionMode::Replica).unwrap();
        }
        let est = pab_channel_estimate(&state.residual()[0].y, f.plans[0].payload.symbols()).unwrap();
        sum += est.iter().zip(f.true_channels[0][0].0.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        n += 256;
    }
    let v = sum / n as f64;
    let want = 0.1 / 256.0;
    assert!((v / want - 1.0).abs() < 5.0 / (n as f64).sqrt(), "{v} vs {want}");
}

#[test]
fn prce_decodes_a_superset_of_pab() {
    let opts = ReceiverOptions::default();
    for seed in 0..5 {
        let f = frame(1500, 0.1, 100 + seed);
        let r = run_receivers(&f, &[Algorithm::Pab, Algorithm::Prce], opts).unwrap();
        assert!(r[0].decoded.iter().zip(&r[1].decoded).all(|(pab, prce)| !pab || *prce), "frame {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn small_frames_decode_monotonically(k_a in 0usize..40, seed in any::<u64>()) {
        let config = SystemConfig { k_a, m: 16, n_slots: 12, n_p: 4, n_d: 32, t: 2, ..SystemConfig::default() };
        let f = FrameInstance::generate(&config, RandomStream::new(seed, 0)).unwrap();
        let reps = run_receivers(&f, &Algorithm::ALL, ReceiverOptions::default()).unwrap();
        for rep in &reps {
            prop_assert!(rep.sweep_count <= k_a.max(1));
            prop_assert!(rep.sweep_count <= rep.decoded_count + 1);
            prop_assert_eq!(rep.decoded.len(), k_a);
        }
    }
}

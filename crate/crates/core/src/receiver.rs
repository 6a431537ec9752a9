//! Per-slot receiver front end: pilot-matched channel estimates, the MRC
//! combining statistics and the bounded-distance decode decision.

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView1};

use crate::config::DecodeCriterion;
use crate::error::{Error, Result};
use crate::model::{PilotSet, C64};

/// Pilot statistics with `g` below `m * NO_ESTIMATE_FRACTION` are treated as
/// an unused pilot.
pub const NO_ESTIMATE_FRACTION: f64 = 1e-6;

pub fn no_estimate_threshold(m: usize) -> f64 {
    m as f64 * NO_ESTIMATE_FRACTION
}

/// Signal received in one slot: pilot part `p` (M x N_P) and payload part `y` (M x N_D).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSignal {
    pub p: Array2<C64>,
    pub y: Array2<C64>,
}

impl SlotSignal {
    pub fn antennas(&self) -> usize {
        self.p.nrows()
    }
}

/// Receiver state of one pilot: channel estimate `phi`, combined payload `f`
/// and its normalisation `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotStatistic {
    pub phi: Array1<C64>,
    pub f: Array1<C64>,
    pub g: f64,
}

/// Channel estimates of every pilot, one per row: `phi_j = P s_j^H / ||s_j||^2`.
///
/// Pilots are Sylvester-Hadamard rows, so all projections come out of one fast
/// Walsh-Hadamard transform per antenna. The butterflies on `±h` inputs only
/// ever produce `0` or `±2^k h`, which keeps noiseless estimates exact.
pub fn estimate_all_pilot_channels(p: &Array2<C64>, pilots: &PilotSet) -> Result<Array2<C64>> {
    if p.ncols() != pilots.len() {
        return Err(Error::InvalidInput(format!(
            "pilot block has {} columns, pilots have length {}",
            p.ncols(),
            pilots.len()
        )));
    }
    let n = pilots.len();
    let scale = 1.0 / pilots.energy();
    let mut phi = Array2::<C64>::zeros((pilots.count(), p.nrows()));
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for (m, row) in p.rows().into_iter().enumerate() {
        buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
        fwht(&mut buf);
        for (j, v) in buf.iter().enumerate() {
            phi[[j, m]] = v * scale;
        }
    }
    Ok(phi)
}

pub(crate) fn fwht(buf: &mut [C64]) {
    let n = buf.len();
    let mut h = 1;
    while h < n {
        for block in buf.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Channel estimate of pilot `j` alone. Bit-identical to row `j` of
/// [`estimate_all_pilot_channels`].
pub fn estimate_pilot_channel(p: &Array2<C64>, pilots: &PilotSet, j: usize) -> Array1<C64> {
    let s = pilots.row(j);
    let scale = 1.0 / pilots.energy();
    let mut buf = vec![C64::new(0.0, 0.0); s.len()];
    Array1::from_iter(p.rows().into_iter().map(|row| {
        buf.iter_mut().zip(row.iter().zip(s.iter())).for_each(|(b, (a, &w))| *b = a * w);
        // adjacent pairwise sums, the same tree the transform builds
        let mut len = buf.len();
        while len > 1 {
            len /= 2;
            for i in 0..len {
                buf[i] = buf[2 * i] + buf[2 * i + 1];
            }
        }
        buf[0] * scale
    }))
}

/// `f = phi^H Y` and `g = ||phi||^2`.
pub fn compute_combining_statistics(phi: ArrayView1<'_, C64>, y: &Array2<C64>) -> (Array1<C64>, f64) {
    let mut f = Array1::<C64>::zeros(y.ncols());
    combine_into(phi, y, f.as_slice_mut().expect("fresh array is contiguous"));
    let g = phi.iter().map(|c| c.norm_sqr()).sum();
    (f, g)
}

pub(crate) fn combine_into(phi: ArrayView1<'_, C64>, y: &Array2<C64>, f: &mut [C64]) {
    f.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
    for (c, row) in phi.iter().zip(y.rows()) {
        let w = c.conj();
        for (acc, v) in f.iter_mut().zip(row.iter()) {
            *acc += w * v;
        }
    }
}

/// MRC payload estimate `f / g`, or `None` when `g` is below `threshold`.
pub fn mrc_payload_estimate(f: ArrayView1<'_, C64>, g: f64, threshold: f64) -> Option<Array1<C64>> {
    if !(g >= threshold) || g <= 0.0 {
        return None;
    }
    let inv = 1.0 / g;
    Some(f.mapv(|v| v * inv))
}

/// Statistics of all pilots of one slot, stored row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotStatistics {
    /// `N_P x M`, row `j` is `phi_j`.
    pub phi: Array2<C64>,
    /// `N_P x N_D`, row `j` is `f_j`.
    pub f: Array2<C64>,
    pub g: Vec<f64>,
}

impl SlotStatistics {
    pub fn compute(slot: &SlotSignal, pilots: &PilotSet) -> Result<Self> {
        let phi = estimate_all_pilot_channels(&slot.p, pilots)?;
        if slot.y.nrows() != phi.ncols() {
            return Err(Error::InvalidInput("pilot and payload blocks disagree on antenna count".into()));
        }
        let conj = phi.mapv(|c| c.conj());
        let mut f = Array2::<C64>::zeros((phi.nrows(), slot.y.ncols()));
        general_mat_mul(C64::new(1.0, 0.0), &conj, &slot.y, C64::new(0.0, 0.0), &mut f);
        let g = phi.rows().into_iter().map(|r| r.iter().map(|c| c.norm_sqr()).sum()).collect();
        Ok(Self { phi, f, g })
    }

    pub fn pilot(&self, j: usize) -> PilotStatistic {
        PilotStatistic { phi: self.phi.row(j).to_owned(), f: self.f.row(j).to_owned(), g: self.g[j] }
    }
}

/// Error count of the hard decisions on `x_hat` against `truth_bits`, stopping
/// early once `limit` is exceeded.
fn count_errors(x_hat: &[C64], truth_bits: &[bool], criterion: DecodeCriterion, limit: usize) -> usize {
    let mut errors = 0;
    for (s, b) in x_hat.iter().zip(truth_bits.chunks_exact(2)) {
        let e_re = (s.re < 0.0) != b[0];
        let e_im = (s.im < 0.0) != b[1];
        errors += match criterion {
            DecodeCriterion::Bit => e_re as usize + e_im as usize,
            DecodeCriterion::Symbol => (e_re || e_im) as usize,
        };
        if errors > limit {
            break;
        }
    }
    errors
}

/// Genie model of a `t`-error-correcting bounded-distance decoder with an
/// ideal CRC: the packet is recovered iff the hard decisions on `x_hat`
/// differ from the transmitted pattern in at most `t` positions.
pub fn genie_bounded_distance_decode(
    x_hat: &[C64],
    truth_bits: &[bool],
    t: usize,
    criterion: DecodeCriterion,
) -> Result<bool> {
    if truth_bits.len() != 2 * x_hat.len() {
        return Err(Error::InvalidInput(format!(
            "{} symbols cannot be checked against {} bits",
            x_hat.len(),
            truth_bits.len()
        )));
    }
    Ok(count_errors(x_hat, truth_bits, criterion, t) <= t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hadamard_pilots, draw_channel_vector, qpsk_modulate, RandomStream};
    use ndarray::Array2;
    use rand::Rng;

    fn outer(h: &Array1<C64>, row: &[C64]) -> Array2<C64> {
        Array2::from_shape_fn((h.len(), row.len()), |(m, n)| h[m] * row[n])
    }

    fn pilot_row(p: &PilotSet, j: usize) -> Vec<C64> {
        p.row(j).iter().map(|&v| C64::new(v, 0.0)).collect()
    }

    #[test]
    fn singleton_estimate_is_exact() {
        let pilots = build_hadamard_pilots(8).unwrap();
        let mut rng = RandomStream::new(1, 0).rng();
        let h = draw_channel_vector(&mut rng, 16, 1.0).unwrap().0;
        let p = outer(&h, &pilot_row(&pilots, 3));
        let phi = estimate_all_pilot_channels(&p, &pilots).unwrap();
        for j in 0..8 {
            for m in 0..16 {
                let want = if j == 3 { h[m] } else { C64::new(0.0, 0.0) };
                assert_eq!(phi[[j, m]], want);
            }
        }
        assert_eq!(estimate_pilot_channel(&p, &pilots, 3), h);
    }

    #[test]
    fn pilot_sharers_add_up() {
        let pilots = build_hadamard_pilots(8).unwrap();
        let mut rng = RandomStream::new(2, 0).rng();
        let h1 = draw_channel_vector(&mut rng, 16, 1.0).unwrap().0;
        let h2 = draw_channel_vector(&mut rng, 16, 1.0).unwrap().0;
        let s = pilot_row(&pilots, 5);
        let p = outer(&h1, &s) + outer(&h2, &s);
        let phi = estimate_pilot_channel(&p, &pilots, 5);
        for m in 0..16 {
            assert!((phi[m] - (h1[m] + h2[m])).norm() < 1e-15);
        }
    }

    #[test]
    fn singleton_statistics_and_mrc() {
        let pilots = build_hadamard_pilots(4).unwrap();
        let mut rng = RandomStream::new(3, 0).rng();
        let h = draw_channel_vector(&mut rng, 32, 1.0).unwrap().0;
        let bits: Vec<bool> = (0..40).map(|_| rng.random()).collect();
        let x = qpsk_modulate(&bits).unwrap();
        let slot = SlotSignal { p: outer(&h, &pilot_row(&pilots, 1)), y: outer(&h, x.symbols()) };
        let stats = SlotStatistics::compute(&slot, &pilots).unwrap();
        let st = stats.pilot(1);
        let norm: f64 = h.iter().map(|c| c.norm_sqr()).sum();
        assert!((st.g - norm).abs() < 1e-12);
        for (f, s) in st.f.iter().zip(x.symbols()) {
            assert!((f - s * norm).norm() < 1e-12);
        }
        let (f1, g1) = compute_combining_statistics(st.phi.view(), &slot.y);
        assert!((g1 - st.g).abs() < 1e-12);
        assert!(f1.iter().zip(st.f.iter()).all(|(a, b)| (a - b).norm() < 1e-12));
        let x_hat = mrc_payload_estimate(st.f.view(), st.g, no_estimate_threshold(32)).unwrap();
        assert_eq!(crate::model::qpsk_hard_demodulate(x_hat.as_slice().unwrap()), bits);
        assert!(x_hat.iter().zip(x.symbols()).all(|(a, b)| (a - b).norm() < 1e-14));
        assert!(genie_bounded_distance_decode(x_hat.as_slice().unwrap(), &bits, 0, DecodeCriterion::Bit).unwrap());
        // unused pilots carry nothing
        assert_eq!(stats.g[0], 0.0);
        assert!(stats.f.row(0).iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn zero_estimate_gives_zero_statistics() {
        let y = Array2::from_elem((4, 6), C64::new(1.0, -2.0));
        let (f, g) = compute_combining_statistics(Array1::zeros(4).view(), &y);
        assert_eq!(g, 0.0);
        assert!(f.iter().all(|c| *c == C64::new(0.0, 0.0)));
        assert!(mrc_payload_estimate(f.view(), g, no_estimate_threshold(4)).is_none());
        assert!(mrc_payload_estimate(f.view(), 1e-7, no_estimate_threshold(4)).is_none());
    }

    #[test]
    fn mrc_ratio_invariance() {
        let f = Array1::from(vec![C64::new(3.0, -1.0), C64::new(-0.5, 2.0)]);
        let a = mrc_payload_estimate(f.view(), 2.0, 1e-6).unwrap();
        let b = mrc_payload_estimate(f.mapv(|v| v * 7.5).view(), 15.0, 1e-6).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).norm() < 1e-15));
    }

    #[test]
    fn genie_boundary() {
        let bits: Vec<bool> = (0..64).map(|i| i % 3 == 0).collect();
        let x = qpsk_modulate(&bits).unwrap().0;
        let t = 4;
        let mut corrupted = x.clone();
        for s in corrupted.iter_mut().take(t) {
            s.re = -s.re;
        }
        assert!(genie_bounded_distance_decode(&corrupted, &bits, t, DecodeCriterion::Bit).unwrap());
        corrupted[t].re = -corrupted[t].re;
        assert!(!genie_bounded_distance_decode(&corrupted, &bits, t, DecodeCriterion::Bit).unwrap());
        assert!(!genie_bounded_distance_decode(&corrupted, &bits, t, DecodeCriterion::Symbol).unwrap());
    }

    #[test]
    fn symbol_criterion_counts_symbols() {
        let bits = vec![false; 8];
        let mut x = qpsk_modulate(&bits).unwrap().0;
        // two bit errors in one symbol
        x[0] = -x[0];
        assert!(!genie_bounded_distance_decode(&x, &bits, 1, DecodeCriterion::Bit).unwrap());
        assert!(genie_bounded_distance_decode(&x, &bits, 1, DecodeCriterion::Symbol).unwrap());
    }

    #[test]
    fn genie_length_mismatch() {
        assert!(matches!(
            genie_bounded_distance_decode(&[C64::new(1.0, 1.0)], &[true], 0, DecodeCriterion::Bit),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn estimate_length_mismatch() {
        let pilots = build_hadamard_pilots(4).unwrap();
        assert!(estimate_all_pilot_channels(&Array2::zeros((3, 8)), &pilots).is_err());
    }
}

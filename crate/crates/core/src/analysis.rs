//! Closed-form singleton decoding analysis.
//!
//! A singleton user sharing the slot with `|A| - 1` others, whose
//! `|A^j| - 1` pilot-sharers have been removed by SNB, sees
//! `N_it = |A^j| |A| - 1` interfering terms, each modelled as an independent
//! CN(0, M) vector. After MRC (division by `M`) every QPSK symbol is in error
//! with probability `P_e = erfc(a) - erfc(a)^2 / 4`, `a = sqrt(M / (2 N_it))`,
//! and a `t`-error-correcting bounded-distance decoder fails with the binomial
//! tail `P(errors > t)` over `N_D` symbols. Noise is neglected.

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot population seen by a probed singleton user.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterferenceScenario {
    pub m: usize,
    pub a_total: usize,
    pub a_pilot: usize,
    pub n_d: usize,
    pub t: usize,
}

impl InterferenceScenario {
    pub fn n_it(&self) -> Result<usize> {
        interference_term_count(self.a_pilot, self.a_total)
    }
}

pub fn interference_term_count(a_pilot: usize, a_total: usize) -> Result<usize> {
    if a_pilot == 0 || a_total < a_pilot {
        return Err(Error::InvalidParameter(format!(
            "need a_total >= a_pilot >= 1, got a_pilot {a_pilot}, a_total {a_total}"
        )));
    }
    Ok(a_pilot * a_total - 1)
}

/// QPSK symbol error probability under `n_it` unit-power interferers at `m` antennas.
pub fn symbol_error_probability(m: usize, n_it: usize) -> f64 {
    if n_it == 0 {
        return 0.0;
    }
    let e = erfc((m as f64 / (2.0 * n_it as f64)).sqrt());
    e - 0.25 * e * e
}

pub fn singleton_failure_probability(scenario: &InterferenceScenario) -> Result<f64> {
    if scenario.m == 0 || scenario.n_d == 0 {
        return Err(Error::InvalidParameter("m and n_d must be at least 1".into()));
    }
    let p_e = symbol_error_probability(scenario.m, scenario.n_it()?);
    Ok(binomial_upper_tail(scenario.n_d, p_e, scenario.t))
}

/// `P(X > t)` for `X ~ Binomial(n, p)`.
///
/// Terms are formed in the log domain and accumulated with Neumaier
/// summation. The tail itself is always summed, never `1 - head`, so tiny
/// tails keep their relative accuracy.
pub fn binomial_upper_tail(n: usize, p: f64, t: usize) -> f64 {
    if t >= n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
    let mut ln_binom = vec![0.0; n + 1];
    for d in 1..=n {
        ln_binom[d] = ln_binom[d - 1] + ((n - d + 1) as f64 / d as f64).ln();
    }
    let term = |d: usize| (ln_binom[d] + d as f64 * ln_p + (n - d) as f64 * ln_q).exp();
    neumaier_sum((t + 1..=n).map(term)).clamp(0.0, 1.0)
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let s = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - s) + v;
        } else {
            comp += (v - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Per-entry variance `(|A| - 1) / N_D` of the payload-aided channel estimate
/// error when the other users are still present.
pub fn pab_estimate_error_variance(a_total: usize, n_d: usize) -> Result<f64> {
    if a_total == 0 || n_d == 0 {
        return Err(Error::InvalidParameter("a_total and n_d must be at least 1".into()));
    }
    Ok((a_total - 1) as f64 / n_d as f64)
}

/// One row of the analytical singleton failure curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub a_total: usize,
    pub a_pilot: usize,
    pub m: usize,
    pub n_d: usize,
    pub t: usize,
    pub p_e: f64,
    pub p_fail: f64,
}

/// Singleton failure probability over a range of slot populations.
pub fn fig1_curve(
    m: usize,
    n_d: usize,
    t: usize,
    a_pilot: usize,
    a_range: impl IntoIterator<Item = usize>,
) -> Result<Vec<CurvePoint>> {
    a_range
        .into_iter()
        .map(|a_total| {
            let sc = InterferenceScenario { m, a_total, a_pilot, n_d, t };
            let p_e = symbol_error_probability(m, sc.n_it()?);
            Ok(CurvePoint { a_total, a_pilot, m, n_d, t, p_e, p_fail: singleton_failure_probability(&sc)? })
        })
        .collect()
}

/// First abscissa at which a sampled nondecreasing curve reaches `level`,
/// linearly interpolated between neighbouring samples.
pub fn level_crossing(points: &[(f64, f64)], level: f64) -> Option<f64> {
    let first = points.first()?;
    if first.1 >= level {
        return Some(first.0);
    }
    points.windows(2).find(|w| w[1].1 >= level).map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        x0 + (level - y0) * (x1 - x0) / (y1 - y0)
    })
}

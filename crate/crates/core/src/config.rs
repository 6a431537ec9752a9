use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the genie decoder counts errors against the transmitted payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeCriterion {
    /// Bit errors after hard demodulation (a t-error-correcting binary code).
    #[default]
    Bit,
    /// QPSK symbol errors, as in the closed-form failure probability.
    Symbol,
}

impl FromStr for DecodeCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bit" => Ok(Self::Bit),
            "symbol" => Ok(Self::Symbol),
            other => Err(Error::InvalidConfig(format!("unknown decode criterion '{other}'"))),
        }
    }
}

impl fmt::Display for DecodeCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bit => "bit",
            Self::Symbol => "symbol",
        })
    }
}

/// Scenario parameters of one simulated system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Active users per frame.
    pub k_a: usize,
    /// Base-station antennas.
    pub m: usize,
    /// Slots per frame.
    pub n_slots: usize,
    /// Number of orthogonal pilots, equal to the pilot length in symbols.
    pub n_p: usize,
    /// Payload symbols per replica.
    pub n_d: usize,
    /// Replicas per user.
    pub r: usize,
    /// Per-entry noise variance (linear).
    pub noise_var: f64,
    /// Per-entry channel variance, 1 under perfect power control.
    pub channel_var: f64,
    /// Correctable errors of the bounded-distance decoder.
    pub t: usize,
    /// Maximum latency in milliseconds.
    pub latency_ms: f64,
    /// Symbols per second.
    pub symbol_rate: f64,
    pub decode_criterion: DecodeCriterion,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let (latency_ms, symbol_rate, n_p, n_d) = (50.0, 1e6, 64, 256);
        Self {
            k_a: 800,
            m: 256,
            n_slots: compute_slot_count(latency_ms, symbol_rate, n_p, n_d).unwrap_or(78),
            n_p,
            n_d,
            r: 3,
            noise_var: 0.1,
            channel_var: 1.0,
            t: 10,
            latency_ms,
            symbol_rate,
            decode_criterion: DecodeCriterion::Bit,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("m", self.m), ("n_slots", self.n_slots), ("n_p", self.n_p), ("n_d", self.n_d), ("r", self.r)];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if !self.n_p.is_power_of_two() {
            return Err(Error::UnsupportedPilotCount(self.n_p));
        }
        if self.r > self.n_slots {
            return Err(Error::InvalidConfig(format!("r = {} replicas do not fit in {} slots", self.r, self.n_slots)));
        }
        if !(self.noise_var >= 0.0) || !self.noise_var.is_finite() {
            return Err(Error::InvalidConfig(format!("noise_var must be >= 0, got {}", self.noise_var)));
        }
        if !(self.channel_var > 0.0) || !self.channel_var.is_finite() {
            return Err(Error::InvalidConfig(format!("channel_var must be > 0, got {}", self.channel_var)));
        }
        Ok(())
    }

    /// Slot count implied by the latency budget, see [`compute_slot_count`].
    pub fn budgeted_slot_count(&self) -> Result<usize> {
        compute_slot_count(self.latency_ms, self.symbol_rate, self.n_p, self.n_d)
    }

    pub fn with_k_a(&self, k_a: usize) -> Self {
        Self { k_a, ..self.clone() }
    }
}

/// Number of slots that fit a latency budget of `latency_ms` at `symbol_rate`
/// when every slot carries a pilot and a payload, with the frame taking at
/// most half the budget: `floor(latency * rate / (2 (n_p + n_d)))`.
pub fn compute_slot_count(latency_ms: f64, symbol_rate: f64, n_p: usize, n_d: usize) -> Result<usize> {
    if !(latency_ms > 0.0) || !(symbol_rate > 0.0) || n_p == 0 || n_d == 0 {
        return Err(Error::InvalidParameter(format!(
            "slot budget needs positive arguments, got latency {latency_ms} ms, rate {symbol_rate}, n_p {n_p}, n_d {n_d}"
        )));
    }
    let symbols = latency_ms * symbol_rate / 1000.0;
    let slots = symbols / (2 * (n_p + n_d)) as f64;
    // absorb rounding in latency * rate when the quotient is an exact integer
    Ok((slots * (1.0 + 1e-12)).floor() as usize)
}

//! TOML run configuration. Keys are the field names of [`SystemConfig`] and
//! [`SweepSpec`]; `ka_values` takes a list or a `start:stop:step` string.

use std::path::Path;

use serde::Deserialize;

use super::sweep::SweepSpec;
use crate::config::{compute_slot_count, DecodeCriterion, SystemConfig};
use crate::error::{Error, Result};
use crate::sis::Algorithm;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub k_a: Option<usize>,
    pub m: Option<usize>,
    pub n_slots: Option<usize>,
    pub n_p: Option<usize>,
    pub n_d: Option<usize>,
    pub r: Option<usize>,
    pub noise_var: Option<f64>,
    pub channel_var: Option<f64>,
    pub t: Option<usize>,
    pub latency_ms: Option<f64>,
    pub symbol_rate: Option<f64>,
    pub decode_criterion: Option<DecodeCriterion>,
    #[serde(deserialize_with = "ka_values")]
    pub ka_values: Option<Vec<usize>>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub min_frames: Option<u64>,
    pub max_frames: Option<u64>,
    pub target_loss_events: Option<u64>,
    pub base_seed: Option<u64>,
}

/// `start:stop:step`, stop inclusive.
pub fn parse_ka_range(raw: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidConfig(format!("range '{raw}' is not start:stop:step"));
    let parts: Vec<usize> = raw.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
    let [start, stop, step] = parts.as_slice() else {
        return Err(bad());
    };
    if *step == 0 || stop < start {
        return Err(Error::InvalidConfig(format!("empty or endless range '{raw}'")));
    }
    Ok((*start..=*stop).step_by(*step).collect())
}

fn ka_values<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<usize>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        List(Vec<usize>),
        Range(String),
    }
    match Raw::deserialize(d)? {
        Raw::List(v) => Ok(Some(v)),
        Raw::Range(s) => parse_ka_range(&s).map(Some).map_err(serde::de::Error::custom),
    }
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    /// Fields set in `over` replace those of `self`.
    pub fn overlay(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            k_a,
            m,
            n_slots,
            n_p,
            n_d,
            r,
            noise_var,
            channel_var,
            t,
            latency_ms,
            symbol_rate,
            decode_criterion,
            ka_values,
            algorithms,
            min_frames,
            max_frames,
            target_loss_events,
            base_seed
        )
    }

    /// Scenario with unset fields at their defaults and, unless given, the
    /// slot count derived from the latency budget.
    pub fn system_config(&self) -> Result<SystemConfig> {
        let d = SystemConfig::default();
        let mut c = SystemConfig {
            k_a: self.k_a.unwrap_or(d.k_a),
            m: self.m.unwrap_or(d.m),
            n_slots: 0,
            n_p: self.n_p.unwrap_or(d.n_p),
            n_d: self.n_d.unwrap_or(d.n_d),
            r: self.r.unwrap_or(d.r),
            noise_var: self.noise_var.unwrap_or(d.noise_var),
            channel_var: self.channel_var.unwrap_or(d.channel_var),
            t: self.t.unwrap_or(d.t),
            latency_ms: self.latency_ms.unwrap_or(d.latency_ms),
            symbol_rate: self.symbol_rate.unwrap_or(d.symbol_rate),
            decode_criterion: self.decode_criterion.unwrap_or_default(),
        };
        c.n_slots = match self.n_slots {
            Some(n) => n,
            None => compute_slot_count(c.latency_ms, c.symbol_rate, c.n_p, c.n_d)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let d = SweepSpec::default();
        let config = self.system_config()?;
        let min_frames = self.min_frames.unwrap_or(d.min_frames);
        let spec = SweepSpec {
            ka_values: self.ka_values.clone().unwrap_or_else(|| vec![config.k_a]),
            config,
            algorithms: self.algorithms.clone().unwrap_or(d.algorithms.clone()),
            max_frames: self.max_frames.unwrap_or(d.max_frames).max(min_frames),
            min_frames,
            target_loss_events: self.target_loss_events.unwrap_or(d.target_loss_events),
            base_seed: self.base_seed.unwrap_or(d.base_seed),
            ..d
        };
        spec.validate()?;
        Ok(spec)
    }
}

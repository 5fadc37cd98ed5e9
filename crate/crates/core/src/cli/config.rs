//! Flat `key = value` training configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected. Every
//! key is optional and defaults to the `tfim12` preset:
//!
//! | key | values |
//! |-----|--------|
//! | `n_spins` | chain length |
//! | `coupling`, `gamma` | `J` and `Gamma` |
//! | `boundary` | `periodic` or `open` |
//! | `alpha` | hidden units per spin |
//! | `sampler` | `exact-enum`, `pbit` or `remote` |
//! | `endpoint` | `host:port` of a remote sampler |
//! | `mode` | `psi2-duplicate` or `psi-reweight` |
//! | `chimera` | `auto` or `M,N,L` |
//! | `chain_strength` | ferromagnetic chain coupling |
//! | `chain_policy` | `majority` or `discard` |
//! | `samples_per_epoch`, `sweeps_per_sample`, `burn_in` | sampler budget |
//! | `learning_rate`, `epochs`, `seed`, `init_std` | optimiser |
//! | `window`, `tolerance` | stopping rule |
//! | `activation` | `exact` or `lut` |
//! | `update_order` | `sequential` or `colored` |
//! | `record_timing` | `true` or `false` |

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::pbit::{Activation, UpdateOrder};
use crate::topology::ChainPolicy;
use crate::vmc::{SamplerKind, TrainConfig};

pub const CONFIG_KEYS: &[&str] = &[
    "n_spins",
    "coupling",
    "gamma",
    "boundary",
    "alpha",
    "sampler",
    "endpoint",
    "mode",
    "chimera",
    "chain_strength",
    "chain_policy",
    "samples_per_epoch",
    "sweeps_per_sample",
    "burn_in",
    "learning_rate",
    "epochs",
    "seed",
    "init_std",
    "window",
    "tolerance",
    "activation",
    "update_order",
    "record_timing",
];

/// Accumulates settings from files and flags on top of a base config.
#[derive(Clone, Debug)]
pub struct ConfigBuilder {
    cfg: TrainConfig,
    endpoint: String,
}

fn bad(key: &str, msg: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        msg: msg.into(),
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(key, format!("cannot parse `{value}`")))
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            bad(key, format!("`{value}` is not one of {}", names.join(", ")))
        })
}

fn parse_dims(value: &str) -> Option<(usize, usize, usize)> {
    let parts: Vec<usize> = value.split(',').map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts[..] {
        [m, n, l] => Some((m, n, l)),
        _ => None,
    }
}

impl ConfigBuilder {
    pub fn new(base: TrainConfig) -> Self {
        let endpoint = match &base.sampler {
            SamplerKind::Remote(e) => e.clone(),
            _ => String::new(),
        };
        ConfigBuilder { cfg: base, endpoint }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.cfg;
        let value = value.trim();
        match key {
            "n_spins" => c.n_spins = num(key, value)?,
            "coupling" => c.coupling = num(key, value)?,
            "gamma" => c.gamma = num(key, value)?,
            "boundary" => c.periodic = choice(key, value, &[("periodic", true), ("open", false)])?,
            "alpha" => c.alpha = num(key, value)?,
            "sampler" => {
                c.sampler = match value.parse::<SamplerKind>().map_err(|e| bad(key, e.to_string()))? {
                    SamplerKind::Remote(_) => SamplerKind::Remote(self.endpoint.clone()),
                    other => other,
                }
            }
            "endpoint" => {
                self.endpoint = value.to_string();
                if let SamplerKind::Remote(e) = &mut c.sampler {
                    *e = value.to_string();
                }
            }
            "mode" => c.mode = value.parse().map_err(|e: Error| bad(key, e.to_string()))?,
            "chimera" => {
                c.chimera = match value {
                    "auto" => None,
                    dims => Some(parse_dims(dims).ok_or_else(|| bad(key, format!("expected auto or M,N,L, got `{dims}`")))?),
                }
            }
            "chain_strength" => c.chain_strength = num(key, value)?,
            "chain_policy" => {
                c.chain_policy = choice(
                    key,
                    value,
                    &[("majority", ChainPolicy::Majority), ("discard", ChainPolicy::Discard)],
                )?
            }
            "samples_per_epoch" => c.samples_per_epoch = num(key, value)?,
            "sweeps_per_sample" => c.sweeps_per_sample = num(key, value)?,
            "burn_in" => c.burn_in = num(key, value)?,
            "learning_rate" => c.learning_rate = num(key, value)?,
            "epochs" => c.epochs = num(key, value)?,
            "seed" => c.seed = num(key, value)?,
            "init_std" => c.init_std = num(key, value)?,
            "window" => c.window = num(key, value)?,
            "tolerance" => c.tolerance = num(key, value)?,
            "activation" => {
                c.activation = choice(key, value, &[("exact", Activation::Exact), ("lut", Activation::Lut)])?
            }
            "update_order" => {
                c.update_order = choice(
                    key,
                    value,
                    &[("sequential", UpdateOrder::Sequential), ("colored", UpdateOrder::Colored)],
                )?
            }
            "record_timing" => c.record_timing = num(key, value)?,
            other => return Err(bad(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| bad(pair.trim(), "expected key=value"))?;
        self.set(key.trim(), value)
    }

    pub fn read_text(&mut self, text: &str) -> Result<()> {
        for (k, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line: k + 1,
                msg: format!("expected key = value, got `{content}`"),
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn build(self) -> Result<TrainConfig> {
        self.cfg.validate()?;
        Ok(self.cfg)
    }
}

pub fn parse_config(text: &str, base: TrainConfig) -> Result<TrainConfig> {
    let mut b = ConfigBuilder::new(base);
    b.read_text(text)?;
    b.build()
}

/// Every key, one per line, in a form `parse_config` reads back exactly.
pub fn format_config(c: &TrainConfig) -> String {
    let pick = |b: bool, yes: &'static str, no: &'static str| if b { yes } else { no };
    let endpoint = match &c.sampler {
        SamplerKind::Remote(e) => e.as_str(),
        _ => "",
    };
    let chimera = match c.chimera {
        Some((m, n, l)) => format!("{m},{n},{l}"),
        None => "auto".into(),
    };
    let mut lines = vec![
        format!("n_spins = {}", c.n_spins),
        format!("coupling = {}", c.coupling),
        format!("gamma = {}", c.gamma),
        format!("boundary = {}", pick(c.periodic, "periodic", "open")),
        format!("alpha = {}", c.alpha),
        format!("sampler = {}", c.sampler),
    ];
    if !endpoint.is_empty() {
        lines.push(format!("endpoint = {endpoint}"));
    }
    lines.extend([
        format!("mode = {}", c.mode),
        format!("chimera = {chimera}"),
        format!("chain_strength = {}", c.chain_strength),
        format!(
            "chain_policy = {}",
            pick(c.chain_policy == ChainPolicy::Majority, "majority", "discard")
        ),
        format!("samples_per_epoch = {}", c.samples_per_epoch),
        format!("sweeps_per_sample = {}", c.sweeps_per_sample),
        format!("burn_in = {}", c.burn_in),
        format!("learning_rate = {}", c.learning_rate),
        format!("epochs = {}", c.epochs),
        format!("seed = {}", c.seed),
        format!("init_std = {}", c.init_std),
        format!("window = {}", c.window),
        format!("tolerance = {}", c.tolerance),
        format!("activation = {}", pick(c.activation == Activation::Exact, "exact", "lut")),
        format!(
            "update_order = {}",
            pick(c.update_order == UpdateOrder::Sequential, "sequential", "colored")
        ),
        format!("record_timing = {}", c.record_timing),
    ]);
    lines.join("\n") + "\n"
}

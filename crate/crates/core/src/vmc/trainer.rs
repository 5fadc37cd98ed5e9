use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use log::debug;

use super::estimator::{gradient_from, row_stats, LogicalBatch};
use crate::error::{Error, Result};
use crate::link::{InProcessSession, RemoteSession, RunRequest, SamplerSession};
use crate::pbit::{Activation, UpdateOrder};
use crate::rbm::{effective_sampler_params, RbmParams, SamplingMode};
use crate::tfim::{TfimModel, MAX_EXACT_SPINS};
use crate::topology::{decode_batch, embed_bipartite, map_weights, ChainPolicy, ChimeraTopology, Embedding};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    /// Every configuration, weighted by `psi^2`. Noise-free.
    ExactEnumeration,
    /// The emulated p-bit network in this process.
    InProcessPbit,
    /// A p-bit server at `host:port`.
    Remote(String),
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::ExactEnumeration => "exact-enum",
            SamplerKind::InProcessPbit => "pbit",
            SamplerKind::Remote(_) => "remote",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    /// `remote` alone needs an endpoint supplied separately.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-enum" | "exact-enumeration" => Ok(SamplerKind::ExactEnumeration),
            "pbit" | "inprocess-pbit" => Ok(SamplerKind::InProcessPbit),
            "remote" => Ok(SamplerKind::Remote(String::new())),
            other => Err(Error::invalid(format!(
                "unknown sampler `{other}` (expected exact-enum, pbit or remote)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub n_spins: usize,
    pub coupling: f64,
    pub gamma: f64,
    pub periodic: bool,
    /// Hidden units per visible unit.
    pub alpha: usize,
    pub sampler: SamplerKind,
    pub mode: SamplingMode,
    /// Chimera `(M, N, L)`; chosen from the RBM shape when `None`.
    pub chimera: Option<(usize, usize, usize)>,
    pub chain_strength: f64,
    pub chain_policy: ChainPolicy,
    pub samples_per_epoch: usize,
    pub sweeps_per_sample: usize,
    pub burn_in: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init_std: f64,
    pub window: usize,
    pub tolerance: f64,
    pub activation: Activation,
    pub update_order: UpdateOrder,
    /// When off, the wall-clock columns are written as zero so reruns are
    /// byte-identical.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::tfim12()
    }
}

impl TrainConfig {
    /// Twelve-spin periodic chain at `J = Gamma = 1` with an `alpha = 4` RBM.
    pub fn tfim12() -> Self {
        TrainConfig {
            n_spins: 12,
            coupling: 1.0,
            gamma: 1.0,
            periodic: true,
            alpha: 4,
            sampler: SamplerKind::ExactEnumeration,
            // at chain strength 1.0 the duplicated layout's 24-long visible
            // chains break too often for training to converge
            mode: SamplingMode::PsiReweight,
            chimera: None,
            chain_strength: 1.0,
            chain_policy: ChainPolicy::Majority,
            samples_per_epoch: 2000,
            sweeps_per_sample: 5,
            burn_in: 200,
            learning_rate: 0.02,
            epochs: 500,
            seed: 1,
            init_std: 0.01,
            window: 20,
            tolerance: 1e-4,
            activation: Activation::Exact,
            update_order: UpdateOrder::Sequential,
            record_timing: true,
        }
    }

    pub fn model(&self) -> Result<TfimModel> {
        TfimModel::uniform(self.n_spins, self.coupling, self.gamma, self.periodic)
    }

    pub fn n_hidden(&self) -> usize {
        self.alpha * self.n_spins
    }

    /// Explicit dimensions, or the smallest `L = 4` lattice holding the
    /// sampler-side RBM.
    pub fn chimera_dims(&self) -> (usize, usize, usize) {
        self.chimera.unwrap_or_else(|| {
            let half = 4;
            let hidden = self.n_hidden() * self.mode.duplication();
            (hidden.div_ceil(half), self.n_spins.div_ceil(half), half)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_spins", self.n_spins),
            ("alpha", self.alpha),
            ("samples_per_epoch", self.samples_per_epoch),
            ("sweeps_per_sample", self.sweeps_per_sample),
            ("window", self.window),
        ];
        for (key, value) in positive {
            if value == 0 {
                return Err(Error::Config {
                    key: key.into(),
                    msg: "must be positive".into(),
                });
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config {
                key: "learning_rate".into(),
                msg: format!("must be positive, got {}", self.learning_rate),
            });
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(Error::Config {
                key: "init_std".into(),
                msg: format!("must be positive, got {}", self.init_std),
            });
        }
        if self.sampler == SamplerKind::ExactEnumeration && self.n_spins > MAX_EXACT_SPINS {
            return Err(Error::Config {
                key: "sampler".into(),
                msg: format!("exact enumeration is limited to {MAX_EXACT_SPINS} spins"),
            });
        }
        if matches!(&self.sampler, SamplerKind::Remote(e) if e.is_empty()) {
            return Err(Error::Config {
                key: "endpoint".into(),
                msg: "remote sampler needs host:port".into(),
            });
        }
        self.model()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub energy_mean: f64,
    pub energy_stderr: f64,
    pub energy_variance: f64,
    pub grad_norm: f64,
    pub broken_chain_rate: f64,
    pub ess: f64,
    pub sample_ms: f64,
    pub train_ms: f64,
}

pub const CSV_HEADER: &str = "epoch,energy_mean,energy_stderr,grad_norm,broken_chain_rate,ess,sample_ms,train_ms";

impl EpochRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.epoch,
            self.energy_mean,
            self.energy_stderr,
            self.grad_norm,
            self.broken_chain_rate,
            self.ess,
            self.sample_ms,
            self.train_ms
        )
    }

    /// Equality ignoring wall-clock columns.
    pub fn same_values(&self, other: &EpochRecord) -> bool {
        let strip = |r: &EpochRecord| EpochRecord {
            sample_ms: 0.0,
            train_ms: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy_mean).collect()
    }

    /// Mean energy of the last `width` epochs.
    pub fn window_mean(&self, width: usize) -> Option<f64> {
        let n = self.records.len();
        (width > 0 && n >= width).then(|| {
            self.records[n - width..].iter().map(|r| r.energy_mean).sum::<f64>() / width as f64
        })
    }

    /// Equality of the trajectories, ignoring wall-clock columns.
    pub fn same_trajectory(&self, other: &TrainHistory) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.same_values(b))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(out, "{}", r.csv_row())?;
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    pub history: TrainHistory,
    pub params: RbmParams,
    pub converged: bool,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The hybrid loop: weights out to the sampler, samples back, local energies
/// and gradients on this side, parameter update, repeat.
pub struct Trainer {
    cfg: TrainConfig,
    model: TfimModel,
    params: RbmParams,
    embedding: Option<Embedding>,
    session: Option<Box<dyn SamplerSession>>,
    history: TrainHistory,
}

impl Trainer {
    /// Builds the sampler named by the config.
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let session: Option<Box<dyn SamplerSession>> = match &cfg.sampler {
            SamplerKind::ExactEnumeration => None,
            SamplerKind::InProcessPbit => Some(Box::new(InProcessSession::with_options(
                cfg.activation,
                cfg.update_order,
            ))),
            SamplerKind::Remote(endpoint) => Some(Box::new(RemoteSession::connect(endpoint)?)),
        };
        Self::build(cfg, session)
    }

    /// Uses a caller-supplied sampler session regardless of `cfg.sampler`.
    pub fn with_session(cfg: TrainConfig, session: Box<dyn SamplerSession>) -> Result<Self> {
        cfg.validate()?;
        Self::build(cfg, Some(session))
    }

    fn build(cfg: TrainConfig, mut session: Option<Box<dyn SamplerSession>>) -> Result<Self> {
        let model = cfg.model()?;
        let params = RbmParams::random(cfg.n_spins, cfg.n_hidden(), cfg.init_std, cfg.seed)?;
        let embedding = match session.as_mut() {
            Some(s) => {
                let (m, n, l) = cfg.chimera_dims();
                let topo = ChimeraTopology::new(m, n, l)?;
                let nh = cfg.n_hidden() * cfg.mode.duplication();
                let mut emb = embed_bipartite(cfg.n_spins, nh, &topo)?;
                emb.chain_strength = cfg.chain_strength;
                s.set_topology((m, n, l))?;
                Some(emb)
            }
            None => None,
        };
        Ok(Trainer {
            cfg,
            model,
            params,
            embedding,
            session,
            history: TrainHistory::default(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn epoch(&self) -> usize {
        self.history.len()
    }

    fn clock(&self, start: Instant) -> f64 {
        if self.cfg.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }

    fn draw(&mut self, epoch: usize) -> Result<(LogicalBatch, f64)> {
        let (Some(session), Some(emb)) = (self.session.as_mut(), self.embedding.as_ref()) else {
            return Ok((LogicalBatch::exact(&self.params)?, 0.0));
        };
        let sp = effective_sampler_params(&self.params, self.cfg.mode);
        let (net, report) = map_weights(&sp, emb, self.cfg.chain_strength)?;
        debug!("epoch {epoch}: {} weights rounded to zero", report.weights_lost);
        let request = RunRequest {
            n_samples: self.cfg.samples_per_epoch as u32,
            sweeps_per_sample: self.cfg.sweeps_per_sample as u32,
            burn_in: self.cfg.burn_in as u32,
            seed: splitmix(self.cfg.seed ^ splitmix(epoch as u64)),
        };
        let batch = session
            .set_weights(net.synapses())
            .and_then(|_| session.run(request))
            .map_err(|e| Error::Sampler {
                epoch,
                source: Box::new(e),
            })?;
        let decoded = decode_batch(&batch, emb, self.cfg.chain_policy)?;
        if decoded.visible.is_empty() {
            return Err(Error::Sampler {
                epoch,
                source: Box::new(Error::invalid("every sample had a broken chain")),
            });
        }
        Ok((LogicalBatch::new(decoded.visible), decoded.broken_chain_rate))
    }

    /// Runs one epoch and appends its record.
    pub fn step(&mut self) -> Result<&EpochRecord> {
        let epoch = self.history.len();
        let t0 = Instant::now();
        let (batch, broken_chain_rate) = self.draw(epoch)?;
        let sample_ms = self.clock(t0);

        let t1 = Instant::now();
        // enumeration already carries psi^2 weights
        let mode = if self.session.is_some() {
            self.cfg.mode
        } else {
            SamplingMode::Psi2Duplicate
        };
        let stats = row_stats(&batch, &self.params, &self.model, mode, true)?;
        let est = &stats.estimate;
        if !est.mean.is_finite() {
            return Err(Error::Numeric(format!("non-finite energy at epoch {epoch}")));
        }
        let grad = gradient_from(&stats, self.params.len());
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        self.params = super::estimator::update_params(&self.params, &grad, self.cfg.learning_rate)
            .map_err(|e| Error::Numeric(format!("epoch {epoch}: {e}")))?;
        let train_ms = self.clock(t1);

        self.history.records.push(EpochRecord {
            epoch,
            energy_mean: est.mean,
            energy_stderr: est.stderr,
            energy_variance: est.variance,
            grad_norm,
            broken_chain_rate,
            ess: est.ess,
            sample_ms,
            train_ms,
        });
        Ok(self.history.records.last().unwrap())
    }

    /// Relative change between the last two windows fell below tolerance.
    pub fn converged(&self) -> bool {
        let w = self.cfg.window;
        let e = self.history.energies();
        if e.len() < 2 * w {
            return false;
        }
        let n = e.len();
        let prev = e[n - 2 * w..n - w].iter().sum::<f64>() / w as f64;
        let cur = e[n - w..].iter().sum::<f64>() / w as f64;
        ((cur - prev) / cur).abs() < self.cfg.tolerance
    }

    /// Steps until the epoch budget is spent or the energy settles, calling
    /// `observer` after each epoch.
    pub fn run_with<F>(&mut self, mut observer: F) -> Result<bool>
    where
        F: FnMut(&EpochRecord, &RbmParams) -> Result<()>,
    {
        while self.history.len() < self.cfg.epochs {
            self.step()?;
            observer(self.history.records.last().unwrap(), &self.params)?;
            if self.converged() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn finish(mut self, converged: bool) -> Result<TrainOutcome> {
        if let Some(s) = self.session.as_mut() {
            s.close()?;
        }
        Ok(TrainOutcome {
            history: self.history,
            params: self.params,
            converged,
        })
    }
}

pub fn train(cfg: TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg)?;
    let converged = trainer.run_with(|_, _| Ok(()))?;
    trainer.finish(converged)
}

//! The boundary between the trainer and the probabilistic computer.
//!
//! A [`SamplerSession`] accepts a topology and a set of fixed-point weights
//! and answers sampling requests. [`InProcessSession`] runs the emulated
//! network directly; [`RemoteSession`] speaks the framed protocol in [`wire`]
//! to a server started with [`serve`], which runs an `InProcessSession` per
//! connection. Both produce bit-identical batches for identical requests.

mod client;
mod server;
pub mod wire;

pub use client::RemoteSession;
pub use server::{serve, spawn_server, ServerOptions};
pub use wire::RunRequest;

use crate::error::{Error, Result};
use crate::pbit::{Activation, PbitNetwork, SampleBatch, Synapses, UpdateOrder};
use crate::topology::ChimeraTopology;

pub trait SamplerSession {
    /// Restricts subsequent weights to the couplers of a Chimera lattice.
    fn set_topology(&mut self, dims: (usize, usize, usize)) -> Result<()>;
    fn set_weights(&mut self, synapses: &Synapses) -> Result<()>;
    /// Samples with the most recently set weights.
    fn run(&mut self, request: RunRequest) -> Result<SampleBatch>;
    fn close(&mut self) -> Result<()>;
}

impl<S: SamplerSession + ?Sized> SamplerSession for Box<S> {
    fn set_topology(&mut self, dims: (usize, usize, usize)) -> Result<()> {
        (**self).set_topology(dims)
    }

    fn set_weights(&mut self, synapses: &Synapses) -> Result<()> {
        (**self).set_weights(synapses)
    }

    fn run(&mut self, request: RunRequest) -> Result<SampleBatch> {
        (**self).run(request)
    }

    fn close(&mut self) -> Result<()> {
        (**self).close()
    }
}

#[derive(Clone, Debug, Default)]
pub struct InProcessSession {
    topology: Option<ChimeraTopology>,
    network: Option<PbitNetwork>,
    activation: Activation,
    order: UpdateOrder,
}

impl InProcessSession {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_options(activation: Activation, order: UpdateOrder) -> Self {
        InProcessSession {
            activation,
            order,
            ..Self::default()
        }
    }

    pub fn network(&self) -> Option<&PbitNetwork> {
        self.network.as_ref()
    }
}

fn ordering(msg: &str) -> Error {
    Error::Protocol {
        code: wire::code::ORDERING,
        msg: msg.into(),
    }
}

fn invalid(msg: String) -> Error {
    Error::Protocol {
        code: wire::code::INVALID,
        msg,
    }
}

impl SamplerSession for InProcessSession {
    fn set_topology(&mut self, (rows, cols, half): (usize, usize, usize)) -> Result<()> {
        let topo = ChimeraTopology::new(rows, cols, half).map_err(|e| invalid(e.to_string()))?;
        self.topology = Some(topo);
        self.network = None;
        Ok(())
    }

    fn set_weights(&mut self, synapses: &Synapses) -> Result<()> {
        if synapses.is_empty() {
            return Err(invalid("network has zero p-bits".into()));
        }
        if let Some(topo) = &self.topology {
            if synapses.len() != topo.node_count() {
                return Err(invalid(format!(
                    "{} p-bits given for a topology of {}",
                    synapses.len(),
                    topo.node_count()
                )));
            }
            if let Some((i, j, _)) = synapses.couplers().find(|&(i, j, _)| !topo.has_coupler(i, j)) {
                return Err(invalid(format!("coupler ({i},{j}) is not wired in the topology")));
            }
        }
        self.network = Some(
            PbitNetwork::from_synapses(synapses.clone())
                .with_activation(self.activation)
                .with_update_order(self.order),
        );
        Ok(())
    }

    fn run(&mut self, req: RunRequest) -> Result<SampleBatch> {
        let net = self
            .network
            .as_mut()
            .ok_or_else(|| ordering("RUN before SET_WEIGHTS"))?;
        net.sample(
            req.n_samples as usize,
            req.sweeps_per_sample as usize,
            req.burn_in as usize,
            req.seed,
        )
        .map_err(|e| invalid(e.to_string()))
    }

    fn close(&mut self) -> Result<()> {
        self.network = None;
        self.topology = None;
        Ok(())
    }
}

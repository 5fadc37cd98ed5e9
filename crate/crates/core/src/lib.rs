//! Software emulation of a p-bit probabilistic computer driving the
//! variational training of a restricted-Boltzmann-machine wavefunction for the
//! periodic transverse-field Ising chain.
//!
//! The pieces, bottom up:
//!
//! - [`fixed`]: saturating s{6}{3} fixed point for every synaptic value
//! - [`pbit`]: the p-bit network and its Gibbs sampler
//! - [`topology`]: Chimera lattices and the biclique minor embedding
//! - [`rbm`]: the wavefunction, flip ratios and log-derivatives
//! - [`tfim`]: local energies and the exact-diagonalisation oracle
//! - [`vmc`]: estimators and the hybrid training loop
//! - [`link`]: sampler sessions, in process or over a framed byte stream
//! - [`cli`]: the `pbit` command-line front end

pub mod cli;
pub mod error;
pub mod fixed;
pub mod link;
pub mod pbit;
pub mod rbm;
pub mod tfim;
pub mod topology;
pub mod vmc;

pub use error::{Error, Result};

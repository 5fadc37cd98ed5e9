//! Variational Monte Carlo on the trainer side: energy and gradient
//! estimators over sample batches, and the training loop that alternates
//! between the sampler and parameter updates.

mod estimator;
mod trainer;

pub use estimator::{estimate_energy, gradient, update_params, EnergyEstimate, LogicalBatch};
pub use trainer::{
    train, EpochRecord, SamplerKind, TrainConfig, TrainHistory, TrainOutcome, Trainer, CSV_HEADER,
};

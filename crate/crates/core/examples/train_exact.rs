//! Trains the twelve-spin chain with noise-free enumeration in place of the
//! sampler and compares against exact diagonalisation.
//!
//! ```bash
//! cargo run --release -p pbit-nqs --example train_exact
//! ```

use pbit_nqs::tfim::exact_ground_energy;
use pbit_nqs::vmc::{train, TrainConfig};

fn main() -> pbit_nqs::Result<()> {
    let cfg = TrainConfig::tfim12();
    let exact = exact_ground_energy(&cfg.model()?)?.ground_energy;
    let out = train(cfg)?;
    for r in out.history.records.iter().step_by(25) {
        println!("epoch {:4}  E = {:+.6}  |g| = {:.4}", r.epoch, r.energy_mean, r.grad_norm);
    }
    let last = out.history.records.last().expect("at least one epoch");
    let rel = (last.energy_mean - exact).abs() / exact.abs();
    println!("final E = {:+.6} after {} epochs, exact {:+.6}, relative error {:.3}%",
        last.energy_mean, out.history.len(), exact, 100.0 * rel);
    Ok(())
}

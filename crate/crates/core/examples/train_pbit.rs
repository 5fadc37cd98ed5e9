//! Trains the twelve-spin chain with samples drawn from the emulated p-bit
//! network on a Chimera lattice, with fixed-point weights and chains of
//! strength 1.0.
//!
//! ```bash
//! cargo run --release -p pbit-nqs --example train_pbit -- psi-reweight 300 1.0
//! ```

use std::env;

use pbit_nqs::rbm::SamplingMode;
use pbit_nqs::tfim::exact_ground_energy;
use pbit_nqs::vmc::{SamplerKind, TrainConfig, Trainer};

fn main() -> pbit_nqs::Result<()> {
    let mut args = env::args().skip(1);
    let mode: SamplingMode = args.next().as_deref().unwrap_or("psi-reweight").parse()?;
    let epochs = args.next().and_then(|s| s.parse().ok()).unwrap_or(300);
    let chain_strength = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let cfg = TrainConfig {
        sampler: SamplerKind::InProcessPbit,
        mode,
        epochs,
        chain_strength,
        ..TrainConfig::tfim12()
    };
    let exact = exact_ground_energy(&cfg.model()?)?.ground_energy;
    let (m, n, l) = cfg.chimera_dims();
    println!("mode {mode}, chimera ({m},{n},{l}) = {} p-bits", 2 * m * n * l);

    let mut trainer = Trainer::new(cfg)?;
    trainer.run_with(|r, _| {
        if r.epoch % 10 == 0 {
            println!(
                "epoch {:4}  E = {:+.4} ± {:.4}  broken {:.3}  ess {:7.1}  {:.0} ms",
                r.epoch, r.energy_mean, r.energy_stderr, r.broken_chain_rate, r.ess,
                r.sample_ms + r.train_ms
            );
        }
        Ok(())
    })?;
    let window = trainer.history().window_mean(20).unwrap_or(f64::NAN);
    println!("final 20-epoch mean {window:+.4}, exact {exact:+.4}, off by {:.2}%",
        100.0 * (window - exact).abs() / exact.abs());
    Ok(())
}

//! Starts a sampler server on a free loopback port and trains a small chain
//! through it, then repeats the run in process to show the histories match.
//!
//! ```bash
//! cargo run --release -p pbit-nqs --example remote_sampler
//! ```

use pbit_nqs::link::{spawn_server, ServerOptions};
use pbit_nqs::vmc::{train, SamplerKind, TrainConfig};

fn main() -> pbit_nqs::Result<()> {
    let (addr, _server) = spawn_server("127.0.0.1:0", ServerOptions::default())?;
    println!("sampler listening on {addr}");
    let cfg = TrainConfig {
        n_spins: 8,
        alpha: 2,
        epochs: 30,
        record_timing: false,
        ..TrainConfig::tfim12()
    };
    let remote = train(TrainConfig {
        sampler: SamplerKind::Remote(addr.to_string()),
        ..cfg.clone()
    })?;
    let local = train(TrainConfig {
        sampler: SamplerKind::InProcessPbit,
        ..cfg
    })?;
    for r in remote.history.records.iter().step_by(5) {
        println!("epoch {:3}  E = {:+.4} ± {:.4}", r.epoch, r.energy_mean, r.energy_stderr);
    }
    println!("remote and in-process histories identical: {}", remote.history == local.history);
    Ok(())
}

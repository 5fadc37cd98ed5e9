//! Ground energy of the transverse-field Ising chain across the critical
//! point, checked against the free-fermion closed form.
//!
//! ```bash
//! cargo run --release -p pbit-nqs --example exact_ground_state -- 12
//! ```

use std::f64::consts::PI;

use pbit_nqs::tfim::{exact_ground_energy, TfimModel};

fn main() -> pbit_nqs::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(12);
    println!("{:>6}  {:>14}  {:>14}  {:>9}", "gamma", "E0", "free fermions", "residual");
    for gamma in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let res = exact_ground_energy(&TfimModel::uniform(n, 1.0, gamma, true)?)?;
        // periodic chains with an even number of spins only
        let ff: f64 = -(0..n / 2)
            .map(|m| 2.0 * (1.0 + gamma * gamma - 2.0 * gamma * (PI * (2 * m + 1) as f64 / n as f64).cos()).sqrt())
            .sum::<f64>();
        println!("{gamma:>6}  {:>14.8}  {ff:>14.8}  {:>9.1e}", res.ground_energy, res.residual);
    }
    Ok(())
}

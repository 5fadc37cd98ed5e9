//! Samples a small random p-bit network and compares the histogram with the
//! Boltzmann law computed by brute force.
//!
//! ```bash
//! cargo run --release -p pbit-nqs --example gibbs_sampling
//! ```

use pbit_nqs::fixed::quantize;
use pbit_nqs::pbit::{PbitNetwork, Synapses, UpdateOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 4;

fn main() -> pbit_nqs::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut s = Synapses::new(N);
    for i in 0..N {
        s.set_bias(i, quantize(rng.gen_range(-0.5..0.5))?)?;
        for j in i + 1..N {
            s.set_coupler(i, j, quantize(rng.gen_range(-0.75..0.75))?)?;
        }
    }
    print!("{}", s.to_text());

    let weight = |k: usize| {
        let m: Vec<f64> = (0..N).map(|i| if k >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let mut e = 0.0;
        for i in 0..N {
            e += s.bias(i).to_f64() * m[i];
            for j in i + 1..N {
                e += s.coupler(i, j).to_f64() * m[i] * m[j];
            }
        }
        e.exp()
    };
    let z: f64 = (0..1 << N).map(weight).sum();

    let mut net = PbitNetwork::from_synapses(s.clone()).with_update_order(UpdateOrder::Colored);
    let batch = net.sample(200_000, 1, 100, 1)?;
    let mut counts = [0usize; 1 << N];
    for row in &batch.rows {
        counts[(0..N).filter(|&i| row[i] == 1).map(|i| 1 << i).sum::<usize>()] += 1;
    }
    let mut tv = 0.0;
    println!("state  sampled   exact");
    for (k, &c) in counts.iter().enumerate() {
        let (p, q) = (c as f64 / batch.rows.len() as f64, weight(k) / z);
        tv += (p - q).abs() / 2.0;
        println!(" {k:04b}  {p:.4}   {q:.4}");
    }
    println!("total variation {tv:.4}");
    Ok(())
}

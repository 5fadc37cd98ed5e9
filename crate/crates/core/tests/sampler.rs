mod common;

use common::{boltzmann, histogram, random_network, total_variation};
use pbit_nqs::fixed::FixedPoint;
use pbit_nqs::pbit::{Activation, PbitNetwork, Synapses, UpdateOrder};

fn tv_of(net: PbitNetwork, samples: usize, seed: u64) -> f64 {
    let exact = boltzmann(net.synapses());
    let n = net.len();
    let mut net = net;
    let batch = net.sample(samples, 1, 100, seed).unwrap();
    total_variation(&histogram(&batch.rows, n), &exact)
}

#[test]
fn random_networks_match_boltzmann() {
    for seed in 0..5 {
        let net = PbitNetwork::from_synapses(random_network(8, 1.0, 100 + seed));
        let tv = tv_of(net, 1_000_000, seed);
        assert!(tv < 0.05, "network {seed}: TV {tv}");
    }
}

#[test]
fn colored_order_and_table_activation_sample_the_same_law() {
    let s = random_network(8, 1.0, 7);
    let colored = PbitNetwork::from_synapses(s.clone()).with_update_order(UpdateOrder::Colored);
    assert!(tv_of(colored, 300_000, 1) < 0.05);
    // the table rounds tanh to 2^-10, which shifts the law by far less than the bound
    let lut = PbitNetwork::from_synapses(s).with_activation(Activation::Lut);
    assert!(tv_of(lut, 300_000, 2) < 0.05);
}

#[test]
fn single_update_is_the_exact_conditional() {
    let s = random_network(6, 1.5, 11);
    let mut net = PbitNetwork::from_synapses(s.clone());
    let state = [1, -1, -1, 1, 1, -1];
    let trials = 200_000;
    for i in 0..6 {
        net.set_state(&state).unwrap();
        net.reseed(i as u64);
        let input = s.bias(i).to_f64()
            + s.neighbors(i)
                .iter()
                .map(|&(j, w)| w.to_f64() * state[j] as f64)
                .sum::<f64>();
        let p_up = (1.0 + input.tanh()) / 2.0;
        let ups = (0..trials).filter(|_| net.update(i) == 1).count() as f64;
        let sigma = (p_up * (1.0 - p_up) / trials as f64).sqrt();
        let freq = ups / trials as f64;
        assert!((freq - p_up).abs() < 4.0 * sigma + 1e-12, "p-bit {i}: {freq} vs {p_up}");
    }
}

#[test]
fn saturated_inputs_are_deterministic() {
    let mut s = Synapses::new(2);
    s.set_bias(0, FixedPoint::MAX).unwrap();
    s.set_bias(1, FixedPoint::MIN).unwrap();
    let mut net = PbitNetwork::from_synapses(s);
    let batch = net.sample(1000, 1, 0, 5).unwrap();
    assert!(batch.rows.iter().all(|r| r == &vec![1, -1]));
}

#[test]
fn fan_in_saturates_instead_of_wrapping() {
    // 9 couplers of +63.875 into p-bit 0 with all neighbours up: exact sum
    // 574.875 saturates to 63.875
    let mut s = Synapses::new(10);
    for j in 1..10 {
        s.set_coupler(0, j, FixedPoint::MAX).unwrap();
    }
    let mut net = PbitNetwork::from_synapses(s);
    net.set_state(&[1; 10]).unwrap();
    assert_eq!(net.input(0), FixedPoint::MAX);
    net.set_state(&[-1; 10]).unwrap();
    assert_eq!(net.input(0), FixedPoint::MIN);
}

#[test]
fn zero_network_is_unbiased() {
    let mut net = PbitNetwork::new(8);
    let batch = net.sample(10_000, 1, 0, 3).unwrap();
    let sigma = (1.0f64 / 10_000.0).sqrt();
    assert!(batch.mean().iter().all(|m| m.abs() < 4.0 * sigma));
}

#[test]
fn same_seed_same_batch() {
    let s = random_network(8, 1.0, 3);
    let mut a = PbitNetwork::from_synapses(s.clone());
    let mut b = PbitNetwork::from_synapses(s);
    assert_eq!(a.sample(500, 3, 10, 9).unwrap(), b.sample(500, 3, 10, 9).unwrap());
    assert_ne!(a.sample(500, 3, 10, 9).unwrap().rows, b.sample(500, 3, 10, 10).unwrap().rows);
}

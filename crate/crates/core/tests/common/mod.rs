//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use pbit_nqs::pbit::{Spin, Synapses};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Index of a bipolar configuration: bit `i` set when `m_i = +1`.
pub fn state_index(m: &[Spin]) -> usize {
    m.iter()
        .enumerate()
        .filter(|(_, &s)| s == 1)
        .map(|(i, _)| 1usize << i)
        .sum()
}

pub fn state_of(index: usize, n: usize) -> Vec<Spin> {
    (0..n).map(|i| if index >> i & 1 == 1 { 1 } else { -1 }).collect()
}

/// `P(m) ∝ exp(sum_i h_i m_i + sum_{i<j} J_ij m_i m_j)` by enumeration.
pub fn boltzmann(s: &Synapses) -> Vec<f64> {
    let n = s.len();
    let log_w: Vec<f64> = (0..1usize << n)
        .map(|k| {
            let m = state_of(k, n);
            let field: f64 = (0..n).map(|i| s.bias(i).to_f64() * m[i] as f64).sum();
            let pair: f64 = s
                .couplers()
                .map(|(i, j, w)| w.to_f64() * (m[i] * m[j]) as f64)
                .sum();
            field + pair
        })
        .collect();
    normalise_log(&log_w)
}

pub fn normalise_log(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

pub fn histogram<'a>(rows: impl IntoIterator<Item = &'a Vec<Spin>>, n: usize) -> Vec<f64> {
    let mut counts = vec![0.0; 1 << n];
    let mut total = 0.0;
    for r in rows {
        counts[state_index(r)] += 1.0;
        total += 1.0;
    }
    counts.iter().map(|c| c / total).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Dense network with every bias and coupler drawn uniformly on the
/// fixed-point grid in `[-range, range]`.
pub fn random_network(n: usize, range: f64, seed: u64) -> Synapses {
    use pbit_nqs::fixed::quantize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Synapses::new(n);
    for i in 0..n {
        s.set_bias(i, quantize(rng.gen_range(-range..=range)).unwrap()).unwrap();
        for j in i + 1..n {
            s.set_coupler(i, j, quantize(rng.gen_range(-range..=range)).unwrap())
                .unwrap();
        }
    }
    s
}

fn kron_all(ops: &[DMatrix<f64>]) -> DMatrix<f64> {
    // site 0 is the least significant bit: kron(op_{n-1}, ..., op_0)
    ops.iter()
        .rev()
        .fold(DMatrix::from_element(1, 1, 1.0), |acc, op| acc.kronecker(op))
}

/// `H = -sum_i J_i Z_i Z_{i+1} - Gamma sum_i X_i` from Kronecker products,
/// basis bit `i` set meaning `Z_i = +1`. `bonds[i]` couples `i` and `i+1 mod n`.
pub fn dense_tfim(bonds: &[f64], gamma: f64) -> DMatrix<f64> {
    let n = bonds.len();
    let id = DMatrix::<f64>::identity(2, 2);
    let z = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let dim = 1 << n;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        if bonds[i] != 0.0 {
            let mut ops = vec![id.clone(); n];
            ops[i] = z.clone();
            ops[(i + 1) % n] = z.clone();
            h -= kron_all(&ops) * bonds[i];
        }
        let mut ops = vec![id.clone(); n];
        ops[i] = x.clone();
        h -= kron_all(&ops) * gamma;
    }
    h
}

pub fn uniform_bonds(n: usize, j: f64, periodic: bool) -> Vec<f64> {
    let mut b = vec![j; n];
    if !periodic {
        b[n - 1] = 0.0;
    }
    b
}

pub fn dense_ground_energy(h: &DMatrix<f64>) -> f64 {
    h.clone().symmetric_eigen().eigenvalues.min()
}

/// Jordan-Wigner ground energy of the periodic chain (even-parity sector):
/// `-sum_m sqrt(J^2 + Gamma^2 - 2 J Gamma cos(pi (2m+1) / N))`.
pub fn free_fermion_energy(n: usize, j: f64, gamma: f64) -> f64 {
    -(0..n)
        .map(|m| {
            let k = std::f64::consts::PI * (2 * m + 1) as f64 / n as f64;
            (j * j + gamma * gamma - 2.0 * j * gamma * k.cos()).sqrt()
        })
        .sum::<f64>()
}

/// `<psi|H|psi> / <psi|psi>` for an explicit amplitude vector.
pub fn rayleigh(h: &DMatrix<f64>, psi: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(psi);
    (v.transpose() * h * &v)[(0, 0)] / v.norm_squared()
}

/// Samples indices from a discrete distribution by inverse CDF.
pub fn draw(p: &[f64], n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cdf = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for x in p {
        acc += x;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c < u).min(p.len() - 1)
        })
        .collect()
}

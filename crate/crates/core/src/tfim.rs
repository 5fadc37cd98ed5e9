//! The 1D transverse-field Ising chain
//! `H = -(sum_i J_{i,i+1} Z_i Z_{i+1} + Gamma sum_i X_i)` with an optional
//! wraparound bond `J_{N,1}`.
//!
//! Basis states are indexed by bit patterns: bit `i` set means spin `i` is
//! `+1`, matching [`crate::rbm::enumerate_configs`].

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pbit::Spin;
use crate::rbm::{enumerate_configs, RbmParams, ThetaCache};

/// Largest chain handled by enumeration and exact diagonalisation.
pub const MAX_EXACT_SPINS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct TfimModel {
    /// `bonds[i]` couples spins `i` and `(i + 1) % N`; the last entry is the
    /// wraparound bond and is zero for an open chain.
    bonds: Vec<f64>,
    gamma: f64,
}

impl TfimModel {
    pub fn new(bonds: Vec<f64>, gamma: f64) -> Result<Self> {
        if bonds.len() < 2 {
            return Err(Error::invalid(format!(
                "chain needs at least 2 spins, got {}",
                bonds.len()
            )));
        }
        if !gamma.is_finite() || bonds.iter().any(|j| !j.is_finite()) {
            return Err(Error::invalid("couplings and field must be finite"));
        }
        Ok(TfimModel { bonds, gamma })
    }

    /// Uniform couplings `j`; `periodic` keeps the wraparound bond.
    pub fn uniform(n: usize, j: f64, gamma: f64, periodic: bool) -> Result<Self> {
        let mut bonds = vec![j; n];
        if !periodic {
            if let Some(last) = bonds.last_mut() {
                *last = 0.0;
            }
        }
        Self::new(bonds, gamma)
    }

    pub fn n_spins(&self) -> usize {
        self.bonds.len()
    }

    pub fn bonds(&self) -> &[f64] {
        &self.bonds
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check(&self, v: &[Spin]) -> Result<()> {
        if v.len() != self.n_spins() {
            return Err(Error::shape(format!(
                "configuration has {} spins, model has {}",
                v.len(),
                self.n_spins()
            )));
        }
        Ok(())
    }

    fn check_exact(&self) -> Result<()> {
        if self.n_spins() > MAX_EXACT_SPINS {
            return Err(Error::TooLarge {
                n: self.n_spins(),
                max: MAX_EXACT_SPINS,
            });
        }
        Ok(())
    }

    fn diagonal_of_bits(&self, bits: usize) -> f64 {
        let n = self.n_spins();
        let spin = |i: usize| if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        -(0..n)
            .map(|i| self.bonds[i] * spin(i) * spin((i + 1) % n))
            .sum::<f64>()
    }

    /// `y = H x` in the product basis without storing the matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_spins();
        for (bits, out) in y.iter_mut().enumerate() {
            let mut acc = self.diagonal_of_bits(bits) * x[bits];
            for i in 0..n {
                acc -= self.gamma * x[bits ^ (1 << i)];
            }
            *out = acc;
        }
    }
}

/// Diagonal energy `-sum_i J_{i,i+1} v_i v_{i+1}`.
pub fn classical_energy(v: &[Spin], m: &TfimModel) -> Result<f64> {
    m.check(v)?;
    let n = v.len();
    Ok(-(0..n)
        .map(|i| m.bonds[i] * (v[i] * v[(i + 1) % n]) as f64)
        .sum::<f64>())
}

/// Anything that can report `psi(flip(v, i)) / psi(v)` for every `i`.
pub trait Wavefunction {
    fn n_visible(&self) -> usize;
    fn flip_ratios(&self, v: &[Spin]) -> Result<Vec<f64>>;
}

impl Wavefunction for RbmParams {
    fn n_visible(&self) -> usize {
        self.nv()
    }

    fn flip_ratios(&self, v: &[Spin]) -> Result<Vec<f64>> {
        let cache = ThetaCache::new(v, self)?;
        Ok((0..self.nv())
            .map(|i| cache.log_ratio_flip(v, i, self).exp())
            .collect())
    }
}

/// `E_loc(v) = <v|H|psi> / <v|psi>`.
pub fn local_energy_of<W: Wavefunction + ?Sized>(v: &[Spin], psi: &W, m: &TfimModel) -> Result<f64> {
    if psi.n_visible() != m.n_spins() {
        return Err(Error::shape(format!(
            "wavefunction has {} visible units, model has {} spins",
            psi.n_visible(),
            m.n_spins()
        )));
    }
    let diag = classical_energy(v, m)?;
    let off: f64 = psi.flip_ratios(v)?.iter().sum();
    Ok(diag - m.gamma * off)
}

pub fn local_energy(v: &[Spin], p: &RbmParams, m: &TfimModel) -> Result<f64> {
    local_energy_of(v, p, m)
}

/// `sum_v psi(v)^2 E_loc(v) / sum_v psi(v)^2` over all `2^N` configurations.
pub fn variational_energy_exact(p: &RbmParams, m: &TfimModel) -> Result<f64> {
    m.check_exact()?;
    let configs: Vec<Vec<Spin>> = enumerate_configs(m.n_spins()).collect();
    let mut log_w = Vec::with_capacity(configs.len());
    let mut e_loc = Vec::with_capacity(configs.len());
    for v in &configs {
        let cache = ThetaCache::new(v, p)?;
        log_w.push(2.0 * cache.log_psi(v, p));
        let ratios: f64 = (0..p.nv()).map(|i| cache.log_ratio_flip(v, i, p).exp()).sum();
        e_loc.push(classical_energy(v, m)? - m.gamma * ratios);
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (lw, e) in log_w.iter().zip(&e_loc) {
        let w = (lw - max).exp();
        num += w * e;
        den += w;
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    pub ground_energy: f64,
    pub ground_vector: Option<Vec<f64>>,
    /// `||H x - E x||` for the normalised Ritz vector.
    pub residual: f64,
    pub iterations: usize,
    pub method: &'static str,
}

const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_MAX_ITER: usize = 400;

/// Lowest eigenpair of `H` by Lanczos with full reorthogonalisation.
pub fn exact_ground_energy(m: &TfimModel) -> Result<SpectrumResult> {
    m.check_exact()?;
    let dim = 1usize << m.n_spins();
    let max_iter = LANCZOS_MAX_ITER.min(dim);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() + 0.5).collect();
    normalize(&mut q);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut best = (f64::NAN, f64::INFINITY, Vec::new());

    for k in 0..max_iter {
        m.apply(&q, &mut w);
        let a = dot(&w, &q);
        alpha.push(a);
        basis.push(q.clone());
        for b in &basis {
            let c = dot(&w, b);
            axpy(-c, b, &mut w);
        }
        // second pass keeps the Krylov basis orthogonal to machine precision
        for b in &basis {
            let c = dot(&w, b);
            axpy(-c, b, &mut w);
        }
        let next = norm(&w);

        let size = alpha.len();
        let mut t = DMatrix::<f64>::zeros(size, size);
        for i in 0..size {
            t[(i, i)] = alpha[i];
            if i + 1 < size {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let idx = eig.eigenvalues.imin();
        let theta = eig.eigenvalues[idx];
        let estimate = (next * eig.eigenvectors[(size - 1, idx)]).abs();
        if estimate < LANCZOS_TOL || next < 1e-14 || k + 1 == max_iter {
            let y = eig.eigenvectors.column(idx);
            let mut x = vec![0.0; dim];
            for (coef, b) in y.iter().zip(&basis) {
                axpy(*coef, b, &mut x);
            }
            normalize(&mut x);
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|c| *c = -*c);
            }
            let residual = residual(m, &x, theta);
            best = (theta, residual, x);
            if residual < 1e-8 {
                return Ok(SpectrumResult {
                    ground_energy: theta,
                    ground_vector: Some(best.2),
                    residual,
                    iterations: k + 1,
                    method: "lanczos",
                });
            }
            if next < 1e-14 {
                break;
            }
        }
        beta.push(next);
        q = w.iter().map(|x| x / next).collect();
    }
    Err(Error::NoConvergence {
        iterations: alpha.len(),
        residual: best.1,
    })
}

fn residual(m: &TfimModel, x: &[f64], e: f64) -> f64 {
    let mut hx = vec![0.0; x.len()];
    m.apply(x, &mut hx);
    hx.iter()
        .zip(x)
        .map(|(h, v)| (h - e * v).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: &mut [f64]) {
    let n = norm(a);
    a.iter_mut().for_each(|x| *x /= n);
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

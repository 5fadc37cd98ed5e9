//! Restricted-Boltzmann-machine wavefunction with real parameters:
//! `psi(v) = exp(sum_i a_i v_i) * prod_j 2 cosh(theta_j)`,
//! `theta_j = b_j + sum_i v_i W_ij`.
//!
//! Parameters live in one flat vector ordered `(a, b, W row-major)`; the same
//! ordering is used for log-derivatives, gradients and checkpoints.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pbit::Spin;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RBM1";

#[derive(Clone, Debug, PartialEq)]
pub struct RbmParams {
    nv: usize,
    nh: usize,
    params: Vec<f64>,
}

impl RbmParams {
    pub fn zeros(nv: usize, nh: usize) -> Self {
        RbmParams {
            nv,
            nh,
            params: vec![0.0; nv + nh + nv * nh],
        }
    }

    /// I.i.d. zero-mean Gaussian entries.
    pub fn random(nv: usize, nh: usize, std_dev: f64, seed: u64) -> Result<Self> {
        let normal = Normal::new(0.0, std_dev)
            .map_err(|e| Error::invalid(format!("bad init std dev {std_dev}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(nv, nh);
        for x in &mut p.params {
            *x = normal.sample(&mut rng);
        }
        Ok(p)
    }

    pub fn from_parts(a: &[f64], b: &[f64], w: &[f64]) -> Result<Self> {
        let (nv, nh) = (a.len(), b.len());
        if w.len() != nv * nh {
            return Err(Error::shape(format!(
                "weight matrix has {} entries, expected {nv}x{nh}",
                w.len()
            )));
        }
        Self::from_flat(nv, nh, [a, b, w].concat())
    }

    pub fn from_flat(nv: usize, nh: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != nv + nh + nv * nh {
            return Err(Error::shape(format!(
                "{} parameters do not fit an RBM with nv={nv}, nh={nh}",
                params.len()
            )));
        }
        if let Some(x) = params.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite RBM parameter {x}")));
        }
        Ok(RbmParams { nv, nh, params })
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn nh(&self) -> usize {
        self.nh
    }

    /// Hidden-to-visible ratio.
    pub fn alpha(&self) -> f64 {
        self.nh as f64 / self.nv as f64
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn a(&self) -> &[f64] {
        &self.params[..self.nv]
    }

    pub fn b(&self) -> &[f64] {
        &self.params[self.nv..self.nv + self.nh]
    }

    pub fn w(&self) -> &[f64] {
        &self.params[self.nv + self.nh..]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.params[self.nv + self.nh + i * self.nh + j]
    }

    fn check_visible(&self, v: &[Spin]) -> Result<()> {
        if v.len() != self.nv {
            return Err(Error::shape(format!(
                "configuration has {} spins, RBM has {} visible units",
                v.len(),
                self.nv
            )));
        }
        Ok(())
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(self.nv as u32).to_le_bytes())?;
        out.write_all(&(self.nh as u32).to_le_bytes())?;
        for x in &self.params {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::invalid("not an RBM checkpoint (bad magic)"));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let nv = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let nh = u32::from_le_bytes(word) as usize;
        let mut params = Vec::with_capacity(nv + nh + nv * nh);
        let mut buf = [0u8; 8];
        for _ in 0..nv + nh + nv * nh {
            input.read_exact(&mut buf)?;
            params.push(f64::from_le_bytes(buf));
        }
        Self::from_flat(nv, nh, params)
    }
}

/// `ln(2 cosh x)` without overflow.
pub(crate) fn log_2cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p()
}

/// Hidden pre-activations `theta_j` for one bound configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaCache {
    theta: Vec<f64>,
}

impl ThetaCache {
    pub fn new(v: &[Spin], p: &RbmParams) -> Result<Self> {
        p.check_visible(v)?;
        let mut theta = p.b().to_vec();
        let w = p.w();
        for (i, &vi) in v.iter().enumerate() {
            let row = &w[i * p.nh..(i + 1) * p.nh];
            let s = vi as f64;
            for (t, &wij) in theta.iter_mut().zip(row) {
                *t += s * wij;
            }
        }
        Ok(ThetaCache { theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// `ln psi(v)` for the configuration this cache was built from.
    pub fn log_psi(&self, v: &[Spin], p: &RbmParams) -> f64 {
        let visible: f64 = p.a().iter().zip(v).map(|(a, &s)| a * s as f64).sum();
        visible + self.theta.iter().map(|&t| log_2cosh(t)).sum::<f64>()
    }

    /// `ln(psi(flip(v, i)) / psi(v))`.
    pub fn log_ratio_flip(&self, v: &[Spin], i: usize, p: &RbmParams) -> f64 {
        let s = v[i] as f64;
        let row = &p.w()[i * p.nh..(i + 1) * p.nh];
        let hidden: f64 = self
            .theta
            .iter()
            .zip(row)
            .map(|(&t, &wij)| log_2cosh(t - 2.0 * wij * s) - log_2cosh(t))
            .sum();
        -2.0 * p.a()[i] * s + hidden
    }

    /// Updates the cache for flipping spin `i`, whose value before the flip
    /// was `old`.
    pub fn flip(&mut self, i: usize, old: Spin, p: &RbmParams) {
        let row = &p.w()[i * p.nh..(i + 1) * p.nh];
        let delta = -2.0 * old as f64;
        for (t, &wij) in self.theta.iter_mut().zip(row) {
            *t += delta * wij;
        }
    }
}

pub fn log_psi(v: &[Spin], p: &RbmParams) -> Result<f64> {
    Ok(ThetaCache::new(v, p)?.log_psi(v, p))
}

/// `psi(v with spin i flipped) / psi(v)`.
pub fn psi_ratio_flip(v: &[Spin], i: usize, p: &RbmParams) -> Result<f64> {
    if i >= p.nv {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: p.nv,
        });
    }
    Ok(ThetaCache::new(v, p)?.log_ratio_flip(v, i, p).exp())
}

/// `O_k = d ln psi / d p_k` in parameter order.
pub fn log_derivatives(v: &[Spin], p: &RbmParams) -> Result<Vec<f64>> {
    let cache = ThetaCache::new(v, p)?;
    let mut out = vec![0.0; p.len()];
    log_derivatives_into(v, &cache, p, &mut out);
    Ok(out)
}

pub(crate) fn log_derivatives_into(v: &[Spin], cache: &ThetaCache, p: &RbmParams, out: &mut [f64]) {
    let (nv, nh) = (p.nv, p.nh);
    for (o, &s) in out[..nv].iter_mut().zip(v) {
        *o = s as f64;
    }
    let (hb, wb) = out[nv..].split_at_mut(nh);
    for (o, &t) in hb.iter_mut().zip(cache.theta()) {
        *o = t.tanh();
    }
    for (i, &s) in v.iter().enumerate() {
        let s = s as f64;
        for (o, &tj) in wb[i * nh..(i + 1) * nh].iter_mut().zip(hb.iter()) {
            *o = s * tj;
        }
    }
}

/// How the sampler's Boltzmann distribution is made to serve `psi^2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// Visible biases doubled and the hidden layer duplicated, so the visible
    /// marginal is exactly `psi(v)^2`.
    #[default]
    Psi2Duplicate,
    /// Parameters unchanged (visible marginal `∝ psi(v)`); estimators apply
    /// self-normalised importance weights `psi(v)`.
    PsiReweight,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::Psi2Duplicate => "psi2-duplicate",
            SamplingMode::PsiReweight => "psi-reweight",
        }
    }

    /// Factor by which the hidden layer grows on the sampler.
    pub fn duplication(self) -> usize {
        match self {
            SamplingMode::Psi2Duplicate => 2,
            SamplingMode::PsiReweight => 1,
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psi2-duplicate" => Ok(SamplingMode::Psi2Duplicate),
            "psi-reweight" => Ok(SamplingMode::PsiReweight),
            other => Err(Error::invalid(format!(
                "unknown sampling mode `{other}` (expected psi2-duplicate or psi-reweight)"
            ))),
        }
    }
}

/// Real-valued Boltzmann-machine parameters handed to the sampler:
/// `P(v, h) ∝ exp(a.v + b.h + v^T W h)` with bipolar units.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerParams {
    pub nv: usize,
    pub nh: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Row-major `nv x nh`.
    pub w: Vec<f64>,
    pub duplication: usize,
}

impl SamplerParams {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.nh + j]
    }
}

pub fn effective_sampler_params(p: &RbmParams, mode: SamplingMode) -> SamplerParams {
    let dup = mode.duplication();
    let nh = p.nh * dup;
    let a = p.a().iter().map(|x| x * dup as f64).collect();
    let b = p.b().repeat(dup);
    let mut w = Vec::with_capacity(p.nv * nh);
    for i in 0..p.nv {
        let row = &p.w()[i * p.nh..(i + 1) * p.nh];
        for _ in 0..dup {
            w.extend_from_slice(row);
        }
    }
    SamplerParams {
        nv: p.nv,
        nh,
        a,
        b,
        w,
        duplication: dup,
    }
}

/// All `2^n` bipolar configurations, index bit `i` set meaning spin `i` is `+1`.
pub fn enumerate_configs(n: usize) -> impl Iterator<Item = Vec<Spin>> {
    (0u64..1 << n).map(move |bits| {
        (0..n)
            .map(|i| if bits >> i & 1 == 1 { 1 } else { -1 })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn flip(v: &[Spin], i: usize) -> Vec<Spin> {
        let mut u = v.to_vec();
        u[i] = -u[i];
        u
    }

    #[test]
    fn zero_params_log_psi() {
        let p = RbmParams::zeros(12, 48);
        let v = vec![1; 12];
        assert!((log_psi(&v, &p).unwrap() - 48.0 * LN_2).abs() < 1e-12);
        assert!((48.0 * LN_2 - 33.27106).abs() < 1e-5);

        let mut p = RbmParams::zeros(12, 48);
        p.as_mut_slice()[0] = 0.5;
        assert!((log_psi(&v, &p).unwrap() - (0.5 + 48.0 * LN_2)).abs() < 1e-12);
    }

    #[test]
    fn log_psi_matches_hidden_sum() {
        let p = RbmParams::random(3, 2, 0.7, 5).unwrap();
        for v in enumerate_configs(3) {
            let mut z = 0.0;
            for h in enumerate_configs(2) {
                let mut e = 0.0;
                for i in 0..3 {
                    e += p.a()[i] * v[i] as f64;
                }
                for j in 0..2 {
                    e += p.b()[j] * h[j] as f64;
                    for i in 0..3 {
                        e += v[i] as f64 * p.weight(i, j) * h[j] as f64;
                    }
                }
                z += e.exp();
            }
            assert!((log_psi(&v, &p).unwrap() - z.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_identities() {
        let p = RbmParams::random(6, 9, 0.4, 11).unwrap();
        for v in enumerate_configs(6).step_by(7) {
            for i in 0..6 {
                let r = psi_ratio_flip(&v, i, &p).unwrap();
                let direct = (log_psi(&flip(&v, i), &p).unwrap() - log_psi(&v, &p).unwrap()).exp();
                assert!((r - direct).abs() <= 1e-12 * direct.abs().max(1.0));
                let back = psi_ratio_flip(&flip(&v, i), i, &p).unwrap();
                assert!((r * back - 1.0).abs() < 1e-12);
            }
        }
        let zero = RbmParams::zeros(4, 8);
        assert_eq!(psi_ratio_flip(&[1, -1, 1, 1], 2, &zero).unwrap(), 1.0);
        assert!(psi_ratio_flip(&[1, -1, 1, 1], 4, &zero).is_err());
    }

    #[test]
    fn cache_flip_tracks_rebuild() {
        let p = RbmParams::random(5, 4, 0.5, 3).unwrap();
        let v = vec![1, -1, -1, 1, 1];
        let mut cache = ThetaCache::new(&v, &p).unwrap();
        cache.flip(2, v[2], &p);
        let rebuilt = ThetaCache::new(&flip(&v, 2), &p).unwrap();
        for (a, b) in cache.theta().iter().zip(rebuilt.theta()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivatives_at_zero_and_single_unit() {
        let v: Vec<Spin> = vec![1, -1, 1];
        let d = log_derivatives(&v, &RbmParams::zeros(3, 2)).unwrap();
        assert_eq!(&d[..3], &[1.0, -1.0, 1.0]);
        assert!(d[3..].iter().all(|&x| x == 0.0));

        let p = RbmParams::from_parts(&[0.0], &[0.0], &[0.3]).unwrap();
        let d = log_derivatives(&[1], &p).unwrap();
        assert!((d[2] - 0.3f64.tanh()).abs() < 1e-15);
        assert!((d[2] - 0.29131).abs() < 1e-5);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = RbmParams::random(4, 3, 0.5, 8).unwrap();
        let v: Vec<Spin> = vec![-1, 1, 1, -1];
        let analytic = log_derivatives(&v, &p).unwrap();
        let h = 1e-5;
        for k in 0..p.len() {
            let mut up = p.clone();
            up.as_mut_slice()[k] += h;
            let mut dn = p.clone();
            dn.as_mut_slice()[k] -= h;
            let fd = (log_psi(&v, &up).unwrap() - log_psi(&v, &dn).unwrap()) / (2.0 * h);
            let rel = (fd - analytic[k]).abs() / analytic[k].abs().max(1e-12);
            assert!(rel < 1e-6, "component {k}: fd {fd} analytic {}", analytic[k]);
        }
    }

    #[test]
    fn spin_flip_symmetry_without_biases() {
        // cosh(b + Wv) = cosh(b - Wv) needs b = 0 as well as a = 0
        let mut p = RbmParams::random(5, 10, 0.6, 2).unwrap();
        p.as_mut_slice()[..15].fill(0.0);
        for v in enumerate_configs(5) {
            let neg: Vec<Spin> = v.iter().map(|s| -s).collect();
            assert_eq!(log_psi(&v, &p).unwrap(), log_psi(&neg, &p).unwrap());
        }
    }

    #[test]
    fn sampler_params_shapes() {
        let zero = RbmParams::zeros(3, 2);
        let dup = effective_sampler_params(&zero, SamplingMode::Psi2Duplicate);
        assert_eq!((dup.nv, dup.nh, dup.duplication), (3, 4, 2));
        assert!(dup.a.iter().chain(&dup.b).chain(&dup.w).all(|&x| x == 0.0));

        let p = RbmParams::random(3, 2, 0.5, 1).unwrap();
        let same = effective_sampler_params(&p, SamplingMode::PsiReweight);
        assert_eq!(same.a, p.a());
        assert_eq!(same.w, p.w());
        let dup = effective_sampler_params(&p, SamplingMode::Psi2Duplicate);
        for i in 0..3 {
            assert_eq!(dup.a[i], 2.0 * p.a()[i]);
            for j in 0..4 {
                assert_eq!(dup.weight(i, j), p.weight(i, j % 2));
            }
        }
        assert!("psi3".parse::<SamplingMode>().is_err());
        assert_eq!("psi-reweight".parse::<SamplingMode>().unwrap(), SamplingMode::PsiReweight);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = RbmParams::random(4, 8, 0.1, 4).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"RBM1");
        assert_eq!(buf.len(), 12 + 8 * p.len());
        assert_eq!(RbmParams::read_checkpoint(&buf[..]).unwrap(), p);
        assert!(RbmParams::read_checkpoint(&buf[..20]).is_err());
        buf[0] = b'X';
        assert!(RbmParams::read_checkpoint(&buf[..]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RbmParams::from_parts(&[0.0; 2], &[0.0; 3], &[0.0; 5]).is_err());
        assert!(RbmParams::from_flat(1, 1, vec![0.0, f64::NAN, 0.0]).is_err());
        assert!(log_psi(&[1, 1], &RbmParams::zeros(3, 1)).is_err());
    }
}

use crate::error::{Error, Result};
use crate::pbit::Spin;
use crate::rbm::{enumerate_configs, log_derivatives_into, RbmParams, SamplingMode, ThetaCache};
use crate::tfim::{classical_energy, TfimModel};

/// Visible configurations handed to the estimators, optionally carrying
/// prior weights (an enumeration "batch" weights each state by `psi^2`).
#[derive(Clone, Debug, PartialEq)]
pub struct LogicalBatch {
    pub rows: Vec<Vec<Spin>>,
    /// Natural-log prior weights, one per row. `None` means equal weights.
    pub log_prior: Option<Vec<f64>>,
}

impl LogicalBatch {
    pub fn new(rows: Vec<Vec<Spin>>) -> Self {
        LogicalBatch { rows, log_prior: None }
    }

    /// Every configuration of `p.nv()` spins weighted by `psi(v)^2`.
    pub fn exact(p: &RbmParams) -> Result<Self> {
        let rows: Vec<Vec<Spin>> = enumerate_configs(p.nv()).collect();
        let log_prior = rows
            .iter()
            .map(|v| Ok(2.0 * ThetaCache::new(v, p)?.log_psi(v, p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(LogicalBatch {
            rows,
            log_prior: Some(log_prior),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    /// `(sum w)^2 / sum w^2`; the row count for equal weights.
    pub ess: f64,
    /// Normalised weights, summing to one.
    pub weights: Vec<f64>,
}

/// Per-row local energies and log-derivatives plus the estimator weights.
pub(crate) struct RowStats {
    pub e_loc: Vec<f64>,
    pub derivs: Option<Vec<f64>>,
    pub estimate: EnergyEstimate,
}

pub(crate) fn row_stats(
    batch: &LogicalBatch,
    p: &RbmParams,
    m: &TfimModel,
    mode: SamplingMode,
    with_derivatives: bool,
) -> Result<RowStats> {
    if batch.is_empty() {
        return Err(Error::invalid("empty sample batch"));
    }
    if p.nv() != m.n_spins() {
        return Err(Error::shape(format!(
            "RBM has {} visible units, model has {} spins",
            p.nv(),
            m.n_spins()
        )));
    }
    if let Some(prior) = &batch.log_prior {
        if prior.len() != batch.len() {
            return Err(Error::shape("prior weights do not match batch rows"));
        }
    }
    let n = batch.len();
    let k = p.len();
    let mut e_loc = Vec::with_capacity(n);
    let mut log_w = Vec::with_capacity(n);
    let mut derivs = with_derivatives.then(|| vec![0.0; n * k]);
    for (r, v) in batch.rows.iter().enumerate() {
        let cache = ThetaCache::new(v, p)?;
        let ratios: f64 = (0..p.nv()).map(|i| cache.log_ratio_flip(v, i, p).exp()).sum();
        e_loc.push(classical_energy(v, m)? - m.gamma() * ratios);
        let mut lw = batch.log_prior.as_ref().map_or(0.0, |pr| pr[r]);
        if mode == SamplingMode::PsiReweight {
            lw += cache.log_psi(v, p);
        }
        log_w.push(lw);
        if let Some(d) = derivs.as_mut() {
            log_derivatives_into(v, &cache, p, &mut d[r * k..(r + 1) * k]);
        }
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mean: f64 = weights.iter().zip(&e_loc).map(|(w, e)| w * e).sum();
    let variance: f64 = weights
        .iter()
        .zip(&e_loc)
        .map(|(w, e)| w * (e - mean).powi(2))
        .sum();
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    Ok(RowStats {
        e_loc,
        derivs,
        estimate: EnergyEstimate {
            mean,
            stderr: (variance / ess).sqrt(),
            variance,
            ess,
            weights,
        },
    })
}

/// Weighted mean of the local energy. With `PsiReweight` the rows are taken
/// to be distributed as `psi` and are reweighted by `psi(v)`.
pub fn estimate_energy(
    batch: &LogicalBatch,
    p: &RbmParams,
    m: &TfimModel,
    mode: SamplingMode,
) -> Result<EnergyEstimate> {
    Ok(row_stats(batch, p, m, mode, false)?.estimate)
}

pub(crate) fn gradient_from(stats: &RowStats, k: usize) -> Vec<f64> {
    let derivs = stats.derivs.as_ref().expect("derivatives requested");
    let w = &stats.estimate.weights;
    let e_mean = stats.estimate.mean;
    let mut o_mean = vec![0.0; k];
    for (r, &wr) in w.iter().enumerate() {
        for (acc, &o) in o_mean.iter_mut().zip(&derivs[r * k..(r + 1) * k]) {
            *acc += wr * o;
        }
    }
    let mut g = vec![0.0; k];
    for (r, &wr) in w.iter().enumerate() {
        let de = wr * (stats.e_loc[r] - e_mean);
        if de == 0.0 {
            continue;
        }
        for ((acc, &o), &om) in g.iter_mut().zip(&derivs[r * k..(r + 1) * k]).zip(&o_mean) {
            *acc += de * (o - om);
        }
    }
    g.iter_mut().for_each(|x| *x *= 2.0);
    g
}

/// Energy gradient `2 (<E O_k> - <E><O_k>)` in parameter order.
pub fn gradient(batch: &LogicalBatch, p: &RbmParams, m: &TfimModel, mode: SamplingMode) -> Result<Vec<f64>> {
    let stats = row_stats(batch, p, m, mode, true)?;
    Ok(gradient_from(&stats, p.len()))
}

/// Plain gradient descent step `p - eta * g`.
pub fn update_params(p: &RbmParams, g: &[f64], eta: f64) -> Result<RbmParams> {
    if g.len() != p.len() {
        return Err(Error::shape(format!(
            "gradient has {} entries, RBM has {} parameters",
            g.len(),
            p.len()
        )));
    }
    if let Some(k) = g.iter().position(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient component {k} ({})",
            g[k]
        )));
    }
    let next = p.as_slice().iter().zip(g).map(|(x, gk)| x - eta * gk).collect();
    RbmParams::from_flat(p.nv(), p.nh(), next)
}

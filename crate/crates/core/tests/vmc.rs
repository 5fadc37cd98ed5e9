mod common;

use common::{draw, normalise_log, state_of};
use pbit_nqs::fixed::quantize;
use pbit_nqs::link::{InProcessSession, RunRequest, SamplerSession};
use pbit_nqs::pbit::{PbitNetwork, SampleBatch, Spin, Synapses};
use pbit_nqs::rbm::{effective_sampler_params, enumerate_configs, log_psi, RbmParams, SamplerParams, SamplingMode};
use pbit_nqs::tfim::{exact_ground_energy, variational_energy_exact, TfimModel};
use pbit_nqs::vmc::{estimate_energy, gradient, train, LogicalBatch, SamplerKind, TrainConfig, Trainer};
use pbit_nqs::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_rbm() -> RbmParams {
    // on the 1/8 grid so a direct p-bit network carries it exactly
    RbmParams::from_parts(&[0.25, -0.125, 0.375], &[0.5, -0.25], &[0.5, -0.375, 0.25, 0.625, -0.5, 0.125]).unwrap()
}

/// Visible marginal of `P(v, h) ∝ exp(a.v + b.h + v^T W h)` by summing the
/// joint over every hidden configuration.
fn joint_marginal(sp: &SamplerParams) -> Vec<f64> {
    let log_w: Vec<f64> = enumerate_configs(sp.nv)
        .map(|v| {
            let terms: Vec<f64> = enumerate_configs(sp.nh)
                .map(|h| {
                    let mut e = 0.0;
                    for i in 0..sp.nv {
                        e += sp.a[i] * v[i] as f64;
                    }
                    for j in 0..sp.nh {
                        e += sp.b[j] * h[j] as f64;
                        for i in 0..sp.nv {
                            e += sp.weight(i, j) * (v[i] * h[j]) as f64;
                        }
                    }
                    e
                })
                .collect();
            let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
        })
        .collect();
    normalise_log(&log_w)
}

fn psi_power(p: &RbmParams, power: f64) -> Vec<f64> {
    normalise_log(
        &enumerate_configs(p.nv())
            .map(|v| power * log_psi(&v, p).unwrap())
            .collect::<Vec<_>>(),
    )
}

#[test]
fn duplicated_hidden_layer_marginal_is_psi_squared() {
    for p in [small_rbm(), RbmParams::random(3, 2, 0.8, 5).unwrap()] {
        let dup = joint_marginal(&effective_sampler_params(&p, SamplingMode::Psi2Duplicate));
        let one = joint_marginal(&effective_sampler_params(&p, SamplingMode::PsiReweight));
        for (k, (d, t)) in dup.iter().zip(psi_power(&p, 2.0)).enumerate() {
            assert!(((d - t) / t).abs() < 1e-10, "state {k}: {d} vs {t}");
        }
        for (o, t) in one.iter().zip(psi_power(&p, 1.0)) {
            assert!(((o - t) / t).abs() < 1e-10);
        }
    }
}

/// Bipartite p-bit network for the sampler-side parameters; visible p-bits
/// first.
fn direct_network(sp: &SamplerParams) -> PbitNetwork {
    let mut s = Synapses::new(sp.nv + sp.nh);
    for i in 0..sp.nv {
        s.set_bias(i, quantize(sp.a[i]).unwrap()).unwrap();
    }
    for j in 0..sp.nh {
        s.set_bias(sp.nv + j, quantize(sp.b[j]).unwrap()).unwrap();
        for i in 0..sp.nv {
            s.set_coupler(i, sp.nv + j, quantize(sp.weight(i, j)).unwrap()).unwrap();
        }
    }
    PbitNetwork::from_synapses(s)
}

fn visible_rows(batch: &SampleBatch, nv: usize) -> Vec<Vec<Spin>> {
    batch.rows.iter().map(|r| r[..nv].to_vec()).collect()
}

#[test]
fn reweighted_and_squared_estimators_agree() {
    let p = small_rbm();
    let model = TfimModel::uniform(3, 1.0, 1.0, true).unwrap();
    let exact = variational_energy_exact(&p, &model).unwrap();
    let mut estimates = Vec::new();
    for (mode, seed) in [(SamplingMode::Psi2Duplicate, 1), (SamplingMode::PsiReweight, 2)] {
        let mut net = direct_network(&effective_sampler_params(&p, mode));
        let batch = net.sample(100_000, 5, 100, seed).unwrap();
        let est = estimate_energy(&LogicalBatch::new(visible_rows(&batch, 3)), &p, &model, mode).unwrap();
        estimates.push(est);
    }
    let (a, b) = (&estimates[0], &estimates[1]);
    let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 4.0 * combined, "{} vs {} (± {combined})", a.mean, b.mean);
    assert!((a.mean - exact).abs() < 4.0 * a.stderr);
    assert!((b.mean - exact).abs() < 4.0 * b.stderr);
    assert!(b.ess < 100_000.0 && b.ess > 10_000.0);
}

fn relative_gradient_error(p: &RbmParams, model: &TfimModel) -> f64 {
    let g = gradient(&LogicalBatch::exact(p).unwrap(), p, model, SamplingMode::Psi2Duplicate).unwrap();
    let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..p.len() {
        let mut plus = p.clone();
        plus.as_mut_slice()[k] += h;
        let mut minus = p.clone();
        minus.as_mut_slice()[k] -= h;
        let fd = (variational_energy_exact(&plus, model).unwrap() - variational_energy_exact(&minus, model).unwrap())
            / (2.0 * h);
        // components far below the largest one are compared against 1e-3 of it
        let denom = g[k].abs().max(1e-3 * scale);
        worst = worst.max((fd - g[k]).abs() / denom);
    }
    worst
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..6 {
        let n = [4, 6, 8][trial % 3];
        let alpha = rng.gen_range(1..=2);
        let gamma = rng.gen_range(0.3..2.0);
        let p = RbmParams::random(n, alpha * n, rng.gen_range(0.05..0.5), trial as u64).unwrap();
        let model = TfimModel::uniform(n, 1.0, gamma, trial % 2 == 0).unwrap();
        let err = relative_gradient_error(&p, &model);
        assert!(err < 1e-5, "N={n} alpha={alpha}: relative error {err}");
    }
}

#[test]
fn estimators_are_unbiased_over_many_batches() {
    let n = 6;
    let p = RbmParams::random(n, 12, 0.4, 3).unwrap();
    let model = TfimModel::uniform(n, 1.0, 1.0, true).unwrap();
    let exact = variational_energy_exact(&p, &model).unwrap();
    for (mode, power) in [(SamplingMode::Psi2Duplicate, 2.0), (SamplingMode::PsiReweight, 1.0)] {
        let dist = psi_power(&p, power);
        let (mut sum, mut var) = (0.0, 0.0);
        for b in 0..100 {
            let rows = draw(&dist, 500, 1000 + b).into_iter().map(|k| state_of(k, n)).collect();
            let est = estimate_energy(&LogicalBatch::new(rows), &p, &model, mode).unwrap();
            sum += est.mean;
            var += est.stderr.powi(2);
        }
        let mean = sum / 100.0;
        let stderr = var.sqrt() / 100.0;
        assert!((mean - exact).abs() < 4.0 * stderr, "{mode}: {mean} vs {exact} (± {stderr})");
    }
}

fn small_cfg(sampler: SamplerKind) -> TrainConfig {
    TrainConfig {
        n_spins: 6,
        alpha: 2,
        sampler,
        epochs: 40,
        samples_per_epoch: 500,
        burn_in: 50,
        record_timing: false,
        ..TrainConfig::tfim12()
    }
}

#[test]
fn classical_limit_concentrates_on_ferromagnets() {
    let cfg = TrainConfig {
        n_spins: 8,
        gamma: 0.0,
        learning_rate: 0.1,
        epochs: 300,
        ..small_cfg(SamplerKind::ExactEnumeration)
    };
    let out = train(cfg).unwrap();
    let model = TfimModel::uniform(8, 1.0, 0.0, true).unwrap();
    let e = variational_energy_exact(&out.params, &model).unwrap();
    assert!((e + 8.0).abs() < 0.08, "energy {e}");
    let dist = psi_power(&out.params, 2.0);
    let ferro = dist[0] + dist[(1 << 8) - 1];
    assert!(ferro > 0.95, "ferromagnetic weight {ferro}");
}

#[test]
fn energies_respect_the_variational_bound() {
    let model = TfimModel::uniform(6, 1.0, 1.0, true).unwrap();
    let e0 = exact_ground_energy(&model).unwrap().ground_energy;
    let exact = train(small_cfg(SamplerKind::ExactEnumeration)).unwrap();
    assert!(exact.history.records.iter().all(|r| r.energy_mean >= e0 - 1e-9));
    for mode in [SamplingMode::PsiReweight, SamplingMode::Psi2Duplicate] {
        let cfg = TrainConfig {
            mode,
            ..small_cfg(SamplerKind::InProcessPbit)
        };
        for r in &train(cfg).unwrap().history.records {
            assert!(r.energy_mean >= e0 - 4.0 * r.energy_stderr, "{mode} epoch {}: {}", r.epoch, r.energy_mean);
        }
    }
}

#[test]
fn full_loop_is_deterministic() {
    for cfg in [
        small_cfg(SamplerKind::InProcessPbit),
        TrainConfig {
            mode: SamplingMode::Psi2Duplicate,
            chain_policy: pbit_nqs::topology::ChainPolicy::Discard,
            chain_strength: 3.0,
            update_order: pbit_nqs::pbit::UpdateOrder::Colored,
            activation: pbit_nqs::pbit::Activation::Lut,
            ..small_cfg(SamplerKind::InProcessPbit)
        },
    ] {
        let a = train(cfg.clone()).unwrap();
        let b = train(cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }
}

/// In-process sampler that starts failing after a number of runs.
struct Flaky {
    inner: InProcessSession,
    runs_left: usize,
}

impl SamplerSession for Flaky {
    fn set_topology(&mut self, dims: (usize, usize, usize)) -> Result<()> {
        self.inner.set_topology(dims)
    }
    fn set_weights(&mut self, s: &Synapses) -> Result<()> {
        self.inner.set_weights(s)
    }
    fn run(&mut self, req: RunRequest) -> Result<SampleBatch> {
        if self.runs_left == 0 {
            return Err(Error::Transport("link lost".into()));
        }
        self.runs_left -= 1;
        self.inner.run(req)
    }
    fn close(&mut self) -> Result<()> {
        self.inner.close()
    }
}

#[test]
fn sampler_failure_carries_epoch() {
    let session = Flaky {
        inner: InProcessSession::new(),
        runs_left: 3,
    };
    let mut trainer = Trainer::with_session(small_cfg(SamplerKind::InProcessPbit), Box::new(session)).unwrap();
    let err = trainer.run_with(|_, _| Ok(())).unwrap_err();
    assert!(matches!(&err, Error::Sampler { epoch: 3, source } if matches!(**source, Error::Transport(_))));
    assert_eq!(trainer.epoch(), 3);
}

#[test]
fn runaway_learning_rate_stops_with_numeric_error() {
    let cfg = TrainConfig {
        learning_rate: 1e12,
        ..small_cfg(SamplerKind::ExactEnumeration)
    };
    let mut trainer = Trainer::new(cfg).unwrap();
    let err = trainer.run_with(|_, _| Ok(())).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err:?}");
    assert!(trainer.params().as_slice().iter().all(|x| x.is_finite()));
}

#[test]
fn duplicated_layout_trains_twelve_spins_with_stronger_chains() {
    let cfg = TrainConfig {
        sampler: SamplerKind::InProcessPbit,
        mode: SamplingMode::Psi2Duplicate,
        chain_strength: 2.0,
        epochs: 300,
        ..TrainConfig::tfim12()
    };
    let e0 = exact_ground_energy(&cfg.model().unwrap()).unwrap().ground_energy;
    let out = train(cfg).unwrap();
    let first = out.history.energies()[..20].iter().sum::<f64>() / 20.0;
    let last = out.history.window_mean(20).unwrap();
    assert!(last < first);
    assert!((last - e0).abs() / e0.abs() < 0.05, "{last} vs {e0}");
}

//! The `pbit` command line: `exact`, `embed`, `train`, `sample` and `serve`.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 runtime or numeric
//! failure, 3 protocol or transport failure.

mod config;
mod plot;

pub use config::{format_config, parse_config, ConfigBuilder, CONFIG_KEYS};
pub use plot::convergence_svg;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::link::wire::encode_samples;
use crate::link::{serve, ServerOptions};
use crate::pbit::{Activation, PbitNetwork, Synapses, UpdateOrder};
use crate::tfim::{exact_ground_energy, TfimModel, MAX_EXACT_SPINS};
use crate::topology::{embed_bipartite, ChimeraTopology, NodeKind};
use crate::vmc::{TrainConfig, Trainer, CSV_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Sampler { source, .. } => exit_code(source),
        Error::Protocol { .. } | Error::Transport(_) => EXIT_PROTOCOL,
        Error::InvalidArgument(_)
        | Error::Capacity(_)
        | Error::TooLarge { .. }
        | Error::Parse { .. }
        | Error::Config { .. }
        | Error::Shape(_)
        | Error::IndexOutOfRange { .. } => EXIT_USAGE,
        Error::NonFinite(_) | Error::NoConvergence { .. } | Error::Numeric(_) | Error::Io(_) => EXIT_RUNTIME,
    }
}

#[derive(Parser, Debug)]
#[command(name = "pbit", version, about = "Emulated p-bit sampler and RBM trainer for the transverse-field Ising chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ground energy of the transverse-field Ising chain by Lanczos.
    Exact(ExactArgs),
    /// Embed a complete bipartite graph into a Chimera lattice.
    Embed(EmbedArgs),
    /// Train an RBM wavefunction.
    Train(TrainArgs),
    /// Draw samples from a p-bit network file.
    Sample(SampleArgs),
    /// Serve the sampler protocol until interrupted.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
struct ExactArgs {
    /// Number of spins (at most 20).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    j: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Periodic boundary (default).
    #[arg(long, conflicts_with = "obc")]
    pbc: bool,
    /// Open boundary.
    #[arg(long)]
    obc: bool,
    #[arg(long, default_value = "exact_report.txt")]
    report: PathBuf,
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("{e}"))?;
    match parts[..] {
        [m, n, l] => Ok((m, n, l)),
        _ => Err("expected M,N,L".into()),
    }
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    nv: usize,
    #[arg(long)]
    nh: usize,
    /// Lattice dimensions `M,N,L`.
    #[arg(long, value_parser = parse_dims)]
    chimera: (usize, usize, usize),
    #[arg(long, default_value_t = 1.0)]
    chain_strength: f64,
    #[arg(long, default_value = "embedding.txt")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Key-value config file; unset keys take preset values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base preset.
    #[arg(long, value_parser = ["tfim12"], default_value = "tfim12")]
    preset: String,
    /// Override any config key, e.g. `--set learning_rate=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    chain_strength: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// Directory for manifest, history, checkpoint and plot.
    #[arg(long, default_value = "run")]
    out_dir: PathBuf,
    /// Also write `convergence.svg`.
    #[arg(long)]
    plot: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Network file (`pbits`, `bias`, `coupler` lines).
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    sweeps: usize,
    #[arg(long, default_value_t = 200)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "samples.bin")]
    out: PathBuf,
    #[arg(long, value_parser = ["exact", "lut"], default_value = "exact")]
    activation: String,
    #[arg(long, value_parser = ["sequential", "colored"], default_value = "sequential")]
    order: String,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Port to listen on; 0 picks a free port.
    #[arg(long, env = "PBIT_PORT", default_value_t = 7878)]
    port: u16,
    #[arg(long, value_parser = ["exact", "lut"], default_value = "exact")]
    activation: String,
    #[arg(long, value_parser = ["sequential", "colored"], default_value = "sequential")]
    order: String,
}

fn activation(name: &str) -> Activation {
    if name == "lut" {
        Activation::Lut
    } else {
        Activation::Exact
    }
}

fn order(name: &str) -> UpdateOrder {
    if name == "colored" {
        UpdateOrder::Colored
    } else {
        UpdateOrder::Sequential
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Exact(a) => cmd_exact(a, out),
        Command::Embed(a) => cmd_embed(a, out),
        Command::Train(a) => cmd_train(a, out, err),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Serve(a) => cmd_serve(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_exact(a: ExactArgs, out: &mut dyn Write) -> Result<()> {
    if a.n > MAX_EXACT_SPINS {
        return Err(Error::TooLarge {
            n: a.n,
            max: MAX_EXACT_SPINS,
        });
    }
    let periodic = !a.obc;
    let model = TfimModel::uniform(a.n, a.j, a.gamma, periodic)?;
    let t0 = Instant::now();
    let res = exact_ground_energy(&model)?;
    let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    let report = format!(
        "n = {}\nj = {}\ngamma = {}\nboundary = {}\nground_energy = {:.10}\nresidual = {:e}\niterations = {}\nwall_ms = {:.1}\n",
        a.n,
        a.j,
        a.gamma,
        if periodic { "periodic" } else { "open" },
        res.ground_energy,
        res.residual,
        res.iterations,
        wall_ms
    );
    fs::write(&a.report, &report)?;
    writeln!(
        out,
        "E0 = {:.8}  (N={}, J={}, Gamma={}, {}; residual {:.1e}, {:.0} ms)",
        res.ground_energy,
        a.n,
        a.j,
        a.gamma,
        if periodic { "pbc" } else { "obc" },
        res.residual,
        wall_ms
    )?;
    writeln!(out, "report written to {}", a.report.display())?;
    Ok(())
}

/// "12×len12 + 48×len3" style summary; equal-length runs within a layer are
/// merged.
fn chain_summary(emb: &crate::topology::Embedding) -> String {
    let mut groups: Vec<(NodeKind, usize, usize)> = Vec::new();
    for node in emb.logical_nodes() {
        let len = emb.chain(node).len();
        match groups.last_mut() {
            Some((kind, count, l)) if *kind == node.kind && *l == len => *count += 1,
            _ => groups.push((node.kind, 1, len)),
        }
    }
    groups
        .iter()
        .map(|(_, count, len)| format!("{count}×len{len}"))
        .collect::<Vec<_>>()
        .join(" + ")
}

fn cmd_embed(a: EmbedArgs, out: &mut dyn Write) -> Result<()> {
    let (m, n, l) = a.chimera;
    let topo = ChimeraTopology::new(m, n, l)?;
    let mut emb = embed_bipartite(a.nv, a.nh, &topo)?;
    emb.chain_strength = a.chain_strength;
    fs::write(&a.out, emb.to_text())?;
    let logical = a.nv * a.nh;
    let chain = emb.chain_couplers().len();
    writeln!(out, "{} p-bits, chains {}", emb.physical_count(), chain_summary(&emb))?;
    writeln!(
        out,
        "couplers: {logical} logical + {chain} chain of {} wired ({} idle)",
        topo.coupler_count(),
        topo.coupler_count() - logical - chain
    )?;
    writeln!(out, "embedding written to {}", a.out.display())?;
    Ok(())
}

fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    // clap restricts the preset to `tfim12`
    debug_assert_eq!(a.preset, "tfim12");
    let mut b = ConfigBuilder::new(TrainConfig::tfim12());
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            key: "config".into(),
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        b.read_text(&text)?;
    }
    for pair in &a.sets {
        b.set_pair(pair)?;
    }
    let flags = [
        ("endpoint", &a.endpoint),
        ("sampler", &a.sampler),
        ("mode", &a.mode),
        ("epochs", &a.epochs),
        ("seed", &a.seed),
        ("learning_rate", &a.learning_rate),
        ("chain_strength", &a.chain_strength),
        ("samples_per_epoch", &a.samples),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            b.set(key, v)?;
        }
    }
    b.build()
}

/// Output locations of a training run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunPaths {
    pub manifest: PathBuf,
    pub history: PathBuf,
    pub checkpoint: PathBuf,
    pub plot: Option<PathBuf>,
}

impl RunPaths {
    pub fn in_dir(dir: &Path, plot: bool) -> Self {
        RunPaths {
            manifest: dir.join("manifest.txt"),
            history: dir.join("history.csv"),
            checkpoint: dir.join("params.rbm"),
            plot: plot.then(|| dir.join("convergence.svg")),
        }
    }
}

/// Resolved config plus provenance as comments; readable by `--config`.
pub fn run_manifest(cfg: &TrainConfig, paths: &RunPaths) -> String {
    let mut s = String::from("# pbit run manifest\n");
    s += &format!("# version = {}\n", env!("CARGO_PKG_VERSION"));
    s += &format!("# history = {}\n", paths.history.display());
    s += &format!("# checkpoint = {}\n", paths.checkpoint.display());
    if let Some(p) = &paths.plot {
        s += &format!("# plot = {}\n", p.display());
    }
    s + &format_config(cfg)
}

fn write_checkpoint(path: &Path, p: &crate::rbm::RbmParams) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    p.write_checkpoint(&mut f)?;
    f.flush()?;
    Ok(())
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let cfg = resolve_train_config(&a)?;
    fs::create_dir_all(&a.out_dir)?;
    let paths = RunPaths::in_dir(&a.out_dir, a.plot);
    fs::write(&paths.manifest, run_manifest(&cfg, &paths))?;
    writeln!(out, "manifest written to {}", paths.manifest.display())?;

    let exact = (cfg.n_spins <= MAX_EXACT_SPINS)
        .then(|| exact_ground_energy(&cfg.model()?).map(|r| r.ground_energy))
        .transpose()?;
    let mut trainer = Trainer::new(cfg.clone())?;
    let mut csv = BufWriter::new(File::create(&paths.history)?);
    writeln!(csv, "{CSV_HEADER}")?;
    csv.flush()?;
    let every = (cfg.epochs / 20).max(1);
    let result = trainer.run_with(|rec, _| {
        writeln!(csv, "{}", rec.csv_row())?;
        csv.flush()?;
        if rec.epoch % every == 0 {
            writeln!(
                out,
                "epoch {:>4}  E = {:>11.6} ± {:.4}  broken {:.3}",
                rec.epoch, rec.energy_mean, rec.energy_stderr, rec.broken_chain_rate
            )?;
        }
        Ok(())
    });
    write_checkpoint(&paths.checkpoint, trainer.params())?;
    if let Some(plot) = &paths.plot {
        let title = format!(
            "N={} J={} Gamma={} alpha={} sampler={}",
            cfg.n_spins, cfg.coupling, cfg.gamma, cfg.alpha, cfg.sampler
        );
        fs::write(plot, convergence_svg(&trainer.history().energies(), exact, &title))?;
    }
    let converged = match result {
        Ok(c) => c,
        Err(e) => {
            writeln!(
                err,
                "training stopped after {} epochs; history in {}, checkpoint in {}",
                trainer.epoch(),
                paths.history.display(),
                paths.checkpoint.display()
            )?;
            return Err(e);
        }
    };
    let outcome = trainer.finish(converged)?;
    let h = &outcome.history;
    let window = cfg.window.min(h.len());
    match (h.window_mean(window), exact) {
        (Some(mean), Some(e0)) => writeln!(
            out,
            "{} epochs{}; last {window} epochs mean {mean:.6}, exact {e0:.6}, relative error {:.3}%",
            h.len(),
            if converged { " (converged)" } else { "" },
            100.0 * ((mean - e0) / e0).abs()
        )?,
        (Some(mean), None) => writeln!(out, "{} epochs; last {window} epochs mean {mean:.6}", h.len())?,
        (None, _) => writeln!(out, "no epochs run; initial parameters saved")?,
    }
    writeln!(
        out,
        "history {}, checkpoint {}",
        paths.history.display(),
        paths.checkpoint.display()
    )?;
    Ok(())
}

fn cmd_sample(a: SampleArgs, out: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.network)?;
    let synapses = Synapses::from_text(&text)?;
    let mut net = PbitNetwork::from_synapses(synapses)
        .with_activation(activation(&a.activation))
        .with_update_order(order(&a.order));
    let batch = net.sample(a.samples, a.sweeps, a.burn_in, a.seed)?;
    fs::write(&a.out, encode_samples(&batch))?;
    let means: Vec<String> = batch.mean().iter().map(|m| format!("{m:+.4}")).collect();
    writeln!(
        out,
        "{} rows of {} p-bits written to {}",
        batch.len(),
        batch.n_bits,
        a.out.display()
    )?;
    writeln!(out, "mean spin: {}", means.join(" "))?;
    Ok(())
}

fn cmd_serve(a: ServeArgs, out: &mut dyn Write) -> Result<()> {
    let listener = TcpListener::bind((a.host.as_str(), a.port))
        .map_err(|e| Error::Transport(format!("cannot bind {}:{}: {e}", a.host, a.port)))?;
    writeln!(out, "listening on {}", listener.local_addr()?)?;
    out.flush()?;
    serve(
        listener,
        ServerOptions {
            activation: activation(&a.activation),
            order: order(&a.order),
        },
    )
}

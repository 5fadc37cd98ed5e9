//! Emulated p-bit network.
//!
//! Each p-bit holds a bipolar state and flips according to
//! `m_i = sgn(tanh(I_i) - r)` with `r` uniform on `(-1, 1)`, where the input
//! `I_i = sum_j W_ij m_j + h_i` is accumulated exactly from fixed-point
//! operands and saturated before the activation. Sweeping every p-bit once in
//! a fixed order is a Gibbs sweep whose stationary distribution is
//! `P(m) ∝ exp(sum_{i<j} W_ij m_i m_j + sum_i h_i m_i)`.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed::{quantize, FixedPoint, RAW_MAX, RAW_MIN};

/// A bipolar value, always exactly `-1` or `+1`.
pub type Spin = i8;

/// Fractional bits stored per activation ROM entry.
pub const ROM_FRAC_BITS: u32 = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    /// `tanh` at full precision on the quantized input.
    #[default]
    Exact,
    /// 1024-entry table indexed by the raw 10-bit input, each entry holding
    /// `tanh` rounded to `ROM_FRAC_BITS` fractional bits.
    Lut,
}

impl Activation {
    pub fn apply(self, input: FixedPoint) -> f64 {
        match self {
            Activation::Exact => input.to_f64().tanh(),
            Activation::Lut => activation_rom()[(input.raw() - RAW_MIN) as usize],
        }
    }
}

fn activation_rom() -> &'static [f64] {
    static ROM: OnceLock<Vec<f64>> = OnceLock::new();
    ROM.get_or_init(|| {
        let scale = (1u32 << ROM_FRAC_BITS) as f64;
        (RAW_MIN..=RAW_MAX)
            .map(|raw| {
                let t = FixedPoint::saturating_from_raw(raw as i32).to_f64().tanh();
                (t * scale).round() / scale
            })
            .collect()
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateOrder {
    /// Ascending index order.
    #[default]
    Sequential,
    /// Greedy graph colouring; colour classes are swept one after another and
    /// no two neighbours share a class, so each class could update at once.
    Colored,
}

/// Biases and symmetric couplers of a p-bit network, zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Synapses {
    biases: Vec<FixedPoint>,
    // Per p-bit neighbour list sorted by neighbour index; zero couplers are
    // never stored.
    adjacency: Vec<Vec<(usize, FixedPoint)>>,
}

impl Synapses {
    pub fn new(n: usize) -> Self {
        Synapses {
            biases: vec![FixedPoint::ZERO; n],
            adjacency: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }

    pub fn biases(&self) -> &[FixedPoint] {
        &self.biases
    }

    pub fn bias(&self, i: usize) -> FixedPoint {
        self.biases[i]
    }

    pub fn set_bias(&mut self, i: usize, value: FixedPoint) -> Result<()> {
        self.check(i)?;
        self.biases[i] = value;
        Ok(())
    }

    pub fn coupler(&self, i: usize, j: usize) -> FixedPoint {
        match self.adjacency.get(i) {
            Some(row) => row
                .binary_search_by_key(&j, |&(k, _)| k)
                .map(|pos| row[pos].1)
                .unwrap_or(FixedPoint::ZERO),
            None => FixedPoint::ZERO,
        }
    }

    /// Sets `W_ij = W_ji`. A zero value removes the coupler.
    pub fn set_coupler(&mut self, i: usize, j: usize, value: FixedPoint) -> Result<()> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Err(Error::invalid(format!("self-coupling on p-bit {i}")));
        }
        Self::put(&mut self.adjacency[i], j, value);
        Self::put(&mut self.adjacency[j], i, value);
        Ok(())
    }

    fn put(row: &mut Vec<(usize, FixedPoint)>, j: usize, value: FixedPoint) {
        match row.binary_search_by_key(&j, |&(k, _)| k) {
            Ok(pos) if value.is_zero() => {
                row.remove(pos);
            }
            Ok(pos) => row[pos].1 = value,
            Err(_) if value.is_zero() => {}
            Err(pos) => row.insert(pos, (j, value)),
        }
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, FixedPoint)] {
        &self.adjacency[i]
    }

    /// Nonzero couplers as `(i, j, W_ij)` with `i < j`, sorted by `(i, j)`.
    pub fn couplers(&self) -> impl Iterator<Item = (usize, usize, FixedPoint)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    pub fn coupler_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn check(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            })
        }
    }

    /// Greedy colouring in index order; no coupler joins two members of a class.
    pub fn color_classes(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut color = vec![usize::MAX; n];
        let mut n_colors = 0;
        for i in 0..n {
            let mut used = vec![false; self.adjacency[i].len() + 1];
            for &(j, _) in &self.adjacency[i] {
                if color[j] < used.len() {
                    used[color[j]] = true;
                }
            }
            color[i] = used.iter().position(|u| !u).unwrap();
            n_colors = n_colors.max(color[i] + 1);
        }
        (0..n_colors)
            .map(|c| (0..n).filter(|&i| color[i] == c).collect())
            .collect()
    }
}

/// Plain-text network description:
///
/// ```text
/// # comment
/// pbits 8
/// bias 0 0.5
/// coupler 0 1 -1.25
/// ```
///
/// Values are rounded to the nearest representable fixed-point value; values
/// outside the representable range are rejected. Unlisted biases and couplers
/// are zero.
impl Synapses {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut net: Option<Synapses> = None;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |msg: String| Error::Parse { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let index = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad index `{s}`")));
            let value = |s: &str| -> Result<FixedPoint> {
                let x: f64 = s.parse().map_err(|_| err(format!("bad value `{s}`")))?;
                if !(FixedPoint::MIN.to_f64()..=FixedPoint::MAX.to_f64()).contains(&x) {
                    return Err(err(format!(
                        "value {x} outside [{}, {}]",
                        FixedPoint::MIN.to_f64(),
                        FixedPoint::MAX.to_f64()
                    )));
                }
                quantize(x).map_err(|e| err(e.to_string()))
            };
            match (fields[0], &fields[1..], net.as_mut()) {
                ("pbits", [n], None) => {
                    let n = index(n)?;
                    if n == 0 {
                        return Err(err("network needs at least one p-bit".into()));
                    }
                    net = Some(Synapses::new(n));
                }
                ("pbits", _, Some(_)) => return Err(err("`pbits` given twice".into())),
                (_, _, None) => return Err(err("expected `pbits N` before any weights".into())),
                ("bias", [i, v], Some(s)) => {
                    let i = index(i)?;
                    s.set_bias(i, value(v)?).map_err(|e| err(e.to_string()))?;
                }
                ("coupler", [i, j, v], Some(s)) => {
                    let (i, j) = (index(i)?, index(j)?);
                    s.set_coupler(i, j, value(v)?).map_err(|e| err(e.to_string()))?;
                }
                (kw, _, _) => return Err(err(format!("cannot read `{content}` (keyword `{kw}`)"))),
            }
        }
        net.ok_or(Error::Parse {
            line: text.lines().count().max(1),
            msg: "missing `pbits N`".into(),
        })
    }

    /// Writes nonzero biases and couplers only.
    pub fn to_text(&self) -> String {
        let mut out = format!("pbits {}\n", self.len());
        for (i, b) in self.biases.iter().enumerate().filter(|(_, b)| !b.is_zero()) {
            out += &format!("bias {i} {}\n", b.to_f64());
        }
        for (i, j, w) in self.couplers() {
            out += &format!("coupler {i} {j} {}\n", w.to_f64());
        }
        out
    }
}

/// One recorded run of the sampler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleBatch {
    pub n_bits: usize,
    pub rows: Vec<Vec<Spin>>,
    pub seed: u64,
    pub sweeps_per_sample: usize,
    pub burn_in_sweeps: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Per-bit mean of the recorded states.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_bits];
        for row in &self.rows {
            for (a, &m) in acc.iter_mut().zip(row) {
                *a += m as f64;
            }
        }
        let n = self.rows.len().max(1) as f64;
        acc.iter().map(|a| a / n).collect()
    }
}

/// The emulated probabilistic computer.
#[derive(Clone, Debug)]
pub struct PbitNetwork {
    synapses: Synapses,
    state: Vec<Spin>,
    rng: ChaCha8Rng,
    activation: Activation,
    order: UpdateOrder,
    sweep_order: Option<Vec<usize>>,
}

impl PbitNetwork {
    /// `n` p-bits, no couplers, zero biases, all states `+1`.
    pub fn new(n: usize) -> Self {
        Self::from_synapses(Synapses::new(n))
    }

    pub fn from_synapses(synapses: Synapses) -> Self {
        let n = synapses.len();
        PbitNetwork {
            synapses,
            state: vec![1; n],
            rng: ChaCha8Rng::seed_from_u64(0),
            activation: Activation::default(),
            order: UpdateOrder::default(),
            sweep_order: None,
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    pub fn synapses(&self) -> &Synapses {
        &self.synapses
    }

    pub fn into_synapses(self) -> Synapses {
        self.synapses
    }

    pub fn set_bias(&mut self, i: usize, value: FixedPoint) -> Result<()> {
        self.synapses.set_bias(i, value)
    }

    pub fn set_coupler(&mut self, i: usize, j: usize, value: FixedPoint) -> Result<()> {
        self.sweep_order = None;
        self.synapses.set_coupler(i, j, value)
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_update_order(mut self, order: UpdateOrder) -> Self {
        self.order = order;
        self.sweep_order = None;
        self
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn update_order(&self) -> UpdateOrder {
        self.order
    }

    pub fn state(&self) -> &[Spin] {
        &self.state
    }

    pub fn set_state(&mut self, state: &[Spin]) -> Result<()> {
        if state.len() != self.len() {
            return Err(Error::shape(format!(
                "state has {} entries, network has {} p-bits",
                state.len(),
                self.len()
            )));
        }
        if let Some(bad) = state.iter().find(|&&m| m != 1 && m != -1) {
            return Err(Error::invalid(format!("non-bipolar state value {bad}")));
        }
        self.state.copy_from_slice(state);
        Ok(())
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Saturated synaptic input `I_i = sum_j W_ij m_j + h_i`.
    pub fn input(&self, i: usize) -> FixedPoint {
        let acc = self.synapses.neighbors(i).iter().fold(
            self.synapses.bias(i).raw() as i32,
            |acc, &(j, w)| acc + w.raw() as i32 * self.state[j] as i32,
        );
        FixedPoint::saturating_from_raw(acc)
    }

    /// Resamples p-bit `i` given the current state of its neighbours.
    pub fn update(&mut self, i: usize) -> Spin {
        let input = self.input(i);
        let r = uniform_bipolar(&mut self.rng);
        let m = if r < self.activation.apply(input) { 1 } else { -1 };
        self.state[i] = m;
        m
    }

    /// Updates every p-bit exactly once, each update seeing the latest states.
    pub fn gibbs_sweep(&mut self) {
        match self.order {
            UpdateOrder::Sequential => {
                for i in 0..self.len() {
                    self.update(i);
                }
            }
            UpdateOrder::Colored => {
                let order = self
                    .sweep_order
                    .take()
                    .unwrap_or_else(|| self.synapses.color_classes().concat());
                for &i in &order {
                    self.update(i);
                }
                self.sweep_order = Some(order);
            }
        }
    }

    /// Reseeds, draws a random initial state, runs `burn_in_sweeps` sweeps and
    /// then records the state every `sweeps_per_sample` sweeps.
    pub fn sample(
        &mut self,
        n_samples: usize,
        sweeps_per_sample: usize,
        burn_in_sweeps: usize,
        seed: u64,
    ) -> Result<SampleBatch> {
        if self.is_empty() {
            return Err(Error::invalid("cannot sample a network with zero p-bits"));
        }
        if n_samples == 0 || sweeps_per_sample == 0 {
            return Err(Error::invalid(
                "n_samples and sweeps_per_sample must both be at least 1",
            ));
        }
        self.reseed(seed);
        for i in 0..self.len() {
            self.state[i] = if self.rng.gen::<bool>() { 1 } else { -1 };
        }
        for _ in 0..burn_in_sweeps {
            self.gibbs_sweep();
        }
        let mut rows = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            for _ in 0..sweeps_per_sample {
                self.gibbs_sweep();
            }
            rows.push(self.state.clone());
        }
        Ok(SampleBatch {
            n_bits: self.len(),
            rows,
            seed,
            sweeps_per_sample,
            burn_in_sweeps,
        })
    }
}

/// The stochastic neuron: `+1` if `r < tanh(I)`, else `-1`.
pub fn pbit_update(input: FixedPoint, r: f64) -> Spin {
    if r < input.to_f64().tanh() {
        1
    } else {
        -1
    }
}

/// Uniform on the open interval `(-1, 1)`.
fn uniform_bipolar(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let r = rng.gen::<f64>() * 2.0 - 1.0;
        if r > -1.0 {
            return r;
        }
    }
}

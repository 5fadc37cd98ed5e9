use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use log::debug;

use super::chimera::{ChimeraTopology, Qubit, Side};
use crate::error::{Error, Result};
use crate::fixed::{quantize, FixedPoint};
use crate::pbit::{PbitNetwork, SampleBatch, Spin};
use crate::rbm::SamplerParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Visible,
    Hidden,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Visible => "visible",
            NodeKind::Hidden => "hidden",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogicalNode {
    pub kind: NodeKind,
    pub index: usize,
}

/// Logical RBM nodes mapped onto vertex-disjoint chains of physical p-bits.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    topology: ChimeraTopology,
    nv: usize,
    nh: usize,
    // visible chains first, then hidden; each sorted ascending
    chains: Vec<Vec<usize>>,
    // edge_map[v * nh + h] = (p-bit in chain(v), p-bit in chain(h))
    edge_map: Vec<(usize, usize)>,
    pub chain_strength: f64,
}

impl Embedding {
    /// Validates chains against the topology and builds the logical-edge map.
    pub fn from_chains(
        topology: ChimeraTopology,
        visible: Vec<Vec<usize>>,
        hidden: Vec<Vec<usize>>,
        chain_strength: f64,
    ) -> Result<Self> {
        let (nv, nh) = (visible.len(), hidden.len());
        let mut chains: Vec<Vec<usize>> = visible.into_iter().chain(hidden).collect();
        let mut owner = HashMap::new();
        for (c, chain) in chains.iter_mut().enumerate() {
            if chain.is_empty() {
                return Err(Error::invalid(format!("chain {c} is empty")));
            }
            chain.sort_unstable();
            for &q in chain.iter() {
                if q >= topology.node_count() {
                    return Err(Error::IndexOutOfRange {
                        index: q,
                        len: topology.node_count(),
                    });
                }
                if owner.insert(q, c).is_some() {
                    return Err(Error::invalid(format!("p-bit {q} belongs to two chains")));
                }
            }
            if !is_connected(&topology, chain) {
                return Err(Error::invalid(format!("chain {c} is not connected")));
            }
        }

        let mut edge_map = vec![None; nv * nh];
        for &(a, b, _) in topology.couplers() {
            let (Some(&ca), Some(&cb)) = (owner.get(&a), owner.get(&b)) else {
                continue;
            };
            let (v, h, pv, ph) = match (ca < nv, cb < nv) {
                (true, false) => (ca, cb - nv, a, b),
                (false, true) => (cb, ca - nv, b, a),
                _ => continue,
            };
            let slot = &mut edge_map[v * nh + h];
            if slot.is_some() {
                return Err(Error::invalid(format!(
                    "logical edge (v{v}, h{h}) has more than one physical coupler"
                )));
            }
            *slot = Some((pv, ph));
        }
        let edge_map = edge_map
            .into_iter()
            .enumerate()
            .map(|(e, slot)| {
                slot.ok_or_else(|| {
                    Error::invalid(format!(
                        "logical edge (v{}, h{}) has no physical coupler",
                        e / nh,
                        e % nh
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Embedding {
            topology,
            nv,
            nh,
            chains,
            edge_map,
            chain_strength,
        })
    }

    pub fn topology(&self) -> &ChimeraTopology {
        &self.topology
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn nh(&self) -> usize {
        self.nh
    }

    pub fn logical_nodes(&self) -> impl Iterator<Item = LogicalNode> {
        let (nv, nh) = (self.nv, self.nh);
        (0..nv)
            .map(|index| LogicalNode {
                kind: NodeKind::Visible,
                index,
            })
            .chain((0..nh).map(|index| LogicalNode {
                kind: NodeKind::Hidden,
                index,
            }))
    }

    pub fn chain(&self, node: LogicalNode) -> &[usize] {
        match node.kind {
            NodeKind::Visible => &self.chains[node.index],
            NodeKind::Hidden => &self.chains[self.nv + node.index],
        }
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    /// Physical p-bits covered by chains.
    pub fn physical_count(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    /// The unique coupler carrying logical weight `W_vh`, as
    /// `(visible-side p-bit, hidden-side p-bit)`.
    pub fn edge(&self, v: usize, h: usize) -> (usize, usize) {
        self.edge_map[v * self.nh + h]
    }

    /// Couplers joining p-bits of the same chain.
    pub fn chain_couplers(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for chain in &self.chains {
            for (i, &a) in chain.iter().enumerate() {
                for &b in &chain[i + 1..] {
                    if self.topology.has_coupler(a, b) {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }

    /// Writes the plain-text layout: a `chimera M N L` line, a
    /// `chain_strength x` line, then `kind index q0:q1:...` per logical node.
    pub fn to_text(&self) -> String {
        let (m, n, l) = self.topology.dims();
        let mut s = String::new();
        writeln!(s, "# qubit index = ((row * N + col) * 2 + side) * L + k, side V=0 H=1").unwrap();
        writeln!(s, "chimera {m} {n} {l}").unwrap();
        writeln!(s, "chain_strength {}", self.chain_strength).unwrap();
        for node in self.logical_nodes() {
            let labels: Vec<String> = self.chain(node).iter().map(|q| q.to_string()).collect();
            writeln!(s, "{} {} {}", node.kind, node.index, labels.join(":")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut dims = None;
        let mut strength = None;
        let mut visible: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut hidden: Vec<(usize, Vec<usize>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer `{s}`")));
            match fields.as_slice() {
                ["chimera", m, n, l] => dims = Some((num(m)?, num(n)?, num(l)?)),
                ["chain_strength", x] => {
                    strength = Some(x.parse::<f64>().map_err(|_| err(format!("bad number `{x}`")))?)
                }
                [kind @ ("visible" | "hidden"), index, labels] => {
                    let chain = labels.split(':').map(num).collect::<Result<Vec<_>>>()?;
                    let target = if *kind == "visible" {
                        &mut visible
                    } else {
                        &mut hidden
                    };
                    target.push((num(index)?, chain));
                }
                _ => return Err(err(format!("unrecognised line `{line}`"))),
            }
        }
        let (m, n, l) = dims.ok_or(Error::Parse {
            line: 0,
            msg: "missing `chimera M N L` line".into(),
        })?;
        let topology = ChimeraTopology::new(m, n, l)?;
        let order = |mut nodes: Vec<(usize, Vec<usize>)>, kind: &str| {
            nodes.sort_by_key(|(i, _)| *i);
            if nodes.iter().enumerate().any(|(k, (i, _))| k != *i) {
                return Err(Error::invalid(format!("{kind} indices are not 0..n without gaps")));
            }
            Ok(nodes.into_iter().map(|(_, c)| c).collect::<Vec<_>>())
        };
        Self::from_chains(
            topology,
            order(visible, "visible")?,
            order(hidden, "hidden")?,
            strength.unwrap_or(1.0),
        )
    }
}

fn is_connected(topology: &ChimeraTopology, chain: &[usize]) -> bool {
    let members: HashSet<usize> = chain.iter().copied().collect();
    let mut seen = HashSet::from([chain[0]]);
    let mut queue = VecDeque::from([chain[0]]);
    while let Some(q) = queue.pop_front() {
        for &n in topology.neighbors(q) {
            if members.contains(&n) && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == members.len()
}

/// Deterministic embedding of `K_{nv,nh}`: visible node `v` becomes the
/// vertical chain of qubit `v mod L` in column `v / L` across all rows, hidden
/// node `h` the horizontal chain of qubit `h mod L` in row `h / L` across all
/// columns. Each visible/hidden pair then meets in exactly one unit cell.
pub fn embed_bipartite(nv: usize, nh: usize, topology: &ChimeraTopology) -> Result<Embedding> {
    let (m, n, l) = topology.dims();
    if nv > n * l {
        return Err(Error::Capacity(format!(
            "{nv} visible nodes exceed N*L = {n}*{l} = {}",
            n * l
        )));
    }
    if nh > m * l {
        return Err(Error::Capacity(format!(
            "{nh} hidden nodes exceed M*L = {m}*{l} = {}",
            m * l
        )));
    }
    let visible = (0..nv)
        .map(|v| {
            (0..m)
                .map(|row| {
                    topology.index(Qubit {
                        row,
                        col: v / l,
                        side: Side::Vertical,
                        k: v % l,
                    })
                })
                .collect()
        })
        .collect();
    let hidden = (0..nh)
        .map(|h| {
            (0..n)
                .map(|col| {
                    topology.index(Qubit {
                        row: h / l,
                        col,
                        side: Side::Horizontal,
                        k: h % l,
                    })
                })
                .collect()
        })
        .collect();
    Embedding::from_chains(topology.clone(), visible, hidden, 1.0)
}

/// Precision bookkeeping from `map_weights`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MappingReport {
    /// Nonzero logical biases whose per-p-bit share rounded to zero.
    pub biases_lost: usize,
    /// Nonzero logical weights that rounded to zero.
    pub weights_lost: usize,
    /// Largest `|quantized - intended|` over all placed values.
    pub max_quantization_error: f64,
}

/// Places quantized RBM parameters on the physical network: `W_vh` on the
/// unique coupler between the two chains, `chain_strength` on every
/// intra-chain coupler, logical biases split evenly over their chain.
pub fn map_weights(
    params: &SamplerParams,
    emb: &Embedding,
    chain_strength: f64,
) -> Result<(PbitNetwork, MappingReport)> {
    if params.nv != emb.nv || params.nh != emb.nh {
        return Err(Error::shape(format!(
            "parameters are {}x{}, embedding is {}x{}",
            params.nv, params.nh, emb.nv, emb.nh
        )));
    }
    if params.a.len() != params.nv || params.b.len() != params.nh || params.w.len() != params.nv * params.nh {
        return Err(Error::shape("sampler parameter vectors do not match nv/nh"));
    }
    let mut net = PbitNetwork::new(emb.topology.node_count());
    let mut report = MappingReport::default();
    let mut place = |intended: f64, lost: &mut usize| -> Result<FixedPoint> {
        let q = quantize(intended)?;
        report.max_quantization_error = report.max_quantization_error.max((q.to_f64() - intended).abs());
        if q.is_zero() && intended != 0.0 {
            *lost += 1;
        }
        Ok(q)
    };

    let strength = quantize(chain_strength)?;
    for (a, b) in emb.chain_couplers() {
        net.set_coupler(a, b, strength)?;
    }
    let mut biases_lost = 0;
    let mut weights_lost = 0;
    for (c, chain) in emb.chains.iter().enumerate() {
        let logical = if c < emb.nv {
            params.a[c]
        } else {
            params.b[c - emb.nv]
        };
        let share = place(logical / chain.len() as f64, &mut biases_lost)?;
        for &q in chain {
            net.set_bias(q, share)?;
        }
    }
    for v in 0..emb.nv {
        for h in 0..emb.nh {
            let (pv, ph) = emb.edge(v, h);
            let w = place(params.weight(v, h), &mut weights_lost)?;
            net.set_coupler(pv, ph, w)?;
        }
    }
    report.biases_lost = biases_lost;
    report.weights_lost = weights_lost;
    if biases_lost > 0 {
        debug!("{biases_lost} nonzero logical biases rounded to zero after splitting over chains");
    }
    Ok((net, report))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ChainPolicy {
    /// Majority vote; ties go to the chain's lowest-indexed p-bit.
    #[default]
    Majority,
    /// Drop samples in which any chain disagrees with itself.
    Discard,
}

/// Decodes one physical state into logical spins (visible then hidden) and the
/// number of broken chains.
pub fn readout(state: &[Spin], emb: &Embedding) -> Result<(Vec<Spin>, usize)> {
    if state.len() != emb.topology.node_count() {
        return Err(Error::shape(format!(
            "state has {} p-bits, topology has {}",
            state.len(),
            emb.topology.node_count()
        )));
    }
    let mut broken = 0;
    let spins = emb
        .chains
        .iter()
        .map(|chain| {
            let sum: i32 = chain.iter().map(|&q| state[q] as i32).sum();
            if sum.unsigned_abs() as usize != chain.len() {
                broken += 1;
            }
            match sum.signum() {
                0 => state[chain[0]],
                s => s as Spin,
            }
        })
        .collect();
    Ok((spins, broken))
}

/// Sets every p-bit of each chain to its logical value.
pub fn broadcast(logical: &[Spin], emb: &Embedding) -> Result<Vec<Spin>> {
    if logical.len() != emb.chains.len() {
        return Err(Error::shape(format!(
            "{} logical spins for {} chains",
            logical.len(),
            emb.chains.len()
        )));
    }
    let mut state = vec![1; emb.topology.node_count()];
    for (chain, &s) in emb.chains.iter().zip(logical) {
        for &q in chain {
            state[q] = s;
        }
    }
    Ok(state)
}

/// Visible configurations decoded from a physical batch.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedBatch {
    pub visible: Vec<Vec<Spin>>,
    /// Broken chains over all (sample, chain) pairs.
    pub broken_chain_rate: f64,
    pub discarded: usize,
}

pub fn decode_batch(batch: &SampleBatch, emb: &Embedding, policy: ChainPolicy) -> Result<DecodedBatch> {
    let mut visible = Vec::with_capacity(batch.rows.len());
    let mut broken_total = 0;
    let mut discarded = 0;
    for row in &batch.rows {
        let (mut spins, broken) = readout(row, emb)?;
        broken_total += broken;
        if broken > 0 && policy == ChainPolicy::Discard {
            discarded += 1;
            continue;
        }
        spins.truncate(emb.nv);
        visible.push(spins);
    }
    let pairs = (batch.rows.len() * emb.chains.len()).max(1);
    Ok(DecodedBatch {
        visible,
        broken_chain_rate: broken_total as f64 / pairs as f64,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::{effective_sampler_params, RbmParams, SamplingMode};
    use crate::topology::CouplerKind;

    fn k12_48() -> Embedding {
        embed_bipartite(12, 48, &ChimeraTopology::new(12, 3, 4).unwrap()).unwrap()
    }

    #[test]
    fn k12_48_budget() {
        let emb = k12_48();
        assert_eq!(emb.physical_count(), 288);
        assert!(emb.chains()[..12].iter().all(|c| c.len() == 12));
        assert!(emb.chains()[12..].iter().all(|c| c.len() == 3));
        let mut used = HashSet::new();
        for v in 0..12 {
            for h in 0..48 {
                let (a, b) = emb.edge(v, h);
                assert!(used.insert((a.min(b), a.max(b))));
            }
        }
        let intra: HashSet<_> = emb
            .topology()
            .couplers()
            .iter()
            .filter(|c| c.2 == CouplerKind::IntraCell)
            .map(|c| (c.0, c.1))
            .collect();
        assert_eq!(used, intra);
    }

    #[test]
    fn single_cell_identity() {
        let topo = ChimeraTopology::new(1, 1, 4).unwrap();
        let emb = embed_bipartite(4, 4, &topo).unwrap();
        for (c, chain) in emb.chains().iter().enumerate() {
            assert_eq!(chain, &vec![c]);
        }
        assert!(emb.chain_couplers().is_empty());
    }

    #[test]
    fn capacity_errors_name_the_bound() {
        let topo = ChimeraTopology::new(12, 3, 4).unwrap();
        let err = embed_bipartite(13, 48, &topo).unwrap_err();
        assert!(matches!(&err, Error::Capacity(m) if m.contains("N*L")));
        let err = embed_bipartite(12, 49, &topo).unwrap_err();
        assert!(matches!(&err, Error::Capacity(m) if m.contains("M*L")));
    }

    #[test]
    fn map_weights_places_chain_and_logical_values() {
        let emb = k12_48();
        let zero = effective_sampler_params(&RbmParams::zeros(12, 48), SamplingMode::PsiReweight);
        let (net, _) = map_weights(&zero, &emb, 1.0).unwrap();
        let chain: HashSet<_> = emb.chain_couplers().into_iter().collect();
        assert_eq!(chain.len(), 12 * 11 + 48 * 2);
        for (i, j, w) in net.synapses().couplers() {
            assert!(chain.contains(&(i, j)));
            assert_eq!(w, FixedPoint::ONE);
        }
        assert_eq!(net.synapses().coupler_count(), chain.len());

        let mut p = RbmParams::random(12, 48, 0.8, 3).unwrap();
        p.as_mut_slice()[0] = 0.6;
        let sp = effective_sampler_params(&p, SamplingMode::PsiReweight);
        let (net, report) = map_weights(&sp, &emb, 1.0).unwrap();
        for v in 0..12 {
            for h in 0..48 {
                let (a, b) = emb.edge(v, h);
                assert_eq!(net.synapses().coupler(a, b), quantize(p.weight(v, h)).unwrap());
            }
        }
        // 0.6 spread over a length-12 chain is 0.05, below half an LSB
        for &q in &emb.chains()[0] {
            assert!(net.synapses().bias(q).is_zero());
        }
        assert!(report.biases_lost >= 1);
        assert!(report.max_quantization_error <= 0.0625);
    }

    #[test]
    fn map_weights_shape_mismatch() {
        let emb = k12_48();
        let sp = effective_sampler_params(&RbmParams::zeros(12, 48), SamplingMode::Psi2Duplicate);
        assert!(matches!(map_weights(&sp, &emb, 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn readout_examples() {
        let topo = ChimeraTopology::new(12, 1, 1).unwrap();
        let emb = embed_bipartite(1, 0, &topo).unwrap();
        let mut state = vec![1; topo.node_count()];
        assert_eq!(readout(&state, &emb).unwrap(), (vec![1], 0));
        let chain = emb.chains()[0].clone();
        for &q in &chain[..5] {
            state[q] = -1;
        }
        assert_eq!(readout(&state, &emb).unwrap(), (vec![1], 1));
        state[chain[5]] = -1;
        assert_eq!(readout(&state, &emb).unwrap(), (vec![-1], 1));
        assert!(readout(&state[1..], &emb).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let emb = k12_48();
        let text = emb.to_text();
        assert_eq!(Embedding::from_text(&text).unwrap(), emb);
        assert!(text.lines().any(|l| l.starts_with("hidden 47 ")));

        let broken = text.replace("visible 0 ", "visible 0 1:");
        assert!(Embedding::from_text(&broken).is_err());
        let bad = text.replace("chain_strength 1", "chain_strength one");
        assert!(matches!(Embedding::from_text(&bad), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn validation_rejects_overlap_and_disconnection() {
        let topo = ChimeraTopology::new(2, 1, 2).unwrap();
        let v0 = topo.index(Qubit { row: 0, col: 0, side: Side::Vertical, k: 0 });
        let v1 = topo.index(Qubit { row: 1, col: 0, side: Side::Vertical, k: 1 });
        let h0 = topo.index(Qubit { row: 0, col: 0, side: Side::Horizontal, k: 0 });
        assert!(Embedding::from_chains(topo.clone(), vec![vec![v0, v1]], vec![vec![h0]], 1.0).is_err());
        assert!(Embedding::from_chains(topo.clone(), vec![vec![v0]], vec![vec![v0]], 1.0).is_err());
        assert!(Embedding::from_chains(topo, vec![vec![v0]], vec![vec![h0]], 1.0).is_ok());
    }
}

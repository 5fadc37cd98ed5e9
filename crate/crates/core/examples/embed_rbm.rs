//! Embeds the 12 x 48 RBM on Chimera(12, 3, 4), maps random weights onto the
//! fixed-point network and reads back a broadcast state.
//!
//! ```bash
//! cargo run -p pbit-nqs --example embed_rbm
//! ```

use pbit_nqs::rbm::{effective_sampler_params, RbmParams, SamplingMode};
use pbit_nqs::topology::{broadcast, embed_bipartite, map_weights, readout, ChimeraTopology, CouplerKind, NodeKind};

fn main() -> pbit_nqs::Result<()> {
    let topo = ChimeraTopology::new(12, 3, 4)?;
    let emb = embed_bipartite(12, 48, &topo)?;
    println!(
        "{} p-bits, {} couplers ({} intra-cell)",
        topo.node_count(),
        topo.coupler_count(),
        topo.count_kind(CouplerKind::IntraCell)
    );
    for kind in [NodeKind::Visible, NodeKind::Hidden] {
        let node = emb.logical_nodes().find(|n| n.kind == kind).unwrap();
        println!("{kind:?} 0 chain: {:?}", emb.chain(node));
    }

    let p = RbmParams::random(12, 48, 0.5, 7)?;
    let (net, report) = map_weights(&effective_sampler_params(&p, SamplingMode::PsiReweight), &emb, 1.0)?;
    println!(
        "mapped {} couplers, worst quantization error {}",
        net.synapses().coupler_count(),
        report.max_quantization_error
    );

    let logical: Vec<i8> = (0..60).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
    let mut state = broadcast(&logical, &emb)?;
    let first = emb.chain(emb.logical_nodes().next().unwrap())[0];
    state[first] = -state[first];
    let (back, broken) = readout(&state, &emb)?;
    println!("one flipped p-bit: {broken} broken chain, majority recovers input: {}", back == logical);

    // the duplicated layout needs twice the rows
    let big = ChimeraTopology::new(24, 3, 4)?;
    println!("12 x 96 on Chimera(24, 3, 4): {} p-bits", embed_bipartite(12, 96, &big)?.physical_count());
    if let Err(e) = embed_bipartite(12, 96, &topo) {
        println!("12 x 96 on Chimera(12, 3, 4): {e}");
    }
    Ok(())
}

//! Chimera hardware graphs and the minor embedding of complete bipartite RBMs
//! onto them.

mod chimera;
mod embedding;

pub use chimera::{ChimeraTopology, CouplerKind, Qubit, Side};
pub use embedding::{
    broadcast, decode_batch, embed_bipartite, map_weights, readout, ChainPolicy, DecodedBatch,
    Embedding, LogicalNode, MappingReport, NodeKind,
};

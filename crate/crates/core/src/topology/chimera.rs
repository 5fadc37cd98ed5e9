use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Vertical = 0,
    Horizontal = 1,
}

/// A p-bit position in the Chimera lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Qubit {
    pub row: usize,
    pub col: usize,
    pub side: Side,
    pub k: usize,
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Vertical => 'V',
            Side::Horizontal => 'H',
        };
        write!(f, "({},{},{},{})", self.row, self.col, side, self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CouplerKind {
    /// Inside one K_{L,L} unit cell.
    IntraCell,
    /// Same-index vertical qubits in adjacent rows.
    InterVertical,
    /// Same-index horizontal qubits in adjacent columns.
    InterHorizontal,
}

/// An `M x N` grid of `K_{L,L}` unit cells.
///
/// Qubits are numbered `((row * N + col) * 2 + side) * L + k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChimeraTopology {
    rows: usize,
    cols: usize,
    half: usize,
    adjacency: Vec<Vec<usize>>,
    couplers: Vec<(usize, usize, CouplerKind)>,
}

impl ChimeraTopology {
    pub fn new(rows: usize, cols: usize, half: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || half == 0 {
            return Err(Error::invalid(format!(
                "chimera dimensions must be positive, got ({rows},{cols},{half})"
            )));
        }
        let mut topo = ChimeraTopology {
            rows,
            cols,
            half,
            adjacency: vec![Vec::new(); 2 * rows * cols * half],
            couplers: Vec::new(),
        };
        let q = |row, col, side, k| Qubit { row, col, side, k };
        for row in 0..rows {
            for col in 0..cols {
                for i in 0..half {
                    for j in 0..half {
                        topo.add(
                            q(row, col, Side::Vertical, i),
                            q(row, col, Side::Horizontal, j),
                            CouplerKind::IntraCell,
                        );
                    }
                    if row + 1 < rows {
                        topo.add(
                            q(row, col, Side::Vertical, i),
                            q(row + 1, col, Side::Vertical, i),
                            CouplerKind::InterVertical,
                        );
                    }
                    if col + 1 < cols {
                        topo.add(
                            q(row, col, Side::Horizontal, i),
                            q(row, col + 1, Side::Horizontal, i),
                            CouplerKind::InterHorizontal,
                        );
                    }
                }
            }
        }
        for row in &mut topo.adjacency {
            row.sort_unstable();
        }
        topo.couplers.sort_unstable_by_key(|&(a, b, _)| (a, b));
        Ok(topo)
    }

    fn add(&mut self, a: Qubit, b: Qubit, kind: CouplerKind) {
        let (a, b) = (self.index(a), self.index(b));
        let (a, b) = (a.min(b), a.max(b));
        self.adjacency[a].push(b);
        self.adjacency[b].push(a);
        self.couplers.push((a, b, kind));
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.half)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn index(&self, q: Qubit) -> usize {
        ((q.row * self.cols + q.col) * 2 + q.side as usize) * self.half + q.k
    }

    pub fn qubit(&self, index: usize) -> Qubit {
        let k = index % self.half;
        let rest = index / self.half;
        let side = if rest % 2 == 0 {
            Side::Vertical
        } else {
            Side::Horizontal
        };
        let cell = rest / 2;
        Qubit {
            row: cell / self.cols,
            col: cell % self.cols,
            side,
            k,
        }
    }

    /// All couplers as `(a, b, kind)` with `a < b`, sorted.
    pub fn couplers(&self) -> &[(usize, usize, CouplerKind)] {
        &self.couplers
    }

    pub fn coupler_count(&self) -> usize {
        self.couplers.len()
    }

    pub fn count_kind(&self, kind: CouplerKind) -> usize {
        self.couplers.iter().filter(|c| c.2 == kind).count()
    }

    pub fn neighbors(&self, index: usize) -> &[usize] {
        &self.adjacency[index]
    }

    pub fn has_coupler(&self, a: usize, b: usize) -> bool {
        a < self.node_count() && self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Proper two-colouring: side parity XOR cell-position parity.
    pub fn color(&self, index: usize) -> usize {
        let q = self.qubit(index);
        (q.side as usize) ^ ((q.row + q.col) % 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let t = ChimeraTopology::new(1, 1, 4).unwrap();
        assert_eq!(t.node_count(), 8);
        assert_eq!(t.coupler_count(), 16);
        assert_eq!(t.count_kind(CouplerKind::IntraCell), 16);
        assert_eq!(t.max_degree(), 4);
    }

    #[test]
    fn chimera_12_3_4_counts() {
        let t = ChimeraTopology::new(12, 3, 4).unwrap();
        assert_eq!(t.node_count(), 288);
        assert_eq!(t.count_kind(CouplerKind::IntraCell), 576);
        assert_eq!(t.count_kind(CouplerKind::InterVertical), 132);
        assert_eq!(t.count_kind(CouplerKind::InterHorizontal), 96);
        assert_eq!(t.coupler_count(), 804);
        assert_eq!(t.max_degree(), 6);
        // corner qubits only reach one neighbouring cell
        assert_eq!(t.neighbors(0).len(), 5);
    }

    #[test]
    fn label_round_trip_and_coloring() {
        let t = ChimeraTopology::new(3, 2, 3).unwrap();
        for i in 0..t.node_count() {
            assert_eq!(t.index(t.qubit(i)), i);
        }
        for &(a, b, _) in t.couplers() {
            assert_ne!(t.color(a), t.color(b));
            assert!(t.has_coupler(a, b) && t.has_coupler(b, a));
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(ChimeraTopology::new(0, 3, 4).is_err());
        assert!(ChimeraTopology::new(1, 0, 4).is_err());
        assert!(ChimeraTopology::new(1, 1, 0).is_err());
    }
}

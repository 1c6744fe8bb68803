//! Slow, obviously-correct reference implementations used by tests and by the
//! structural audit: a plain boolean matrix mirroring the word-packed matrix
//! operations, and a naive graph answering connectivity by search.

use std::collections::BTreeSet;

/// An h-by-h boolean matrix stored as nested vectors. Every operation builds
/// a fresh matrix with straightforward index arithmetic; no bit tricks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefMatrix {
    h: usize,
    cells: Vec<Vec<bool>>,
}

impl RefMatrix {
    /// All-zero matrix of side `h`.
    pub fn zero(h: usize) -> RefMatrix {
        RefMatrix {
            h,
            cells: vec![vec![false; h]; h],
        }
    }

    /// Side length.
    pub fn h(&self) -> usize {
        self.h
    }

    /// Read entry (k, l).
    pub fn get(&self, k: usize, l: usize) -> bool {
        self.cells[k][l]
    }

    /// Write entry (k, l).
    pub fn set(&mut self, k: usize, l: usize, v: bool) {
        self.cells[k][l] = v;
    }

    /// Insert a zero row at `k`, dropping the last row.
    pub fn insert_zero_row(&self, k: usize) -> RefMatrix {
        let mut out = Self::zero(self.h);
        for r in 0..k {
            out.cells[r] = self.cells[r].clone();
        }
        for r in k..self.h - 1 {
            out.cells[r + 1] = self.cells[r].clone();
        }
        out
    }

    /// Insert a zero column at `k`, dropping the last column.
    pub fn insert_zero_col(&self, k: usize) -> RefMatrix {
        let mut out = Self::zero(self.h);
        for r in 0..self.h {
            for c in 0..k {
                out.cells[r][c] = self.cells[r][c];
            }
            for c in k..self.h - 1 {
                out.cells[r][c + 1] = self.cells[r][c];
            }
        }
        out
    }

    /// OR row `k+1` into row `k` and shift later rows up.
    pub fn merge_rows(&self, k: usize) -> RefMatrix {
        let mut out = Self::zero(self.h);
        for r in 0..k {
            out.cells[r] = self.cells[r].clone();
        }
        for c in 0..self.h {
            out.cells[k][c] = self.cells[k][c] || self.cells[k + 1][c];
        }
        for r in k + 2..self.h {
            out.cells[r - 1] = self.cells[r].clone();
        }
        out
    }

    /// OR column `k+1` into column `k` and shift later columns left.
    pub fn merge_cols(&self, k: usize) -> RefMatrix {
        let mut out = Self::zero(self.h);
        for r in 0..self.h {
            for c in 0..k {
                out.cells[r][c] = self.cells[r][c];
            }
            out.cells[r][k] = self.cells[r][k] || self.cells[r][k + 1];
            for c in k + 2..self.h {
                out.cells[r][c - 1] = self.cells[r][c];
            }
        }
        out
    }

    /// Copy rows `a..b` of `src` over rows `target..` of `self`.
    pub fn copy_row_interval(&self, src: &RefMatrix, a: usize, b: usize, target: usize) -> RefMatrix {
        let mut out = self.clone();
        for (i, r) in (a..b).enumerate() {
            out.cells[target + i] = src.cells[r].clone();
        }
        out
    }

    /// Copy columns `a..b` of `src` over columns `target..` of `self`.
    pub fn copy_col_interval(&self, src: &RefMatrix, a: usize, b: usize, target: usize) -> RefMatrix {
        let mut out = self.clone();
        for r in 0..self.h {
            for (i, c) in (a..b).enumerate() {
                out.cells[r][target + i] = src.cells[r][c];
            }
        }
        out
    }

    /// First one in row-major order.
    pub fn find_one(&self) -> Option<(usize, usize)> {
        for k in 0..self.h {
            for l in 0..self.h {
                if self.cells[k][l] {
                    return Some((k, l));
                }
            }
        }
        None
    }

    /// Transposed copy.
    pub fn transpose(&self) -> RefMatrix {
        let mut out = Self::zero(self.h);
        for k in 0..self.h {
            for l in 0..self.h {
                out.cells[l][k] = self.cells[k][l];
            }
        }
        out
    }

    /// Number of ones.
    pub fn count_ones(&self) -> usize {
        self.cells
            .iter()
            .map(|r| r.iter().filter(|&&b| b).count())
            .sum()
    }
}

/// A naive dynamic graph: explicit edge set, connectivity by breadth-first
/// search. Used to cross-check every answer the real structure gives.
#[derive(Debug, Clone)]
pub struct OracleGraph {
    n: u32,
    edges: BTreeSet<(u32, u32)>,
}

impl OracleGraph {
    /// Empty graph on `n` vertices.
    pub fn new(n: u32) -> OracleGraph {
        OracleGraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    fn key(u: u32, v: u32) -> (u32, u32) {
        (u.min(v), u.max(v))
    }

    /// Number of vertices.
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Current number of edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// True if the edge is present.
    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.edges.contains(&Self::key(u, v))
    }

    /// Add an edge; returns false if it was already present.
    pub fn insert(&mut self, u: u32, v: u32) -> bool {
        self.edges.insert(Self::key(u, v))
    }

    /// Remove an edge; returns false if it was absent.
    pub fn delete(&mut self, u: u32, v: u32) -> bool {
        self.edges.remove(&Self::key(u, v))
    }

    /// Edges currently present, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.edges.iter().copied()
    }

    /// Connectivity by breadth-first search.
    pub fn connected(&self, u: u32, v: u32) -> bool {
        if u == v {
            return true;
        }
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); self.n as usize];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        let mut seen = vec![false; self.n as usize];
        let mut queue = std::collections::VecDeque::new();
        seen[u as usize] = true;
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x as usize] {
                if y == v {
                    return true;
                }
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }

    /// Component label per vertex (smallest vertex in the component).
    pub fn component_labels(&self) -> Vec<u32> {
        let mut label: Vec<u32> = (0..self.n).collect();
        // Union-find with path compression keeps this fast enough for tests.
        fn find(label: &mut [u32], x: u32) -> u32 {
            let mut r = x;
            while label[r as usize] != r {
                r = label[r as usize];
            }
            let mut c = x;
            while label[c as usize] != r {
                let next = label[c as usize];
                label[c as usize] = r;
                c = next;
            }
            r
        }
        for &(a, b) in &self.edges {
            let ra = find(&mut label, a);
            let rb = find(&mut label, b);
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            label[hi as usize] = lo;
        }
        (0..self.n).map(|v| find(&mut label, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_graph_tracks_components() {
        let mut g = OracleGraph::new(6);
        assert!(!g.connected(0, 1));
        g.insert(0, 1);
        g.insert(1, 2);
        g.insert(3, 4);
        assert!(g.connected(0, 2));
        assert!(!g.connected(2, 3));
        assert!(g.connected(4, 3));
        g.delete(1, 2);
        assert!(!g.connected(0, 2));
        let labels = g.component_labels();
        assert_eq!(labels[0], labels[1]);
        assert_ne!(labels[0], labels[2]);
        assert_eq!(labels[3], labels[4]);
    }

    #[test]
    fn ref_matrix_ops_behave() {
        let mut m = RefMatrix::zero(4);
        m.set(0, 3, true);
        m.set(2, 1, true);
        assert_eq!(m.find_one(), Some((0, 3)));
        let t = m.transpose();
        assert!(t.get(3, 0) && t.get(1, 2));
        assert_eq!(t.transpose(), m);
        let shifted = m.insert_zero_row(0);
        assert!(shifted.get(1, 3) && shifted.get(3, 1));
        assert_eq!(shifted.count_ones(), 2);
    }
}

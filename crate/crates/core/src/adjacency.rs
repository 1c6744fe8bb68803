//! Chunk-level adjacency matrices.
//!
//! For every pair of numbered superchunks that carries at least one edge, a
//! cell matrix records which chunk pairs are joined by an edge whose two
//! endpoints are hosted there. Short tours (below the superchunk threshold)
//! keep a single symmetric matrix over their chunk positions instead. Both
//! shapes share one backing representation: a single machine word in the
//! dense encoding, or a sorted field-coded word sequence in the packed
//! encoding. All mutators charge their word-level work to an operation
//! counter.

use std::collections::{BTreeMap, BTreeSet};

use crate::packed::{FieldCoding, PackedMatrix};
use crate::word_matrix::MaskSet;
use crate::{Encoding, Params};

/// Encoding-specific constants shared by every matrix of one structure.
#[derive(Debug)]
pub enum AdjCtx {
    Dense(MaskSet),
    Packed(FieldCoding),
}

impl AdjCtx {
    pub fn new(p: &Params) -> AdjCtx {
        match p.encoding {
            Encoding::Dense => AdjCtx::Dense(MaskSet::new(p.h, p.w)),
            Encoding::Packed => AdjCtx::Packed(FieldCoding::new(p.h)),
        }
    }

    pub fn h(&self) -> u32 {
        match self {
            AdjCtx::Dense(m) => m.h(),
            AdjCtx::Packed(c) => c.h(),
        }
    }
}

/// One matrix, in whichever encoding the structure uses.
#[derive(Debug, Clone)]
pub enum CellData {
    Dense(u64),
    Packed(PackedMatrix),
}

impl CellData {
    pub fn empty(ctx: &AdjCtx) -> CellData {
        match ctx {
            AdjCtx::Dense(_) => CellData::Dense(0),
            AdjCtx::Packed(_) => CellData::Packed(PackedMatrix::new()),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            CellData::Dense(a) => *a == 0,
            CellData::Packed(m) => m.is_empty(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            CellData::Dense(a) => a.count_ones() as usize,
            CellData::Packed(m) => m.count(),
        }
    }

    pub fn get(&self, ctx: &AdjCtx, k: u32, l: u32) -> bool {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => m.get_bit(*a, k, l),
            (CellData::Packed(pm), AdjCtx::Packed(c)) => {
                let mut ops = 0;
                pm.contains(c, k, l, &mut ops)
            }
            _ => unreachable!("encoding mismatch"),
        }
    }

    /// Set bit (k, l); true if it was absent.
    pub fn set(&mut self, ctx: &AdjCtx, k: u32, l: u32, ops: &mut u64) -> bool {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                let before = *a;
                *a = m.set_bit(*a, k, l);
                *a != before
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.insert(c, k, l, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    /// Clear bit (k, l); true if it was present.
    pub fn unset(&mut self, ctx: &AdjCtx, k: u32, l: u32, ops: &mut u64) -> bool {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                let before = *a;
                *a = m.clear_bit(*a, k, l);
                *a != before
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.remove(c, k, l, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    pub fn find_any(&self, ctx: &AdjCtx, ops: &mut u64) -> Option<(u32, u32)> {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                m.find_one(*a)
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.find_first(c, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    /// Minimum set bit in (column, row) lexicographic order, reported as
    /// (column, row). Lets a caller whose side owns the stored columns get
    /// the same deterministic answer it would get from `find_any` on the
    /// transposed matrix, without materializing the transpose.
    pub fn find_any_swapped(&self, ctx: &AdjCtx, ops: &mut u64) -> Option<(u32, u32)> {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                for c in 0..m.h() {
                    *ops += 1;
                    let masked = *a & m.cols_mask(c, c + 1);
                    if masked != 0 {
                        let (r, _) = m.find_one(masked).expect("masked word is nonzero");
                        return Some((c, r));
                    }
                }
                None
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => {
                let mut best: Option<(u32, u32)> = None;
                for (r, col) in pm.entries(c) {
                    *ops += 1;
                    let cand = (col, r);
                    if best.map_or(true, |b| cand < b) {
                        best = Some(cand);
                    }
                }
                best
            }
            _ => unreachable!("encoding mismatch"),
        }
    }

    /// First bit whose row lies in one of `rows` and whose column lies in
    /// `cols` (half-open ranges).
    pub fn find_in(
        &self,
        ctx: &AdjCtx,
        rows: &[(u32, u32)],
        cols: (u32, u32),
        ops: &mut u64,
    ) -> Option<(u32, u32)> {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                let mut row_mask = 0u64;
                for &(a0, a1) in rows {
                    if a0 < a1 {
                        row_mask |= m.rows_mask(a0, a1);
                    }
                }
                let masked = *a & row_mask & m.cols_mask(cols.0, cols.1);
                m.find_one(masked)
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.find_first_in(c, rows, cols, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    fn zero_row(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                *a &= !m.rows_mask(k, k + 1);
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.clear_row_range(c, k, k + 1, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    fn zero_col(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                *a &= !m.cols_mask(k, k + 1);
            }
            _ => unreachable!("packed matrices take column surgery via transpose"),
        }
    }

    fn insert_row(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                *a = m.insert_zero_row(*a, k);
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.insert_zero_row(c, k, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    fn insert_col(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                *a = m.insert_zero_col(*a, k);
            }
            _ => unreachable!("packed matrices take column surgery via transpose"),
        }
    }

    fn merge_row_pair(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                *a = m.merge_rows(*a, k);
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.merge_rows(c, k, ops),
            _ => unreachable!("encoding mismatch"),
        }
    }

    fn merge_col_pair(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                *ops += 1;
                *a = m.merge_cols(*a, k);
            }
            _ => unreachable!("packed matrices take column surgery via transpose"),
        }
    }

    fn transpose_in_place(&mut self, ctx: &AdjCtx, ops: &mut u64) {
        match (self, ctx) {
            (CellData::Packed(pm), AdjCtx::Packed(c)) => *pm = pm.transpose(c, ops),
            _ => unreachable!("dense matrices never store a transposed orientation"),
        }
    }

    /// Zero row `k` and column `k` of a symmetric matrix.
    pub fn sym_zero_slot(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match ctx {
            AdjCtx::Dense(_) => {
                self.zero_row(ctx, k, ops);
                self.zero_col(ctx, k, ops);
            }
            AdjCtx::Packed(_) => {
                self.zero_row(ctx, k, ops);
                self.transpose_in_place(ctx, ops);
                self.zero_row(ctx, k, ops);
            }
        }
    }

    /// Insert a zero row and column at `k` in a symmetric matrix.
    pub fn sym_insert_slot(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match ctx {
            AdjCtx::Dense(_) => {
                self.insert_row(ctx, k, ops);
                self.insert_col(ctx, k, ops);
            }
            AdjCtx::Packed(_) => {
                self.insert_row(ctx, k, ops);
                self.transpose_in_place(ctx, ops);
                self.insert_row(ctx, k, ops);
            }
        }
    }

    /// Merge rows `k`, `k+1` and columns `k`, `k+1` of a symmetric matrix.
    pub fn sym_merge_slots(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        match ctx {
            AdjCtx::Dense(_) => {
                self.merge_row_pair(ctx, k, ops);
                self.merge_col_pair(ctx, k, ops);
            }
            AdjCtx::Packed(_) => {
                self.merge_row_pair(ctx, k, ops);
                self.transpose_in_place(ctx, ops);
                self.merge_row_pair(ctx, k, ops);
            }
        }
    }

    /// All bits in row-major order.
    pub fn entries_sorted(&self, ctx: &AdjCtx) -> Vec<(u32, u32)> {
        match (self, ctx) {
            (CellData::Dense(a), AdjCtx::Dense(m)) => {
                let h = m.h();
                let mut out = Vec::new();
                for k in 0..h {
                    for l in 0..h {
                        if m.get_bit(*a, k, l) {
                            out.push((k, l));
                        }
                    }
                }
                out
            }
            (CellData::Packed(pm), AdjCtx::Packed(c)) => pm.entries(c).collect(),
            _ => unreachable!("encoding mismatch"),
        }
    }

    /// Build from row-major sorted bits.
    pub fn from_entries(ctx: &AdjCtx, entries: &[(u32, u32)], ops: &mut u64) -> CellData {
        match ctx {
            AdjCtx::Dense(m) => {
                let mut a = 0u64;
                for &(k, l) in entries {
                    *ops += 1;
                    a = m.set_bit(a, k, l);
                }
                CellData::Dense(a)
            }
            AdjCtx::Packed(c) => {
                *ops += entries.len() as u64;
                CellData::Packed(PackedMatrix::from_sorted_entries(c, entries))
            }
        }
    }
}

/// Union two row-major sorted bit lists.
fn merge_entries(a: &[(u32, u32)], b: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = if j >= b.len() || (i < a.len() && a[i] <= b[j]) {
            let x = a[i];
            i += 1;
            if j < b.len() && b[j] == x {
                j += 1;
            }
            x
        } else {
            let x = b[j];
            j += 1;
            x
        };
        out.push(next);
    }
    out
}

/// A pair became live (`true`) or went dead (`false`); the engine mirrors
/// these into the list-sum aggregates.
pub type Transition = (u32, u32, bool);

/// Cell matrices over numbered superchunk pairs.
#[derive(Debug)]
pub struct AdjStore {
    cells: BTreeMap<(u32, u32), Cell>,
    touching: BTreeMap<u32, BTreeSet<u32>>,
}

#[derive(Debug)]
struct Cell {
    data: CellData,
    /// Packed orientation: rows belong to the smaller id of the key. Dense
    /// cells always store that orientation.
    rows_first: bool,
}

fn norm(i: u32, j: u32) -> (u32, u32) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

impl AdjStore {
    pub fn new() -> AdjStore {
        AdjStore {
            cells: BTreeMap::new(),
            touching: BTreeMap::new(),
        }
    }

    /// Superchunk ids sharing a live cell with `i` (including `i` itself for
    /// a live diagonal), in increasing order.
    pub fn partners(&self, i: u32) -> Vec<u32> {
        self.touching
            .get(&i)
            .map(|s| s.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn pair_nonzero(&self, i: u32, j: u32) -> bool {
        self.cells.contains_key(&norm(i, j))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn link_touching(&mut self, key: (u32, u32)) {
        self.touching.entry(key.0).or_default().insert(key.1);
        self.touching.entry(key.1).or_default().insert(key.0);
    }

    fn unlink_touching(&mut self, key: (u32, u32)) {
        for (a, b) in [(key.0, key.1), (key.1, key.0)] {
            if let Some(s) = self.touching.get_mut(&a) {
                s.remove(&b);
                if s.is_empty() {
                    self.touching.remove(&a);
                }
            }
        }
    }

    fn remove_if_empty(&mut self, key: (u32, u32)) -> bool {
        if self.cells.get(&key).is_some_and(|c| c.data.is_empty()) {
            self.cells.remove(&key);
            self.unlink_touching(key);
            true
        } else {
            false
        }
    }

    /// Which id owns the stored rows of a cell.
    fn rows_owner(key: (u32, u32), cell: &Cell) -> u32 {
        if cell.rows_first {
            key.0
        } else {
            key.1
        }
    }

    /// Make the stored rows of a packed cell belong to `i`. Dense cells are
    /// left alone (their column ops are native).
    fn orient_packed(&mut self, ctx: &AdjCtx, key: (u32, u32), i: u32, ops: &mut u64) {
        let cell = self.cells.get_mut(&key).unwrap();
        if matches!(cell.data, CellData::Packed(_)) && Self::rows_owner(key, cell) != i {
            cell.data.transpose_in_place(ctx, ops);
            cell.rows_first = !cell.rows_first;
        }
    }

    /// Record that an edge joins chunk `k` of superchunk `i` with chunk `l`
    /// of superchunk `j`. Returns true when the pair had no cell before.
    pub fn set_pair(&mut self, ctx: &AdjCtx, i: u32, k: u32, j: u32, l: u32, ops: &mut u64) -> bool {
        let key = norm(i, j);
        let created = !self.cells.contains_key(&key);
        if created {
            self.cells.insert(
                key,
                Cell {
                    data: CellData::empty(ctx),
                    rows_first: true,
                },
            );
            self.link_touching(key);
        }
        let cell = self.cells.get_mut(&key).unwrap();
        if i == j {
            cell.data.set(ctx, k, l, ops);
            cell.data.set(ctx, l, k, ops);
        } else if Self::rows_owner(key, cell) == i {
            cell.data.set(ctx, k, l, ops);
        } else {
            cell.data.set(ctx, l, k, ops);
        }
        created
    }

    /// Drop the bit for chunk pair (k of i, l of j). Returns true when the
    /// cell went dead.
    pub fn clear_pair(&mut self, ctx: &AdjCtx, i: u32, k: u32, j: u32, l: u32, ops: &mut u64) -> bool {
        let key = norm(i, j);
        let Some(cell) = self.cells.get_mut(&key) else {
            return false;
        };
        if i == j {
            cell.data.unset(ctx, k, l, ops);
            cell.data.unset(ctx, l, k, ops);
        } else if Self::rows_owner(key, cell) == i {
            cell.data.unset(ctx, k, l, ops);
        } else {
            cell.data.unset(ctx, l, k, ops);
        }
        self.remove_if_empty(key)
    }

    /// The minimum chunk pair bit of (i, j) in (chunk of i, chunk of j)
    /// lexicographic order. The stored orientation of the cell never leaks
    /// into the answer, so both encodings pick the same pair.
    pub fn find_pair(&self, ctx: &AdjCtx, i: u32, j: u32, ops: &mut u64) -> Option<(u32, u32)> {
        let key = norm(i, j);
        let cell = self.cells.get(&key)?;
        if i == j || Self::rows_owner(key, cell) == i {
            cell.data.find_any(ctx, ops)
        } else {
            cell.data.find_any_swapped(ctx, ops)
        }
    }

    /// Zero row and column `k` on `i`'s side of every cell touching `i`.
    /// Returns the partners that were touched; cells that went dead are
    /// dropped (the engine re-derives liveness after rescanning).
    pub fn zero_chunk_slot(&mut self, ctx: &AdjCtx, i: u32, k: u32, ops: &mut u64) -> Vec<u32> {
        let partners = self.partners(i);
        for &j in &partners {
            let key = norm(i, j);
            if i == j {
                let cell = self.cells.get_mut(&key).unwrap();
                cell.data.sym_zero_slot(ctx, k, ops);
            } else {
                match ctx {
                    AdjCtx::Dense(_) => {
                        let cell = self.cells.get_mut(&key).unwrap();
                        if Self::rows_owner(key, cell) == i {
                            cell.data.zero_row(ctx, k, ops);
                        } else {
                            cell.data.zero_col(ctx, k, ops);
                        }
                    }
                    AdjCtx::Packed(_) => {
                        self.orient_packed(ctx, key, i, ops);
                        let cell = self.cells.get_mut(&key).unwrap();
                        cell.data.zero_row(ctx, k, ops);
                    }
                }
            }
            self.remove_if_empty(key);
        }
        partners
    }

    /// Insert a zero row and column at position `k` on `i`'s side of every
    /// cell touching `i` (a chunk slot opened up).
    pub fn insert_chunk_slot(&mut self, ctx: &AdjCtx, i: u32, k: u32, ops: &mut u64) {
        for j in self.partners(i) {
            let key = norm(i, j);
            if i == j {
                let cell = self.cells.get_mut(&key).unwrap();
                cell.data.sym_insert_slot(ctx, k, ops);
            } else {
                match ctx {
                    AdjCtx::Dense(_) => {
                        let cell = self.cells.get_mut(&key).unwrap();
                        if Self::rows_owner(key, cell) == i {
                            cell.data.insert_row(ctx, k, ops);
                        } else {
                            cell.data.insert_col(ctx, k, ops);
                        }
                    }
                    AdjCtx::Packed(_) => {
                        self.orient_packed(ctx, key, i, ops);
                        let cell = self.cells.get_mut(&key).unwrap();
                        cell.data.insert_row(ctx, k, ops);
                    }
                }
            }
        }
    }

    /// Merge chunk slots `k` and `k+1` on `i`'s side of every cell touching
    /// `i` (two chunks fused).
    pub fn merge_chunk_slots(&mut self, ctx: &AdjCtx, i: u32, k: u32, ops: &mut u64) {
        for j in self.partners(i) {
            let key = norm(i, j);
            if i == j {
                let cell = self.cells.get_mut(&key).unwrap();
                cell.data.sym_merge_slots(ctx, k, ops);
            } else {
                match ctx {
                    AdjCtx::Dense(_) => {
                        let cell = self.cells.get_mut(&key).unwrap();
                        if Self::rows_owner(key, cell) == i {
                            cell.data.merge_row_pair(ctx, k, ops);
                        } else {
                            cell.data.merge_col_pair(ctx, k, ops);
                        }
                    }
                    AdjCtx::Packed(_) => {
                        self.orient_packed(ctx, key, i, ops);
                        let cell = self.cells.get_mut(&key).unwrap();
                        cell.data.merge_row_pair(ctx, k, ops);
                    }
                }
            }
        }
    }

    /// Close chunk slot `k` on `i`'s side after it has been zeroed, with `s`
    /// slots currently in use.
    pub fn remove_chunk_slot(&mut self, ctx: &AdjCtx, i: u32, k: u32, s: u32, ops: &mut u64) {
        if s >= 2 {
            self.merge_chunk_slots(ctx, i, k.min(s - 2), ops);
        }
    }

    /// Entries of the cell (i, j), reported with `i`'s chunks first.
    fn oriented_entries(&self, ctx: &AdjCtx, i: u32, j: u32) -> Vec<(u32, u32)> {
        let key = norm(i, j);
        let Some(cell) = self.cells.get(&key) else {
            return Vec::new();
        };
        let raw = cell.data.entries_sorted(ctx);
        if i == j || Self::rows_owner(key, cell) == i {
            raw
        } else {
            let mut sw: Vec<(u32, u32)> = raw.into_iter().map(|(k, l)| (l, k)).collect();
            sw.sort_unstable();
            sw
        }
    }

    fn drop_cell(&mut self, key: (u32, u32)) {
        if self.cells.remove(&key).is_some() {
            self.unlink_touching(key);
        }
    }

    fn install(&mut self, ctx: &AdjCtx, i: u32, j: u32, entries: &[(u32, u32)], ops: &mut u64) {
        if entries.is_empty() {
            return;
        }
        let key = norm(i, j);
        let data = if key.0 == i || i == j {
            CellData::from_entries(ctx, entries, ops)
        } else {
            let mut sw: Vec<(u32, u32)> = entries.iter().map(|&(k, l)| (l, k)).collect();
            sw.sort_unstable();
            CellData::from_entries(ctx, &sw, ops)
        };
        self.cells.insert(
            key,
            Cell {
                data,
                rows_first: true,
            },
        );
        self.link_touching(key);
    }

    /// Superchunk `i` split after chunk position `p` (of `s`): chunks
    /// `p..s` now belong to the fresh id `i2` at positions `0..s-p`.
    /// Returns the pair liveness transitions.
    pub fn split_sc(&mut self, ctx: &AdjCtx, i: u32, i2: u32, p: u32, ops: &mut u64) -> Vec<Transition> {
        let mut transitions = Vec::new();
        for j in self.partners(i) {
            if j == i {
                continue;
            }
            let all = self.oriented_entries(ctx, i, j);
            let (stay, moved): (Vec<_>, Vec<_>) = all.iter().partition(|&&(k, _)| k < p);
            if !moved.is_empty() {
                self.drop_cell(norm(i, j));
                if stay.is_empty() {
                    transitions.push((i, j, false));
                } else {
                    self.install(ctx, i, j, &stay.iter().map(|&&e| e).collect::<Vec<_>>(), ops);
                }
                let remapped: Vec<(u32, u32)> =
                    moved.iter().map(|&&(k, l)| (k - p, l)).collect();
                self.install(ctx, i2, j, &remapped, ops);
                transitions.push((i2, j, true));
            }
        }
        if self.pair_nonzero(i, i) {
            let all = self.oriented_entries(ctx, i, i);
            self.drop_cell(norm(i, i));
            let mut tl = Vec::new();
            let mut br = Vec::new();
            let mut cross = Vec::new();
            for (k, l) in all {
                if k < p && l < p {
                    tl.push((k, l));
                } else if k >= p && l >= p {
                    br.push((k - p, l - p));
                } else if k < p {
                    // Upper-right quadrant; the lower-left mirror is implied.
                    cross.push((k, l - p));
                }
            }
            if tl.is_empty() {
                transitions.push((i, i, false));
            } else {
                self.install(ctx, i, i, &tl, ops);
            }
            if !br.is_empty() {
                self.install(ctx, i2, i2, &br, ops);
                transitions.push((i2, i2, true));
            }
            if !cross.is_empty() {
                self.install(ctx, i, i2, &cross, ops);
                transitions.push((i, i2, true));
            }
        }
        transitions
    }

    /// Superchunk `i2` merged into `i`, its chunks appended after `i`'s
    /// first `s0`. Returns the pair liveness transitions.
    pub fn merge_sc(&mut self, ctx: &AdjCtx, i: u32, i2: u32, s0: u32, ops: &mut u64) -> Vec<Transition> {
        let mut transitions = Vec::new();
        for j in self.partners(i2) {
            if j == i2 || j == i {
                continue;
            }
            let moved = self.oriented_entries(ctx, i2, j);
            self.drop_cell(norm(i2, j));
            transitions.push((i2, j, false));
            let remapped: Vec<(u32, u32)> = moved.iter().map(|&(k, l)| (k + s0, l)).collect();
            let existing = self.oriented_entries(ctx, i, j);
            let was_live = !existing.is_empty();
            self.drop_cell(norm(i, j));
            let union = merge_entries(&existing, &remapped);
            self.install(ctx, i, j, &union, ops);
            if !was_live {
                transitions.push((i, j, true));
            }
        }
        let mut extra: Vec<(u32, u32)> = Vec::new();
        if self.pair_nonzero(i2, i2) {
            let diag = self.oriented_entries(ctx, i2, i2);
            self.drop_cell(norm(i2, i2));
            transitions.push((i2, i2, false));
            extra.extend(diag.iter().map(|&(k, l)| (k + s0, l + s0)));
        }
        if self.pair_nonzero(i, i2) {
            let cross = self.oriented_entries(ctx, i, i2);
            self.drop_cell(norm(i, i2));
            transitions.push((i, i2, false));
            for &(k, l) in &cross {
                extra.push((k, l + s0));
                extra.push((l + s0, k));
            }
        }
        if !extra.is_empty() {
            extra.sort_unstable();
            extra.dedup();
            let existing = self.oriented_entries(ctx, i, i);
            let was_live = !existing.is_empty();
            self.drop_cell(norm(i, i));
            let union = merge_entries(&existing, &extra);
            self.install(ctx, i, i, &union, ops);
            if !was_live {
                transitions.push((i, i, true));
            }
        }
        transitions
    }

    /// Install a short tour's matrix as the diagonal cell of its freshly
    /// numbered superchunk. Returns true when the cell is live.
    pub fn promote(&mut self, i: u32, m: ShortMatrix, _ops: &mut u64) -> bool {
        debug_assert!(self.partners(i).is_empty());
        if m.data.is_empty() {
            return false;
        }
        self.cells.insert(
            (i, i),
            Cell {
                data: m.data,
                rows_first: true,
            },
        );
        self.link_touching((i, i));
        true
    }

    /// Remove and return the diagonal cell of `i`, which must be its only
    /// live pair (the tour has a single superchunk).
    pub fn demote(&mut self, ctx: &AdjCtx, i: u32, _ops: &mut u64) -> ShortMatrix {
        let partners = self.partners(i);
        debug_assert!(partners.is_empty() || partners == vec![i]);
        let data = match self.cells.remove(&(i, i)) {
            Some(cell) => {
                self.unlink_touching((i, i));
                cell.data
            }
            None => CellData::empty(ctx),
        };
        ShortMatrix { data }
    }

    /// All cells with their entries in the canonical (smaller id rows)
    /// orientation, for audits.
    pub fn snapshot(&self, ctx: &AdjCtx) -> Vec<((u32, u32), Vec<(u32, u32)>)> {
        self.cells
            .keys()
            .map(|&key| (key, self.oriented_entries(ctx, key.0, key.1)))
            .collect()
    }
}

/// Symmetric chunk-position matrix of a short tour.
#[derive(Debug)]
pub struct ShortMatrix {
    pub data: CellData,
}

impl ShortMatrix {
    pub fn new(ctx: &AdjCtx) -> ShortMatrix {
        ShortMatrix {
            data: CellData::empty(ctx),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Record an edge between chunk positions `k` and `l` (both mirror bits
    /// are kept).
    pub fn set(&mut self, ctx: &AdjCtx, k: u32, l: u32, ops: &mut u64) {
        self.data.set(ctx, k, l, ops);
        self.data.set(ctx, l, k, ops);
    }

    pub fn get(&self, ctx: &AdjCtx, k: u32, l: u32) -> bool {
        self.data.get(ctx, k, l)
    }

    pub fn zero_slot(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        self.data.sym_zero_slot(ctx, k, ops);
    }

    pub fn insert_slot(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        self.data.sym_insert_slot(ctx, k, ops);
    }

    pub fn merge_slots(&mut self, ctx: &AdjCtx, k: u32, ops: &mut u64) {
        self.data.sym_merge_slots(ctx, k, ops);
    }

    pub fn find_in(
        &self,
        ctx: &AdjCtx,
        rows: &[(u32, u32)],
        cols: (u32, u32),
        ops: &mut u64,
    ) -> Option<(u32, u32)> {
        self.data.find_in(ctx, rows, cols, ops)
    }

    /// Entries in row-major order (symmetric, so both mirrors appear).
    pub fn entries(&self, ctx: &AdjCtx) -> Vec<(u32, u32)> {
        self.data.entries_sorted(ctx)
    }

    /// Build from arbitrary (k, l) pairs; mirrors are added automatically.
    pub fn from_pairs(ctx: &AdjCtx, pairs: &[(u32, u32)], ops: &mut u64) -> ShortMatrix {
        let mut sym: Vec<(u32, u32)> = Vec::with_capacity(pairs.len() * 2);
        for &(k, l) in pairs {
            sym.push((k, l));
            sym.push((l, k));
        }
        sym.sort_unstable();
        sym.dedup();
        ShortMatrix {
            data: CellData::from_entries(ctx, &sym, ops),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Overrides;

    fn ctxs() -> Vec<AdjCtx> {
        let dense = Params::new(
            64,
            256,
            Encoding::Dense,
            Overrides {
                k: Some(4),
                h: Some(4),
                word_bits: None,
            },
        )
        .unwrap();
        let packed = Params::new(64, 256, Encoding::Packed, Overrides::default()).unwrap();
        vec![AdjCtx::new(&dense), AdjCtx::new(&packed)]
    }

    #[test]
    fn pair_bits_round_trip_in_both_encodings() {
        for ctx in ctxs() {
            let mut adj = AdjStore::new();
            let mut ops = 0;
            assert!(adj.set_pair(&ctx, 5, 1, 2, 3, &mut ops));
            assert!(!adj.set_pair(&ctx, 5, 0, 2, 2, &mut ops));
            assert!(adj.pair_nonzero(2, 5));
            assert_eq!(adj.partners(5), vec![2]);
            let (k, l) = adj.find_pair(&ctx, 5, 2, &mut ops).unwrap();
            assert!(adj.oriented_entries(&ctx, 5, 2).contains(&(k, l)));
            let (k2, l2) = adj.find_pair(&ctx, 2, 5, &mut ops).unwrap();
            assert!(adj.oriented_entries(&ctx, 2, 5).contains(&(k2, l2)));
            assert!(!adj.clear_pair(&ctx, 5, 1, 2, 3, &mut ops));
            assert!(adj.clear_pair(&ctx, 2, 2, 5, 0, &mut ops), "cell dies");
            assert!(adj.partners(5).is_empty());
        }
    }

    #[test]
    fn diagonal_cells_stay_symmetric() {
        for ctx in ctxs() {
            let mut adj = AdjStore::new();
            let mut ops = 0;
            adj.set_pair(&ctx, 3, 0, 3, 2, &mut ops);
            let entries = adj.oriented_entries(&ctx, 3, 3);
            assert_eq!(entries, vec![(0, 2), (2, 0)]);
            adj.zero_chunk_slot(&ctx, 3, 2, &mut ops);
            assert!(!adj.pair_nonzero(3, 3), "both mirrors died");
        }
    }

    #[test]
    fn slot_surgery_tracks_chunk_renumbering() {
        for ctx in ctxs() {
            let mut adj = AdjStore::new();
            let mut ops = 0;
            adj.set_pair(&ctx, 1, 0, 2, 1, &mut ops);
            adj.set_pair(&ctx, 1, 2, 2, 0, &mut ops);
            // Chunk 1 of superchunk 1 splits: old chunk 2 becomes chunk 3.
            adj.insert_chunk_slot(&ctx, 1, 1, &mut ops);
            assert_eq!(
                adj.oriented_entries(&ctx, 1, 2),
                vec![(0, 1), (3, 0)]
            );
            // Merge slots 2 and 3 back.
            adj.merge_chunk_slots(&ctx, 1, 2, &mut ops);
            assert_eq!(
                adj.oriented_entries(&ctx, 1, 2),
                vec![(0, 1), (2, 0)]
            );
            // Zero then close slot 0 on superchunk 2's side.
            adj.zero_chunk_slot(&ctx, 2, 0, &mut ops);
            assert_eq!(adj.oriented_entries(&ctx, 1, 2), vec![(0, 1)]);
            adj.remove_chunk_slot(&ctx, 2, 0, 2, &mut ops);
            assert_eq!(adj.oriented_entries(&ctx, 1, 2), vec![(0, 0)]);
        }
    }

    #[test]
    fn superchunk_split_and_merge_round_trip() {
        for ctx in ctxs() {
            let mut adj = AdjStore::new();
            let mut ops = 0;
            // Superchunk 0 with 4 chunks, edges to partner 7 and itself.
            adj.set_pair(&ctx, 0, 0, 7, 1, &mut ops);
            adj.set_pair(&ctx, 0, 3, 7, 0, &mut ops);
            adj.set_pair(&ctx, 0, 1, 0, 2, &mut ops);
            adj.set_pair(&ctx, 0, 0, 0, 3, &mut ops);
            let tr = adj.split_sc(&ctx, 0, 4, 2, &mut ops);
            assert!(tr.contains(&(4, 7, true)));
            assert!(tr.contains(&(0, 4, true)));
            assert_eq!(adj.oriented_entries(&ctx, 0, 7), vec![(0, 1)]);
            assert_eq!(adj.oriented_entries(&ctx, 4, 7), vec![(1, 0)]);
            assert_eq!(adj.oriented_entries(&ctx, 0, 4), vec![(0, 1), (1, 0)]);
            assert!(!adj.pair_nonzero(0, 0), "diagonal had no top-left bits");
            assert!(!adj.pair_nonzero(4, 4));
            let tr2 = adj.merge_sc(&ctx, 0, 4, 2, &mut ops);
            assert!(tr2.contains(&(4, 7, false)));
            assert!(tr2.contains(&(0, 4, false)));
            assert!(tr2.contains(&(0, 0, true)));
            let diag = adj.oriented_entries(&ctx, 0, 0);
            assert_eq!(diag, vec![(0, 3), (1, 2), (2, 1), (3, 0)]);
            assert_eq!(adj.oriented_entries(&ctx, 0, 7), vec![(0, 1), (3, 0)]);
        }
    }

    #[test]
    fn short_matrix_supports_interval_search() {
        for ctx in ctxs() {
            let mut ops = 0;
            let mut m = ShortMatrix::new(&ctx);
            m.set(&ctx, 0, 3, &mut ops);
            m.set(&ctx, 2, 1, &mut ops);
            assert!(m.get(&ctx, 3, 0), "mirror present");
            let hit = m.find_in(&ctx, &[(0, 1)], (2, 4), &mut ops);
            assert_eq!(hit, Some((0, 3)));
            let miss = m.find_in(&ctx, &[(1, 2)], (0, 1), &mut ops);
            assert_eq!(miss, None);
            m.zero_slot(&ctx, 3, &mut ops);
            assert!(!m.get(&ctx, 0, 3));
            assert!(m.get(&ctx, 2, 1));
            m.insert_slot(&ctx, 1, &mut ops);
            assert!(m.get(&ctx, 3, 2), "old (2,1) slid to (3,2)");
            m.merge_slots(&ctx, 1, &mut ops);
            assert!(m.get(&ctx, 2, 1));
        }
    }

    #[test]
    fn promote_and_demote_move_the_matrix_wholesale() {
        for ctx in ctxs() {
            let mut ops = 0;
            let m = ShortMatrix::from_pairs(&ctx, &[(0, 2), (1, 1)], &mut ops);
            let mut adj = AdjStore::new();
            assert!(adj.promote(9, m, &mut ops));
            assert_eq!(
                adj.oriented_entries(&ctx, 9, 9),
                vec![(0, 2), (1, 1), (2, 0)]
            );
            let back = adj.demote(&ctx, 9, &mut ops);
            assert!(adj.is_empty());
            assert_eq!(back.entries(&ctx), vec![(0, 2), (1, 1), (2, 0)]);
        }
    }
}

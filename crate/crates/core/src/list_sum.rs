//! Per-tour superchunk lists with OR-aggregates.
//!
//! Every long tour keeps its superchunks in a balanced 2-3-4 tree. Each leaf
//! carries the superchunk's id, the bit set of superchunk ids it is adjacent
//! to, and its own membership singleton; internal nodes carry the OR of their
//! children. This answers "which superchunks is this whole tour adjacent to"
//! and "which superchunk ids form this tour" from the root, supports finding
//! the leaf contributing a given bit, and splits or joins lists along tour
//! surgery in logarithmic time.

use crate::error::Error;
use std::collections::BTreeSet;

/// Fixed-width bit set over superchunk ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdBitVec {
    words: Vec<u64>,
}

impl IdBitVec {
    /// All-zero set sized for `j` ids.
    pub fn zero(j: u32) -> IdBitVec {
        IdBitVec {
            words: vec![0; (j as usize).div_ceil(64).max(1)],
        }
    }

    /// Set bit `i`.
    pub fn set(&mut self, i: u32) {
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    /// Clear bit `i`.
    pub fn clear(&mut self, i: u32) {
        self.words[(i / 64) as usize] &= !(1 << (i % 64));
    }

    /// Read bit `i`.
    pub fn get(&self, i: u32) -> bool {
        self.words[(i / 64) as usize] >> (i % 64) & 1 != 0
    }

    /// OR another set into this one.
    pub fn or_assign(&mut self, other: &IdBitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// Zero every bit.
    pub fn clear_all(&mut self) {
        self.words.fill(0);
    }

    /// True if no bit is set.
    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Intersection.
    pub fn and(&self, other: &IdBitVec) -> IdBitVec {
        IdBitVec {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// Lowest set bit.
    pub fn first_one(&self) -> Option<u32> {
        for (wi, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(wi as u32 * 64 + w.trailing_zeros());
            }
        }
        None
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let b = rest.trailing_zeros();
                    rest &= rest - 1;
                    Some(wi as u32 * 64 + b)
                }
            })
        })
    }
}

/// Arena index of a tree node.
pub type NodeRef = u32;
const NIL: NodeRef = u32::MAX;

/// Stable handle of one superchunk list.
pub type ListKey = u32;

/// Where to place a newly inserted leaf.
#[derive(Debug, Clone, Copy)]
pub enum Place {
    /// Leftmost position of the list.
    First,
    /// Immediately after this existing leaf.
    After(NodeRef),
}

#[derive(Debug, Clone)]
struct Node {
    parent: NodeRef,
    /// Children, left to right; `nkids` of them are valid. Leaves use none.
    kids: [NodeRef; 4],
    nkids: u8,
    height: u8,
    /// Superchunk id for leaves; unused for internal nodes.
    id: u32,
    /// Leaf: adjacency bit set of this superchunk. Internal: OR of children.
    adj: IdBitVec,
    /// Leaf: own-id singleton. Internal: OR of children.
    memb: IdBitVec,
}

/// Arena of 2-3-4 trees, one per registered list, plus the id pool and the
/// id-to-leaf directory shared by all lists.
#[derive(Debug)]
pub struct ListSum {
    j: u32,
    nodes: Vec<Node>,
    free_nodes: Vec<NodeRef>,
    roots: Vec<NodeRef>,
    free_lists: Vec<ListKey>,
    id_pool: BTreeSet<u32>,
    leaf_of: Vec<NodeRef>,
}

impl ListSum {
    /// Structure with id space `0..j`.
    pub fn new(j: u32) -> ListSum {
        ListSum {
            j,
            nodes: Vec::new(),
            free_nodes: Vec::new(),
            roots: Vec::new(),
            free_lists: Vec::new(),
            id_pool: (0..j).collect(),
            leaf_of: vec![NIL; j as usize],
        }
    }

    /// Id-space size.
    pub fn id_capacity(&self) -> u32 {
        self.j
    }

    /// Number of ids currently allocated.
    pub fn ids_in_use(&self) -> u32 {
        self.j - self.id_pool.len() as u32
    }

    /// A fresh all-zero bit set of the right width.
    pub fn zero_bits(&self) -> IdBitVec {
        IdBitVec::zero(self.j)
    }

    fn alloc_node(&mut self, node: Node) -> NodeRef {
        if let Some(r) = self.free_nodes.pop() {
            self.nodes[r as usize] = node;
            r
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as NodeRef
        }
    }

    fn free_node(&mut self, r: NodeRef) {
        self.free_nodes.push(r);
    }

    fn node(&self, r: NodeRef) -> &Node {
        &self.nodes[r as usize]
    }

    fn node_mut(&mut self, r: NodeRef) -> &mut Node {
        &mut self.nodes[r as usize]
    }

    /// Register an empty list.
    pub fn new_list(&mut self) -> ListKey {
        if let Some(k) = self.free_lists.pop() {
            self.roots[k as usize] = NIL;
            k
        } else {
            self.roots.push(NIL);
            (self.roots.len() - 1) as ListKey
        }
    }

    /// Drop an empty list registration.
    pub fn free_list(&mut self, k: ListKey) {
        assert_eq!(self.roots[k as usize], NIL, "list not empty");
        self.free_lists.push(k);
    }

    /// True if the list has no leaves.
    pub fn is_empty(&self, k: ListKey) -> bool {
        self.roots[k as usize] == NIL
    }

    /// Superchunk id stored at a leaf.
    pub fn leaf_id(&self, leaf: NodeRef) -> u32 {
        self.node(leaf).id
    }

    /// Leaf currently holding id `i`.
    pub fn leaf_of_id(&self, i: u32) -> NodeRef {
        self.leaf_of[i as usize]
    }

    /// Adjacency bit set stored at a leaf.
    pub fn leaf_adj(&self, leaf: NodeRef) -> &IdBitVec {
        &self.node(leaf).adj
    }

    /// Recompute an internal node's aggregates from its children.
    fn refresh(&mut self, r: NodeRef) {
        let n = self.node(r);
        debug_assert!(n.height > 0);
        let kids: Vec<NodeRef> = n.kids[..n.nkids as usize].to_vec();
        let mut adj = self.zero_bits();
        let mut memb = self.zero_bits();
        for &k in &kids {
            adj.or_assign(&self.node(k).adj);
            memb.or_assign(&self.node(k).memb);
        }
        let n = self.node_mut(r);
        n.adj = adj;
        n.memb = memb;
    }

    /// Refresh aggregates from `r`'s parent up to the root.
    fn refresh_up(&mut self, r: NodeRef) {
        let mut p = self.node(r).parent;
        while p != NIL {
            self.refresh(p);
            p = self.node(p).parent;
        }
    }

    fn set_kids(&mut self, r: NodeRef, kids: &[NodeRef]) {
        debug_assert!((1..=4).contains(&kids.len()));
        let n = self.node_mut(r);
        n.nkids = kids.len() as u8;
        for (i, &k) in kids.iter().enumerate() {
            n.kids[i] = k;
        }
        for &k in kids {
            self.node_mut(k).parent = r;
        }
        self.refresh(r);
    }

    fn root_of(&self, mut r: NodeRef) -> NodeRef {
        while self.node(r).parent != NIL {
            r = self.node(r).parent;
        }
        r
    }

    /// Insert `child` into `parent`'s child array at `pos`, splitting on
    /// overflow all the way up; returns the (possibly new) root.
    fn insert_child_at(&mut self, parent: NodeRef, pos: usize, child: NodeRef) -> NodeRef {
        let n = self.node(parent);
        let mut kids: Vec<NodeRef> = n.kids[..n.nkids as usize].to_vec();
        kids.insert(pos, child);
        if kids.len() <= 4 {
            self.set_kids(parent, &kids);
            self.refresh_up(parent);
            return self.root_of(parent);
        }
        // Split five children into three and two.
        let right_kids: Vec<NodeRef> = kids.split_off(3);
        self.set_kids(parent, &kids);
        let height = self.node(parent).height;
        let right = self.alloc_node(Node {
            parent: NIL,
            kids: [NIL; 4],
            nkids: 0,
            height,
            id: u32::MAX,
            adj: self.zero_bits(),
            memb: self.zero_bits(),
        });
        self.set_kids(right, &right_kids);
        let gp = self.node(parent).parent;
        if gp == NIL {
            let root = self.alloc_node(Node {
                parent: NIL,
                kids: [NIL; 4],
                nkids: 0,
                height: height + 1,
                id: u32::MAX,
                adj: self.zero_bits(),
                memb: self.zero_bits(),
            });
            self.set_kids(root, &[parent, right]);
            return root;
        }
        let gn = self.node(gp);
        let at = gn.kids[..gn.nkids as usize]
            .iter()
            .position(|&k| k == parent)
            .expect("child not found in parent");
        self.insert_child_at(gp, at + 1, right)
    }

    /// Allocate an id and insert a fresh leaf for it at `place`.
    pub fn sc_insert(&mut self, list: ListKey, place: Place) -> Result<(u32, NodeRef), Error> {
        let id = *self
            .id_pool
            .iter()
            .next()
            .ok_or(Error::IdsExhausted { j: self.j as usize })?;
        self.id_pool.remove(&id);
        let mut memb = self.zero_bits();
        memb.set(id);
        let leaf = self.alloc_node(Node {
            parent: NIL,
            kids: [NIL; 4],
            nkids: 0,
            height: 0,
            id,
            adj: self.zero_bits(),
            memb,
        });
        self.leaf_of[id as usize] = leaf;
        let root = self.roots[list as usize];
        if root == NIL {
            self.roots[list as usize] = leaf;
            return Ok((id, leaf));
        }
        let (anchor, pos_after) = match place {
            Place::After(x) => (x, true),
            Place::First => (self.first_leaf(list).unwrap(), false),
        };
        let parent = self.node(anchor).parent;
        if parent == NIL {
            // Single-leaf list grows a root.
            let r = self.alloc_node(Node {
                parent: NIL,
                kids: [NIL; 4],
                nkids: 0,
                height: 1,
                id: u32::MAX,
                adj: self.zero_bits(),
                memb: self.zero_bits(),
            });
            let pair = if pos_after { [anchor, leaf] } else { [leaf, anchor] };
            self.set_kids(r, &pair);
            self.roots[list as usize] = r;
            return Ok((id, leaf));
        }
        let pn = self.node(parent);
        let at = pn.kids[..pn.nkids as usize]
            .iter()
            .position(|&k| k == anchor)
            .expect("leaf not under its parent");
        let at = if pos_after { at + 1 } else { at };
        let new_root = self.insert_child_at(parent, at, leaf);
        self.roots[list as usize] = new_root;
        Ok((id, leaf))
    }

    /// Remove a leaf and return its id to the pool. Any remaining adjacency
    /// bits are cleared symmetrically first, so no other leaf keeps a
    /// reference to the freed id.
    pub fn sc_delete(&mut self, list: ListKey, leaf: NodeRef) {
        let id = self.node(leaf).id;
        if !self.node(leaf).adj.is_zero() {
            let zero = self.zero_bits();
            self.update_adj(id, zero);
        }
        self.leaf_of[id as usize] = NIL;
        self.id_pool.insert(id);
        let parent = self.node(leaf).parent;
        self.free_node(leaf);
        if parent == NIL {
            self.roots[list as usize] = NIL;
            return;
        }
        let new_root = self.remove_child(parent, leaf);
        self.roots[list as usize] = new_root;
    }

    /// Remove `child` from `parent`, rebalancing upward; returns the root.
    fn remove_child(&mut self, parent: NodeRef, child: NodeRef) -> NodeRef {
        let n = self.node(parent);
        let mut kids: Vec<NodeRef> = n.kids[..n.nkids as usize].to_vec();
        let at = kids.iter().position(|&k| k == child).expect("not a child");
        kids.remove(at);
        if kids.len() >= 2 {
            self.set_kids(parent, &kids);
            self.refresh_up(parent);
            return self.root_of(parent);
        }
        let gp = self.node(parent).parent;
        if gp == NIL {
            // Root with one child: drop a level.
            let only = kids[0];
            self.node_mut(only).parent = NIL;
            self.free_node(parent);
            return only;
        }
        // Borrow from or merge with an adjacent sibling.
        let gn = self.node(gp);
        let gkids: Vec<NodeRef> = gn.kids[..gn.nkids as usize].to_vec();
        let pat = gkids.iter().position(|&k| k == parent).unwrap();
        let (sib, sib_left) = if pat > 0 {
            (gkids[pat - 1], true)
        } else {
            (gkids[pat + 1], false)
        };
        let sn = self.node(sib);
        let mut skids: Vec<NodeRef> = sn.kids[..sn.nkids as usize].to_vec();
        if skids.len() > 2 {
            if sib_left {
                let moved = skids.pop().unwrap();
                kids.insert(0, moved);
            } else {
                let moved = skids.remove(0);
                kids.push(moved);
            }
            self.set_kids(sib, &skids);
            self.set_kids(parent, &kids);
            self.refresh_up(parent);
            return self.root_of(parent);
        }
        // Merge the lone child into the sibling and drop `parent`.
        let merged: Vec<NodeRef> = if sib_left {
            skids.iter().copied().chain(kids.iter().copied()).collect()
        } else {
            kids.iter().copied().chain(skids.iter().copied()).collect()
        };
        self.set_kids(sib, &merged);
        self.free_node(parent);
        self.remove_child(gp, parent)
    }

    /// Replace the adjacency set of id `i` with `x`, keeping the relation
    /// symmetric: every id gained or lost in `x` has its own leaf's bit for
    /// `i` updated to match.
    pub fn update_adj(&mut self, i: u32, x: IdBitVec) {
        let leaf = self.leaf_of[i as usize];
        let old = self.node(leaf).adj.clone();
        self.node_mut(leaf).adj = x.clone();
        self.refresh_up(leaf);
        for j in old.ones() {
            if j != i && !x.get(j) {
                let lj = self.leaf_of[j as usize];
                if lj != NIL {
                    self.node_mut(lj).adj.clear(i);
                    self.refresh_up(lj);
                }
            }
        }
        for j in x.ones() {
            if j != i && !old.get(j) {
                let lj = self.leaf_of[j as usize];
                debug_assert!(lj != NIL, "adjacency names an unallocated id");
                self.node_mut(lj).adj.set(i);
                self.refresh_up(lj);
            }
        }
    }

    /// Set or clear a single adjacency bit `j` of id `i`, symmetrically.
    pub fn set_adj_bit(&mut self, i: u32, j: u32, present: bool) {
        for (a, b) in [(i, j), (j, i)] {
            let la = self.leaf_of[a as usize];
            if la == NIL {
                continue;
            }
            let has = self.node(la).adj.get(b);
            if has != present {
                if present {
                    self.node_mut(la).adj.set(b);
                } else {
                    self.node_mut(la).adj.clear(b);
                }
                self.refresh_up(la);
            }
            if i == j {
                break;
            }
        }
    }

    /// OR of all adjacency sets in the list.
    pub fn adj_query(&self, list: ListKey) -> IdBitVec {
        match self.roots[list as usize] {
            NIL => IdBitVec::zero(self.j),
            r => self.node(r).adj.clone(),
        }
    }

    /// Set of superchunk ids forming the list.
    pub fn memb_query(&self, list: ListKey) -> IdBitVec {
        match self.roots[list as usize] {
            NIL => IdBitVec::zero(self.j),
            r => self.node(r).memb.clone(),
        }
    }

    /// Find a leaf in the list whose adjacency set contains bit `j`.
    pub fn locate_leaf(&self, list: ListKey, j: u32) -> Option<NodeRef> {
        let mut r = self.roots[list as usize];
        if r == NIL || !self.node(r).adj.get(j) {
            return None;
        }
        while self.node(r).height > 0 {
            let n = self.node(r);
            r = *n.kids[..n.nkids as usize]
                .iter()
                .find(|&&k| self.node(k).adj.get(j))
                .expect("aggregate bit without child bit");
        }
        Some(r)
    }

    /// Leftmost leaf.
    pub fn first_leaf(&self, list: ListKey) -> Option<NodeRef> {
        let mut r = self.roots[list as usize];
        if r == NIL {
            return None;
        }
        while self.node(r).height > 0 {
            r = self.node(r).kids[0];
        }
        Some(r)
    }

    /// Leaf ids in list order.
    pub fn leaves(&self, list: ListKey) -> Vec<u32> {
        let mut out = Vec::new();
        if self.roots[list as usize] != NIL {
            self.collect_leaves(self.roots[list as usize], &mut out);
        }
        out
    }

    fn collect_leaves(&self, r: NodeRef, out: &mut Vec<u32>) {
        let n = self.node(r);
        if n.height == 0 {
            out.push(n.id);
        } else {
            for &k in &n.kids[..n.nkids as usize] {
                self.collect_leaves(k, out);
            }
        }
    }

    /// Join two roots (left leaves before right leaves); returns the root.
    fn join_roots(&mut self, left: NodeRef, right: NodeRef) -> NodeRef {
        if left == NIL {
            return right;
        }
        if right == NIL {
            return left;
        }
        let hl = self.node(left).height;
        let hr = self.node(right).height;
        if hl == hr {
            let r = self.alloc_node(Node {
                parent: NIL,
                kids: [NIL; 4],
                nkids: 0,
                height: hl + 1,
                id: u32::MAX,
                adj: self.zero_bits(),
                memb: self.zero_bits(),
            });
            self.set_kids(r, &[left, right]);
            return r;
        }
        if hl > hr {
            // Attach `right` under the rightmost spine of `left`.
            let mut at = left;
            while self.node(at).height > hr + 1 {
                let n = self.node(at);
                at = n.kids[n.nkids as usize - 1];
            }
            let pos = self.node(at).nkids as usize;
            self.insert_child_at(at, pos, right)
        } else {
            let mut at = right;
            while self.node(at).height > hl + 1 {
                at = self.node(at).kids[0];
            }
            self.insert_child_at(at, 0, left)
        }
    }

    /// Append list `b` to the end of list `a`; `b` becomes empty and is
    /// freed.
    pub fn sc_join(&mut self, a: ListKey, b: ListKey) {
        let rb = self.roots[b as usize];
        let ra = self.roots[a as usize];
        self.roots[b as usize] = NIL;
        self.free_list(b);
        self.roots[a as usize] = self.join_roots(ra, rb);
    }

    /// Split the list before `leaf`: `leaf` and everything after it move to a
    /// fresh list, which is returned.
    pub fn sc_split(&mut self, list: ListKey, leaf: NodeRef) -> ListKey {
        let new_list = self.new_list();
        let mut left_acc: NodeRef = NIL;
        let mut right_acc: NodeRef = leaf;
        let mut cur = leaf;
        let mut parent = self.node(leaf).parent;
        self.node_mut(leaf).parent = NIL;
        while parent != NIL {
            let pn = self.node(parent);
            let kids: Vec<NodeRef> = pn.kids[..pn.nkids as usize].to_vec();
            let next_parent = pn.parent;
            let at = kids.iter().position(|&k| k == cur).unwrap();
            let lefts = &kids[..at];
            let rights = &kids[at + 1..];
            let left_part = self.tree_of(lefts);
            let right_part = self.tree_of(rights);
            left_acc = self.join_roots(left_part, left_acc);
            right_acc = self.join_roots(right_acc, right_part);
            self.free_node(parent);
            cur = parent;
            parent = next_parent;
        }
        self.roots[list as usize] = left_acc;
        if left_acc != NIL {
            self.node_mut(left_acc).parent = NIL;
        }
        self.roots[new_list as usize] = right_acc;
        if right_acc != NIL {
            self.node_mut(right_acc).parent = NIL;
        }
        new_list
    }

    /// Wrap a run of same-height siblings as a standalone tree.
    fn tree_of(&mut self, kids: &[NodeRef]) -> NodeRef {
        match kids.len() {
            0 => NIL,
            1 => {
                self.node_mut(kids[0]).parent = NIL;
                kids[0]
            }
            _ => {
                let h = self.node(kids[0]).height + 1;
                let r = self.alloc_node(Node {
                    parent: NIL,
                    kids: [NIL; 4],
                    nkids: 0,
                    height: h,
                    id: u32::MAX,
                    adj: self.zero_bits(),
                    memb: self.zero_bits(),
                });
                self.set_kids(r, kids);
                r
            }
        }
    }

    /// Structural self-check of one list; returns leaf ids in order.
    pub fn check_list(&self, list: ListKey) -> Result<Vec<u32>, String> {
        let root = self.roots[list as usize];
        if root == NIL {
            return Ok(Vec::new());
        }
        if self.node(root).parent != NIL {
            return Err("root has a parent".into());
        }
        let mut out = Vec::new();
        self.check_node(root, root == self.roots[list as usize], &mut out)?;
        for &id in &out {
            if self.leaf_of[id as usize] == NIL {
                return Err(format!("leaf id {id} not in directory"));
            }
        }
        Ok(out)
    }

    fn check_node(&self, r: NodeRef, is_root: bool, out: &mut Vec<u32>) -> Result<(), String> {
        let n = self.node(r);
        if n.height == 0 {
            out.push(n.id);
            return Ok(());
        }
        let nk = n.nkids as usize;
        if nk < 2 && !is_root {
            return Err(format!("internal node with {nk} children"));
        }
        if !(1..=4).contains(&nk) {
            return Err(format!("node with {nk} children"));
        }
        let mut adj = IdBitVec::zero(self.j);
        let mut memb = IdBitVec::zero(self.j);
        for &k in &n.kids[..nk] {
            let c = self.node(k);
            if c.parent != r {
                return Err("child parent link broken".into());
            }
            if c.height + 1 != n.height {
                return Err("uneven heights".into());
            }
            adj.or_assign(&c.adj);
            memb.or_assign(&c.memb);
            self.check_node(k, false, out)?;
        }
        if adj != n.adj || memb != n.memb {
            return Err("stale aggregate".into());
        }
        Ok(())
    }
}

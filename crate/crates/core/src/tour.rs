//! Circular tour storage: elements, chunks, superchunks, and tours.
//!
//! Every tree of the spanning forest is kept as a circular sequence of
//! elements (vertex copies). Consecutive elements form chunks of bounded
//! mass, consecutive chunks form superchunks, and a tour records its
//! superchunk sequence. This module owns the slabs and the purely structural
//! surgery: element insertion and removal, chunk splitting and merging,
//! superchunk splitting, and sequence bookkeeping. Mass counts hosted edge
//! endpoints only (elements themselves are weightless), so every mass change
//! is driven by callers, who know what each element hosts.

/// Slab index of an element.
pub type ElemId = u32;
/// Slab index of a chunk.
pub type ChunkId = u32;
/// Slab index of a superchunk.
pub type ScId = u32;
/// Slab index of a tour.
pub type TourId = u32;

pub const NIL: u32 = u32::MAX;

/// Superchunk id marker for the unnumbered superchunk of a short tour.
pub const NO_ID: u32 = u32::MAX;

/// One vertex copy on a tour.
#[derive(Debug, Clone)]
pub struct Element {
    /// Vertex this element is a copy of.
    pub owner: u32,
    /// Artificial-part key within the owner when this copy is a principal;
    /// `u16::MAX` for ordinary copies.
    pub art: u16,
    pub prev: ElemId,
    pub next: ElemId,
    pub chunk: ChunkId,
    /// Tree edge whose oriented occurrence starts at this element's step, if
    /// the step leaves the owner vertex.
    pub out_edge: Option<u32>,
}

impl Element {
    /// True if this element is the principal copy of an artificial part.
    pub fn is_principal(&self) -> bool {
        self.art != u16::MAX
    }
}

/// A contiguous run of elements on a tour.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub first: ElemId,
    pub last: ElemId,
    pub n_elems: u32,
    /// Edge endpoints hosted at principals inside this chunk.
    pub mass: u32,
    pub sc: ScId,
}

/// A run of consecutive chunks.
#[derive(Debug, Clone)]
pub struct Superchunk {
    pub chunks: Vec<ChunkId>,
    pub tour: TourId,
    /// Allocated superchunk id, or `NO_ID` for the unnumbered superchunk of
    /// a short tour.
    pub id: u32,
    /// Leaf in the list-sum tree when the id is allocated.
    pub leaf: u32,
}

/// One tree of the forest.
#[derive(Debug, Clone)]
pub struct Tour {
    /// Superchunks in cyclic order (the vector may start anywhere on the
    /// cycle).
    pub scs: Vec<ScId>,
    /// List-sum key when the tour is long; `NIL` for short tours.
    pub list: u32,
    pub n_chunks: u32,
    pub n_elems: u64,
    pub mass: u64,
}

/// Slab storage for all tours.
#[derive(Debug, Default)]
pub struct TourStore {
    pub elems: Vec<Element>,
    free_elems: Vec<ElemId>,
    pub chunks: Vec<Chunk>,
    free_chunks: Vec<ChunkId>,
    pub scs: Vec<Superchunk>,
    free_scs: Vec<ScId>,
    pub tours: Vec<Tour>,
    free_tours: Vec<TourId>,
}

impl TourStore {
    pub fn new() -> TourStore {
        TourStore::default()
    }

    fn alloc_elem(&mut self, e: Element) -> ElemId {
        if let Some(r) = self.free_elems.pop() {
            self.elems[r as usize] = e;
            r
        } else {
            self.elems.push(e);
            (self.elems.len() - 1) as ElemId
        }
    }

    fn alloc_chunk(&mut self, c: Chunk) -> ChunkId {
        if let Some(r) = self.free_chunks.pop() {
            self.chunks[r as usize] = c;
            r
        } else {
            self.chunks.push(c);
            (self.chunks.len() - 1) as ChunkId
        }
    }

    pub fn alloc_sc(&mut self, s: Superchunk) -> ScId {
        if let Some(r) = self.free_scs.pop() {
            self.scs[r as usize] = s;
            r
        } else {
            self.scs.push(s);
            (self.scs.len() - 1) as ScId
        }
    }

    pub fn alloc_tour(&mut self, t: Tour) -> TourId {
        if let Some(r) = self.free_tours.pop() {
            self.tours[r as usize] = t;
            r
        } else {
            self.tours.push(t);
            (self.tours.len() - 1) as TourId
        }
    }

    pub fn free_sc(&mut self, s: ScId) {
        self.free_scs.push(s);
    }

    pub fn free_elem(&mut self, e: ElemId) {
        self.free_elems.push(e);
    }

    pub fn free_tour(&mut self, t: TourId) {
        self.free_tours.push(t);
    }

    pub fn free_chunk(&mut self, c: ChunkId) {
        self.free_chunks.push(c);
    }

    /// Build the one-element tour of an isolated vertex.
    pub fn new_singleton(&mut self, owner: u32, art: u16) -> (TourId, ElemId) {
        let elem = self.alloc_elem(Element {
            owner,
            art,
            prev: NIL,
            next: NIL,
            chunk: NIL,
            out_edge: None,
        });
        self.elems[elem as usize].prev = elem;
        self.elems[elem as usize].next = elem;
        let chunk = self.alloc_chunk(Chunk {
            first: elem,
            last: elem,
            n_elems: 1,
            mass: 0,
            sc: NIL,
        });
        self.elems[elem as usize].chunk = chunk;
        let sc = self.alloc_sc(Superchunk {
            chunks: vec![chunk],
            tour: NIL,
            id: NO_ID,
            leaf: NIL,
        });
        self.chunks[chunk as usize].sc = sc;
        let tour = self.alloc_tour(Tour {
            scs: vec![sc],
            list: NIL,
            n_chunks: 1,
            n_elems: 1,
            mass: 0,
        });
        self.scs[sc as usize].tour = tour;
        (tour, elem)
    }

    /// Tour that an element currently belongs to.
    pub fn tour_of_elem(&self, e: ElemId) -> TourId {
        let chunk = self.elems[e as usize].chunk;
        let sc = self.chunks[chunk as usize].sc;
        self.scs[sc as usize].tour
    }

    /// Adjust a chunk's mass (and its superchunk's tour totals) by `delta`.
    pub fn add_mass(&mut self, chunk: ChunkId, delta: i64) {
        let c = &mut self.chunks[chunk as usize];
        c.mass = (c.mass as i64 + delta) as u32;
        let t = self.scs[c.sc as usize].tour;
        let tour = &mut self.tours[t as usize];
        tour.mass = (tour.mass as i64 + delta) as u64;
    }

    /// Insert a fresh element right after `x`, in `x`'s chunk. When the new
    /// element has the same owner as `x`, `x`'s step becomes internal and its
    /// outgoing edge occurrence (if any) moves to the new element; the moved
    /// edge is returned so the caller can repoint the handle. When the owners
    /// differ, `x`'s step still leaves `x`'s vertex, so the occurrence stays.
    pub fn insert_element_after(&mut self, x: ElemId, owner: u32, art: u16) -> (ElemId, Option<u32>) {
        let moved_edge = if self.elems[x as usize].owner == owner {
            self.elems[x as usize].out_edge.take()
        } else {
            None
        };
        let next = self.elems[x as usize].next;
        let chunk = self.elems[x as usize].chunk;
        let e = self.alloc_elem(Element {
            owner,
            art,
            prev: x,
            next,
            chunk,
            out_edge: moved_edge,
        });
        self.elems[x as usize].next = e;
        self.elems[next as usize].prev = e;
        let c = &mut self.chunks[chunk as usize];
        if c.last == x {
            c.last = e;
        }
        c.n_elems += 1;
        let t = self.scs[c.sc as usize].tour;
        self.tours[t as usize].n_elems += 1;
        (e, moved_edge)
    }

    /// Remove element `y` from its tour. Requires a same-owner neighbor (the
    /// step into or out of `y` is internal) and that `y` is not the only
    /// element of its chunk. If `y`'s predecessor has the same owner, `y`'s
    /// outgoing occurrence (if any) transfers to the predecessor and is
    /// returned for handle repointing.
    pub fn remove_element(&mut self, y: ElemId) -> Option<(ElemId, u32)> {
        let (prev, next, chunk) = {
            let e = &self.elems[y as usize];
            (e.prev, e.next, e.chunk)
        };
        assert_ne!(prev, y, "cannot remove the last element of a tour");
        let c = &self.chunks[chunk as usize];
        assert!(c.n_elems > 1, "cannot empty a chunk by element removal");
        let transfer = if self.elems[prev as usize].owner == self.elems[y as usize].owner {
            let moved = self.elems[y as usize].out_edge.take();
            debug_assert!(self.elems[prev as usize].out_edge.is_none());
            self.elems[prev as usize].out_edge = moved;
            moved.map(|e| (prev, e))
        } else {
            assert_eq!(
                self.elems[next as usize].owner, self.elems[y as usize].owner,
                "element removal needs an internal adjacent step"
            );
            debug_assert!(self.elems[y as usize].out_edge.is_none());
            None
        };
        self.elems[prev as usize].next = next;
        self.elems[next as usize].prev = prev;
        let c = &mut self.chunks[chunk as usize];
        if c.first == y {
            c.first = next;
        }
        if c.last == y {
            c.last = prev;
        }
        c.n_elems -= 1;
        let t = self.scs[c.sc as usize].tour;
        self.tours[t as usize].n_elems -= 1;
        self.free_elems.push(y);
        transfer
    }

    /// Elements of a chunk in order.
    pub fn chunk_elems(&self, chunk: ChunkId) -> Vec<ElemId> {
        let c = &self.chunks[chunk as usize];
        let mut out = Vec::with_capacity(c.n_elems as usize);
        let mut e = c.first;
        loop {
            out.push(e);
            if e == c.last {
                break;
            }
            e = self.elems[e as usize].next;
        }
        out
    }

    /// Position of a chunk inside its superchunk.
    pub fn chunk_pos(&self, chunk: ChunkId) -> usize {
        let sc = self.chunks[chunk as usize].sc;
        self.scs[sc as usize]
            .chunks
            .iter()
            .position(|&c| c == chunk)
            .expect("chunk not in its superchunk")
    }

    /// Position of a superchunk inside its tour's vector.
    pub fn sc_pos(&self, sc: ScId) -> usize {
        let t = self.scs[sc as usize].tour;
        self.tours[t as usize]
            .scs
            .iter()
            .position(|&s| s == sc)
            .expect("superchunk not in its tour")
    }

    /// Total order key of an element within its tour: (superchunk position,
    /// chunk position, element offset). Costs a chunk walk plus two scans.
    pub fn order_key(&self, e: ElemId) -> (usize, usize, usize) {
        let chunk = self.elems[e as usize].chunk;
        let offset = self
            .chunk_elems(chunk)
            .iter()
            .position(|&x| x == e)
            .unwrap();
        let sc = self.chunks[chunk as usize].sc;
        (self.sc_pos(sc), self.chunk_pos(chunk), offset)
    }

    /// Split `x`'s chunk right after `x`: elements past `x` move to a fresh
    /// chunk inserted after it in the same superchunk. The new chunk starts
    /// with zero mass; the caller moves the hosted-endpoint mass of the tail
    /// via `transfer_mass`. No-op when `x` is already its chunk's last
    /// element.
    pub fn split_chunk_after(&mut self, x: ElemId) -> Option<ChunkId> {
        let chunk = self.elems[x as usize].chunk;
        let c = &self.chunks[chunk as usize];
        if c.last == x {
            return None;
        }
        let sc = c.sc;
        let old_last = c.last;
        let tail_first = self.elems[x as usize].next;
        // Count and relabel the tail.
        let mut n_tail = 0u32;
        let mut e = tail_first;
        let new_chunk = self.alloc_chunk(Chunk {
            first: tail_first,
            last: old_last,
            n_elems: 0,
            mass: 0,
            sc,
        });
        loop {
            self.elems[e as usize].chunk = new_chunk;
            n_tail += 1;
            if e == old_last {
                break;
            }
            e = self.elems[e as usize].next;
        }
        let c = &mut self.chunks[chunk as usize];
        c.last = x;
        c.n_elems -= n_tail;
        self.chunks[new_chunk as usize].n_elems = n_tail;
        let pos = self.chunk_pos(chunk);
        self.scs[sc as usize].chunks.insert(pos + 1, new_chunk);
        let t = self.scs[sc as usize].tour;
        self.tours[t as usize].n_chunks += 1;
        Some(new_chunk)
    }

    /// Move `delta` mass units from one chunk to another (used when hosted
    /// endpoints change chunks without elements moving).
    pub fn transfer_mass(&mut self, from: ChunkId, to: ChunkId, delta: i64) {
        self.add_mass(from, -delta);
        self.add_mass(to, delta);
    }

    /// Merge the chunk at position `pos + 1` of `sc` into the chunk at
    /// `pos`. Both must belong to `sc`. Returns the freed chunk.
    pub fn merge_chunk_with_next(&mut self, sc: ScId, pos: usize) -> ChunkId {
        let left = self.scs[sc as usize].chunks[pos];
        let right = self.scs[sc as usize].chunks[pos + 1];
        let (r_first, r_last, r_elems, r_mass) = {
            let r = &self.chunks[right as usize];
            (r.first, r.last, r.n_elems, r.mass)
        };
        debug_assert_eq!(self.elems[self.chunks[left as usize].last as usize].next, r_first);
        let mut e = r_first;
        loop {
            self.elems[e as usize].chunk = left;
            if e == r_last {
                break;
            }
            e = self.elems[e as usize].next;
        }
        let l = &mut self.chunks[left as usize];
        l.last = r_last;
        l.n_elems += r_elems;
        l.mass += r_mass;
        self.scs[sc as usize].chunks.remove(pos + 1);
        let t = self.scs[sc as usize].tour;
        self.tours[t as usize].n_chunks -= 1;
        self.free_chunks.push(right);
        right
    }

    /// Split a superchunk after chunk position `pos`: chunks `pos+1..` move
    /// to a fresh superchunk inserted right after in the tour's vector. The
    /// caller wires the id, list leaf, and adjacency.
    pub fn split_sc_after(&mut self, sc: ScId, pos: usize) -> ScId {
        let tail: Vec<ChunkId> = self.scs[sc as usize].chunks.split_off(pos + 1);
        assert!(!tail.is_empty(), "split past the end of a superchunk");
        let tour = self.scs[sc as usize].tour;
        let new_sc = self.alloc_sc(Superchunk {
            chunks: tail,
            tour,
            id: NO_ID,
            leaf: NIL,
        });
        for &c in &self.scs[new_sc as usize].chunks {
            self.chunks[c as usize].sc = new_sc;
        }
        let at = self.sc_pos(sc);
        self.tours[tour as usize].scs.insert(at + 1, new_sc);
        new_sc
    }

    /// Append the chunks of `src` to the end of `dst` (which must be the
    /// preceding superchunk on the tour) and drop `src` from the tour vector.
    /// The caller handles ids, leaves, and adjacency first.
    pub fn merge_sc_into_prev(&mut self, dst: ScId, src: ScId) {
        let moved = std::mem::take(&mut self.scs[src as usize].chunks);
        for &c in &moved {
            self.chunks[c as usize].sc = dst;
        }
        self.scs[dst as usize].chunks.extend(moved);
        let pos = self.sc_pos(src);
        let t = self.scs[src as usize].tour;
        self.tours[t as usize].scs.remove(pos);
        self.free_scs.push(src);
    }

    /// Mass of a chunk.
    pub fn chunk_mass(&self, c: ChunkId) -> u32 {
        self.chunks[c as usize].mass
    }

    /// Sum of element counts over a superchunk.
    pub fn sc_size(&self, sc: ScId) -> usize {
        self.scs[sc as usize].chunks.len()
    }

    /// Walk all elements of a tour in cyclic order starting at the first
    /// element of the first chunk of the first superchunk.
    pub fn tour_elems(&self, t: TourId) -> Vec<ElemId> {
        let tour = &self.tours[t as usize];
        let mut out = Vec::with_capacity(tour.n_elems as usize);
        for &sc in &tour.scs {
            for &c in &self.scs[sc as usize].chunks {
                out.extend(self.chunk_elems(c));
            }
        }
        out
    }

    /// Structural consistency of one tour: cycle links, chunk bounds and
    /// counts, back references, and totals (mass totals are the caller's to
    /// verify, since hosting lives outside this module).
    pub fn check_tour(&self, t: TourId) -> Result<(), String> {
        let tour = &self.tours[t as usize];
        if tour.scs.is_empty() {
            return Err(format!("tour {t} has no superchunks"));
        }
        let mut n_elems = 0u64;
        let mut n_chunks = 0u32;
        let mut all: Vec<ElemId> = Vec::new();
        for &sc in &tour.scs {
            let s = &self.scs[sc as usize];
            if s.tour != t {
                return Err(format!("superchunk {sc} points at tour {}", s.tour));
            }
            if s.chunks.is_empty() {
                return Err(format!("superchunk {sc} is empty"));
            }
            for &c in &s.chunks {
                let ch = &self.chunks[c as usize];
                if ch.sc != sc {
                    return Err(format!("chunk {c} points at superchunk {}", ch.sc));
                }
                let elems = self.chunk_elems(c);
                if elems.len() != ch.n_elems as usize {
                    return Err(format!(
                        "chunk {c} counts {} elements, walks {}",
                        ch.n_elems,
                        elems.len()
                    ));
                }
                for &e in &elems {
                    if self.elems[e as usize].chunk != c {
                        return Err(format!("element {e} points at chunk elsewhere"));
                    }
                }
                n_elems += elems.len() as u64;
                n_chunks += 1;
                all.extend(elems);
            }
        }
        if n_elems != tour.n_elems {
            return Err(format!(
                "tour {t} counts {} elements, walks {n_elems}",
                tour.n_elems
            ));
        }
        if n_chunks != tour.n_chunks {
            return Err(format!("tour {t} chunk count stale"));
        }
        // The concatenated walk must follow the next pointers cyclically.
        for (i, &e) in all.iter().enumerate() {
            let next = all[(i + 1) % all.len()];
            if self.elems[e as usize].next != next {
                return Err(format!("element {e} next pointer breaks the cycle"));
            }
            if self.elems[next as usize].prev != e {
                return Err(format!("element {next} prev pointer breaks the cycle"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_is_a_one_cycle() {
        let mut ts = TourStore::new();
        let (t, e) = ts.new_singleton(7, 0);
        assert_eq!(ts.elems[e as usize].next, e);
        assert_eq!(ts.tour_of_elem(e), t);
        ts.check_tour(t).unwrap();
    }

    #[test]
    fn insert_and_remove_elements_keep_the_cycle() {
        let mut ts = TourStore::new();
        let (t, e0) = ts.new_singleton(1, 0);
        let (e1, moved) = ts.insert_element_after(e0, 2, u16::MAX);
        assert!(moved.is_none());
        let (e2, _) = ts.insert_element_after(e1, 1, u16::MAX);
        ts.check_tour(t).unwrap();
        assert_eq!(ts.tours[t as usize].n_elems, 3);
        let walk: Vec<u32> = ts.tour_elems(t).iter().map(|&e| ts.elems[e as usize].owner).collect();
        assert_eq!(walk, vec![1, 2, 1]);
        // e2 has a same-owner predecessor chain via e0 (owner 1 at both ends).
        let transfer = ts.remove_element(e2);
        assert!(transfer.is_none());
        ts.check_tour(t).unwrap();
        assert_eq!(ts.tours[t as usize].n_elems, 2);
        assert_eq!(e2, ts.insert_element_after(e1, 9, u16::MAX).0, "slab reuse");
    }

    #[test]
    fn out_edge_moves_to_inserted_element() {
        let mut ts = TourStore::new();
        let (t, e0) = ts.new_singleton(1, 0);
        let (e1, _) = ts.insert_element_after(e0, 2, u16::MAX);
        ts.elems[e0 as usize].out_edge = Some(42);
        ts.elems[e1 as usize].out_edge = Some(43);
        // Appending a same-owner element after e1 extends vertex 2's run, so
        // e1's step becomes internal and its occurrence moves to the copy.
        let (e2, moved) = ts.insert_element_after(e1, 2, 1);
        assert_eq!(moved, Some(43));
        assert_eq!(ts.elems[e1 as usize].out_edge, None);
        assert_eq!(ts.elems[e2 as usize].out_edge, Some(43));
        ts.check_tour(t).unwrap();
        // Removing e1 (principal-free spot): predecessor e0 differs in owner,
        // successor e2 shares owner 2, so removal is legal, no transfer.
        ts.elems[e1 as usize].art = u16::MAX;
        let tr = ts.remove_element(e1);
        assert!(tr.is_none());
        ts.check_tour(t).unwrap();
        // Now removing e2 would empty no chunk; its predecessor e0 has a
        // different owner and successor is e0 too -- removal is illegal and
        // panics; covered in engine tests instead.
    }

    #[test]
    fn chunk_split_and_merge_round_trip() {
        let mut ts = TourStore::new();
        let (t, e0) = ts.new_singleton(0, 0);
        let mut prev = e0;
        for i in 1..6 {
            prev = ts.insert_element_after(prev, i, u16::MAX).0;
        }
        ts.check_tour(t).unwrap();
        let chunk0 = ts.elems[e0 as usize].chunk;
        assert_eq!(ts.chunks[chunk0 as usize].n_elems, 6);
        // Split after the third element.
        let elems = ts.chunk_elems(chunk0);
        let new_chunk = ts.split_chunk_after(elems[2]).unwrap();
        ts.check_tour(t).unwrap();
        assert_eq!(ts.chunks[chunk0 as usize].n_elems, 3);
        assert_eq!(ts.chunks[new_chunk as usize].n_elems, 3);
        let sc = ts.chunks[chunk0 as usize].sc;
        assert_eq!(ts.scs[sc as usize].chunks, vec![chunk0, new_chunk]);
        assert!(ts.split_chunk_after(elems[5]).is_none(), "already a boundary");
        // Merge back.
        ts.merge_chunk_with_next(sc, 0);
        ts.check_tour(t).unwrap();
        assert_eq!(ts.chunks[chunk0 as usize].n_elems, 6);
        assert_eq!(ts.tours[t as usize].n_chunks, 1);
    }

    #[test]
    fn superchunk_split_and_merge() {
        let mut ts = TourStore::new();
        let (t, e0) = ts.new_singleton(0, 0);
        let mut prev = e0;
        for i in 1..8 {
            prev = ts.insert_element_after(prev, i, u16::MAX).0;
        }
        let chunk0 = ts.elems[e0 as usize].chunk;
        let elems = ts.chunk_elems(chunk0);
        ts.split_chunk_after(elems[1]);
        ts.split_chunk_after(elems[3]);
        ts.split_chunk_after(elems[5]);
        ts.check_tour(t).unwrap();
        let sc = ts.chunks[chunk0 as usize].sc;
        assert_eq!(ts.sc_size(sc), 4);
        let new_sc = ts.split_sc_after(sc, 1);
        ts.check_tour(t).unwrap();
        assert_eq!(ts.sc_size(sc), 2);
        assert_eq!(ts.sc_size(new_sc), 2);
        assert_eq!(ts.tours[t as usize].scs, vec![sc, new_sc]);
        ts.merge_sc_into_prev(sc, new_sc);
        ts.check_tour(t).unwrap();
        assert_eq!(ts.sc_size(sc), 4);
    }

    #[test]
    fn order_keys_follow_the_walk() {
        let mut ts = TourStore::new();
        let (t, e0) = ts.new_singleton(0, 0);
        let mut prev = e0;
        for i in 1..6 {
            prev = ts.insert_element_after(prev, i, u16::MAX).0;
        }
        let chunk0 = ts.elems[e0 as usize].chunk;
        let elems = ts.chunk_elems(chunk0);
        ts.split_chunk_after(elems[2]);
        let walk = ts.tour_elems(t);
        let mut keys: Vec<(usize, usize, usize)> =
            walk.iter().map(|&e| ts.order_key(e)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        keys.dedup();
        assert_eq!(keys.len(), walk.len());
    }
}

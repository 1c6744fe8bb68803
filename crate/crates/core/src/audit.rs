//! Full-structure invariant audit.
//!
//! Recomputes from scratch every fact the engine maintains incrementally:
//! Euler-walk validity, principal-run contiguity, hosting loads, chunk
//! masses, chunk and superchunk size bounds, superchunk ids, every matrix
//! bit, the aggregate bits over each walk, and component structure against
//! a brute-force oracle. Returns one entry per disagreement. Slow by
//! design; tests call it between operations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::engine::Connectivity;
use crate::graph::{EdgeId, NIL_ART};
use crate::oracle::OracleGraph;
use crate::tour::{TourId, NIL, NO_ID};

/// One invariant breach found by [`audit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Which rule was broken (a short stable tag).
    pub rule: &'static str,
    /// What exactly disagreed.
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.detail)
    }
}

fn push(out: &mut Vec<Violation>, rule: &'static str, detail: String) {
    out.push(Violation { rule, detail });
}

/// Check every maintained invariant of `c` and report all breaches.
pub fn audit(c: &Connectivity) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = c.params().n;
    let k = c.params().k;
    let h = c.params().h as usize;
    let j = c.params().j;

    if !c.dirty.is_empty() {
        push(&mut out, "dirty", format!("{} chunks still queued", c.dirty.len()));
    }

    // Vertex-local hosting invariants.
    for v in 0..n {
        if let Err(e) = c.graph.check_vertex(v, k) {
            push(&mut out, "vertex", e);
        }
    }

    // Live walks, one per component member.
    let live_tours: BTreeSet<TourId> = (0..n).map(|v| c.vertex_tour(v)).collect();

    // Walk-level structure: container consistency plus Euler validity of
    // every step, collecting the crossings of each forest edge.
    let mut crossings: BTreeMap<EdgeId, Vec<u32>> = BTreeMap::new();
    let mut elem_tour: BTreeMap<u32, TourId> = BTreeMap::new();
    for &t in &live_tours {
        if let Err(e) = c.tours.check_tour(t) {
            push(&mut out, "walk", e);
            continue;
        }
        for e in c.tours.tour_elems(t) {
            elem_tour.insert(e, t);
            let el = &c.tours.elems[e as usize];
            if el.owner >= n {
                push(&mut out, "walk", format!("element {e} owned by ghost vertex"));
                continue;
            }
            let next_owner = c.tours.elems[el.next as usize].owner;
            match el.out_edge {
                None => {
                    if next_owner != el.owner && el.next != e {
                        push(
                            &mut out,
                            "step",
                            format!("element {e} leaves vertex {} without an edge", el.owner),
                        );
                    }
                }
                Some(f) => {
                    let rec = c.graph.edge(f);
                    if !rec.tree {
                        push(&mut out, "step", format!("element {e} crosses non-forest edge {f}"));
                    } else if rec.u != el.owner && rec.v != el.owner {
                        push(
                            &mut out,
                            "step",
                            format!("element {e} crosses edge {f} not incident to its vertex"),
                        );
                    } else if next_owner != rec.other(el.owner) {
                        push(
                            &mut out,
                            "step",
                            format!("element {e} crosses edge {f} but lands elsewhere"),
                        );
                    }
                    crossings.entry(f).or_default().push(e);
                }
            }
        }
    }

    // Edge records: hosting assigned, forest edges crossed exactly twice at
    // their registered occurrences.
    for (&(u, v), &f) in &c.graph.by_pair {
        let rec = c.graph.edge(f);
        if (rec.u.min(rec.v), rec.u.max(rec.v)) != (u, v) {
            push(&mut out, "edge", format!("edge {f} filed under wrong pair ({u},{v})"));
        }
        if rec.host_u == NIL_ART || rec.host_v == NIL_ART {
            push(&mut out, "edge", format!("edge {f} has an unhosted endpoint"));
        }
        if rec.tree {
            let occs = crossings.remove(&f).unwrap_or_default();
            let mut expect = [rec.occ_uv, rec.occ_vu];
            expect.sort_unstable();
            let mut got = occs.clone();
            got.sort_unstable();
            if got != expect {
                push(
                    &mut out,
                    "occurrence",
                    format!("edge {f} crossed at {got:?}, registered {expect:?}"),
                );
                continue;
            }
            if c.tours.elems[rec.occ_uv as usize].owner != rec.u
                || c.tours.elems[rec.occ_vu as usize].owner != rec.v
            {
                push(&mut out, "occurrence", format!("edge {f} occurrences swapped"));
            }
        }
    }
    for (&f, occs) in &crossings {
        push(
            &mut out,
            "occurrence",
            format!("stale crossings {occs:?} for edge {f}"),
        );
    }

    // Principal runs: each vertex's principals sit consecutively on its
    // walk, in part order, each pointing back at its part.
    for x in 0..n {
        let order = c.graph.verts[x as usize].order.clone();
        let mut prev = c.graph.art(x, order[0]).principal;
        for (i, &key) in order.iter().enumerate() {
            let p = c.graph.art(x, key).principal;
            let el = &c.tours.elems[p as usize];
            if el.owner != x || el.art != key {
                push(&mut out, "principal", format!("part ({x},{key}) backref broken"));
            }
            if i > 0 && c.tours.elems[prev as usize].next != p {
                push(
                    &mut out,
                    "principal",
                    format!("vertex {x} parts {} and {key} not adjacent on the walk", order[i - 1]),
                );
            }
            prev = p;
        }
    }

    // Chunk masses against hosting, and the chunk-mass invariant.
    let expected_chunk_mass = |chunk: u32| -> u32 {
        c.tours
            .chunk_elems(chunk)
            .iter()
            .map(|&e| {
                let el = &c.tours.elems[e as usize];
                if el.is_principal() {
                    c.graph.load(el.owner, el.art)
                } else {
                    0
                }
            })
            .sum()
    };
    for &t in &live_tours {
        let tour = &c.tours.tours[t as usize];
        let mut total = 0u64;
        for &sc in &tour.scs {
            for &chunk in &c.tours.scs[sc as usize].chunks {
                let want = expected_chunk_mass(chunk);
                let got = c.tours.chunks[chunk as usize].mass;
                if got != want {
                    push(
                        &mut out,
                        "mass",
                        format!("chunk {chunk} mass {got}, hosting says {want}"),
                    );
                }
                total += want as u64;
            }
        }
        if tour.mass != total {
            push(&mut out, "mass", format!("walk {t} total {} != {total}", tour.mass));
        }
        if total < k as u64 {
            if tour.n_chunks != 1 {
                push(
                    &mut out,
                    "chunk-bounds",
                    format!("light walk {t} split into {} chunks", tour.n_chunks),
                );
            }
        } else {
            for &sc in &tour.scs {
                for &chunk in &c.tours.scs[sc as usize].chunks {
                    let m = c.tours.chunks[chunk as usize].mass;
                    if m < k || m > 3 * k {
                        push(
                            &mut out,
                            "chunk-bounds",
                            format!("chunk {chunk} mass {m} outside [{k},{}]", 3 * k),
                        );
                    }
                }
            }
        }
    }

    // Superchunk arity, ids, and the short/long form of each walk.
    let mut numbered: BTreeMap<u32, u32> = BTreeMap::new();
    for &t in &live_tours {
        let tour = &c.tours.tours[t as usize];
        let long = tour.list != NIL;
        if long {
            if (tour.n_chunks as usize) < h / 2 {
                push(
                    &mut out,
                    "sc-bounds",
                    format!("walk {t} is long with only {} chunks", tour.n_chunks),
                );
            }
            if c.short.contains_key(&t) {
                push(&mut out, "form", format!("long walk {t} still has a short matrix"));
            }
            for &sc in &tour.scs {
                let s = &c.tours.scs[sc as usize];
                let len = s.chunks.len();
                if len < h / 2 || len > h - 1 {
                    push(
                        &mut out,
                        "sc-bounds",
                        format!("superchunk {sc} holds {len} chunks, wants [{}..{}]", h / 2, h - 1),
                    );
                }
                if s.id == NO_ID || s.leaf == NIL {
                    push(&mut out, "sc-id", format!("superchunk {sc} of long walk unnumbered"));
                    continue;
                }
                if let Some(old) = numbered.insert(s.id, sc) {
                    push(&mut out, "sc-id", format!("id {} on superchunks {old} and {sc}", s.id));
                }
                if c.sc_by_id.get(&s.id) != Some(&sc) {
                    push(&mut out, "sc-id", format!("id {} not mapped back to {sc}", s.id));
                }
                if c.list.leaf_id(s.leaf) != s.id {
                    push(&mut out, "sc-id", format!("leaf of superchunk {sc} holds a different id"));
                }
            }
            match c.list.check_list(tour.list) {
                Err(e) => push(&mut out, "list", e),
                Ok(ids) => {
                    let want: Vec<u32> = tour
                        .scs
                        .iter()
                        .map(|&sc| c.tours.scs[sc as usize].id)
                        .collect();
                    if ids != want {
                        push(
                            &mut out,
                            "list",
                            format!("walk {t} list order {ids:?}, containers say {want:?}"),
                        );
                    }
                }
            }
        } else {
            if (tour.n_chunks as usize) >= h / 2 {
                push(
                    &mut out,
                    "sc-bounds",
                    format!("walk {t} is short with {} chunks", tour.n_chunks),
                );
            }
            if tour.scs.len() != 1 {
                push(&mut out, "form", format!("short walk {t} has {} superchunks", tour.scs.len()));
            }
            for &sc in &tour.scs {
                let s = &c.tours.scs[sc as usize];
                if s.id != NO_ID || s.leaf != NIL {
                    push(&mut out, "sc-id", format!("short superchunk {sc} carries an id"));
                }
            }
        }
    }
    if numbered.len() as u32 > j {
        push(
            &mut out,
            "sc-id",
            format!("{} numbered superchunks exceed the budget {j}", numbered.len()),
        );
    }
    for (&id, &sc) in &c.sc_by_id {
        if numbered.get(&id) != Some(&sc) {
            push(&mut out, "sc-id", format!("stale id map entry {id} -> {sc}"));
        }
    }

    // Matrix bits, recomputed from the edges themselves. A bit (k of i,
    // l of j) is expected exactly when some live edge has one endpoint
    // hosted in chunk k of superchunk i and the other in chunk l of j.
    let host_coord = |x: u32, key: u16| -> (u32, usize) {
        let p = c.graph.art(x, key).principal;
        let chunk = c.tours.elems[p as usize].chunk;
        (chunk, c.tours.chunk_pos(chunk))
    };
    let mut want_cells: BTreeMap<(u32, u32), BTreeSet<(u32, u32)>> = BTreeMap::new();
    let mut want_short: BTreeMap<TourId, BTreeSet<(u32, u32)>> = BTreeMap::new();
    for &f in c.graph.by_pair.values() {
        let rec = c.graph.edge(f);
        let (cu, ku) = host_coord(rec.u, rec.host_u);
        let (cv, kv) = host_coord(rec.v, rec.host_v);
        let su = c.tours.chunks[cu as usize].sc;
        let sv = c.tours.chunks[cv as usize].sc;
        let iu = c.tours.scs[su as usize].id;
        let iv = c.tours.scs[sv as usize].id;
        if (iu == NO_ID) != (iv == NO_ID) {
            push(&mut out, "cells", format!("edge {f} spans short and long walks"));
            continue;
        }
        if iu == NO_ID {
            let t = c.tours.scs[su as usize].tour;
            if c.tours.scs[sv as usize].tour != t {
                push(&mut out, "cells", format!("edge {f} spans two short walks"));
                continue;
            }
            let set = want_short.entry(t).or_default();
            set.insert((ku as u32, kv as u32));
            set.insert((kv as u32, ku as u32));
        } else {
            let (key, kl) = if iu <= iv {
                ((iu, iv), (ku as u32, kv as u32))
            } else {
                ((iv, iu), (kv as u32, ku as u32))
            };
            let set = want_cells.entry(key).or_default();
            set.insert(kl);
            if iu == iv {
                set.insert((kl.1, kl.0));
            }
        }
    }
    let mut got_cells: BTreeMap<(u32, u32), BTreeSet<(u32, u32)>> = BTreeMap::new();
    for (key, entries) in c.adj.snapshot(&c.ctx) {
        got_cells.insert(key, entries.into_iter().collect());
    }
    for (key, want) in &want_cells {
        match got_cells.get(key) {
            None => push(&mut out, "cells", format!("cell {key:?} missing entirely")),
            Some(got) if got != want => {
                let extra: Vec<_> = got.difference(want).collect();
                let missing: Vec<_> = want.difference(got).collect();
                push(
                    &mut out,
                    "cells",
                    format!("cell {key:?} extra bits {extra:?}, missing bits {missing:?}"),
                );
            }
            _ => {}
        }
    }
    for key in got_cells.keys() {
        if !want_cells.contains_key(key) {
            push(&mut out, "cells", format!("cell {key:?} should not exist"));
        }
    }

    // Short-walk matrices.
    for &t in &live_tours {
        if c.tours.tours[t as usize].list != NIL {
            continue;
        }
        let want = want_short.remove(&t).unwrap_or_default();
        let got: BTreeSet<(u32, u32)> = match c.short.get(&t) {
            Some(m) => m.entries(&c.ctx).into_iter().collect(),
            None => BTreeSet::new(),
        };
        if got != want {
            let extra: Vec<_> = got.difference(&want).collect();
            let missing: Vec<_> = want.difference(&got).collect();
            push(
                &mut out,
                "short-matrix",
                format!("walk {t} extra bits {extra:?}, missing bits {missing:?}"),
            );
        }
    }
    for (t, _) in want_short {
        push(&mut out, "short-matrix", format!("expected bits for unknown walk {t}"));
    }
    for &t in c.short.keys() {
        if !live_tours.contains(&t) {
            push(&mut out, "short-matrix", format!("matrix kept for dead walk {t}"));
        }
    }

    // Aggregate adjacency bits at the list leaves.
    for (&id, &sc) in &c.sc_by_id {
        let leaf = c.tours.scs[sc as usize].leaf;
        let got: BTreeSet<u32> = c.list.leaf_adj(leaf).ones().collect();
        let want: BTreeSet<u32> = c.adj.partners(id).into_iter().collect();
        if got != want {
            push(
                &mut out,
                "aggregate",
                format!("id {id} leaf bits {got:?}, cells say {want:?}"),
            );
        }
    }

    // Components: walk identity must match brute-force connectivity, and
    // the forest must span every component.
    let mut oracle = OracleGraph::new(n);
    let mut tree_edges = 0usize;
    for (&(u, v), &f) in &c.graph.by_pair {
        oracle.insert(u, v);
        if c.graph.edge(f).tree {
            tree_edges += 1;
        }
    }
    let labels = oracle.component_labels();
    let mut tour_label: BTreeMap<TourId, u32> = BTreeMap::new();
    let mut label_tour: BTreeMap<u32, TourId> = BTreeMap::new();
    for v in 0..n {
        let t = c.vertex_tour(v);
        let l = labels[v as usize];
        if *tour_label.entry(t).or_insert(l) != l {
            push(&mut out, "components", format!("walk {t} spans two components"));
        }
        if *label_tour.entry(l).or_insert(t) != t {
            push(&mut out, "components", format!("component {l} split across walks"));
        }
    }
    let components = label_tour.len();
    if tree_edges != n as usize - components {
        push(
            &mut out,
            "components",
            format!("{tree_edges} forest edges for {components} components of {n} vertices"),
        );
    }

    out
}

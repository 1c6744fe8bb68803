//! Vertex, artificial-part, and edge records.
//!
//! Every vertex owns a small set of artificial parts; each part hosts a
//! bounded number of incident edge endpoints and owns one principal element
//! on the vertex's tour. Parts are kept in interval order (the order their
//! principals appear on the tour). Edges record which part hosts each of
//! their endpoints, plus the two oriented tour occurrences when the edge is
//! in the spanning forest. This module owns the slabs and the local
//! bookkeeping; rebalancing policy and tour mutation live in the engine.

use std::collections::BTreeMap;

use crate::tour::ElemId;

pub type EdgeId = u32;

pub const NIL_ART: u16 = u16::MAX;

/// One artificial part of a vertex.
#[derive(Debug, Clone)]
pub struct Artificial {
    /// Principal element on the owner's tour.
    pub principal: ElemId,
    /// Edge endpoints hosted by this part.
    pub hosted: Vec<EdgeId>,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    arts: Vec<Option<Artificial>>,
    free_arts: Vec<u16>,
    /// Part keys in interval order.
    pub order: Vec<u16>,
    /// Number of incident edges.
    pub deg: u32,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub tree: bool,
    /// Part key hosting the `u` endpoint, and its index in that part's
    /// hosted vector.
    pub host_u: u16,
    pub pos_u: u32,
    pub host_v: u16,
    pub pos_v: u32,
    /// Element whose step crosses from `u` to `v` (forest edges only).
    pub occ_uv: ElemId,
    /// Element whose step crosses from `v` to `u` (forest edges only).
    pub occ_vu: ElemId,
}

impl Edge {
    /// The endpoint of this edge other than `x`.
    pub fn other(&self, x: u32) -> u32 {
        if self.u == x {
            self.v
        } else {
            debug_assert_eq!(self.v, x);
            self.u
        }
    }

    /// Host part key for endpoint `x`.
    pub fn host_of(&self, x: u32) -> u16 {
        if self.u == x {
            self.host_u
        } else {
            debug_assert_eq!(self.v, x);
            self.host_v
        }
    }
}

/// Slab storage for vertices and edges.
#[derive(Debug)]
pub struct GraphStore {
    pub verts: Vec<Vertex>,
    edges: Vec<Edge>,
    free_edges: Vec<EdgeId>,
    /// Normalized endpoint pair -> edge id; doubles as the deterministic
    /// iteration order for the witness forest.
    pub by_pair: BTreeMap<(u32, u32), EdgeId>,
    pub n_edges: usize,
}

fn pair(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl GraphStore {
    pub fn new(n: u32) -> GraphStore {
        let verts = (0..n)
            .map(|_| Vertex {
                arts: Vec::new(),
                free_arts: Vec::new(),
                order: Vec::new(),
                deg: 0,
            })
            .collect();
        GraphStore {
            verts,
            edges: Vec::new(),
            free_edges: Vec::new(),
            by_pair: BTreeMap::new(),
            n_edges: 0,
        }
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e as usize]
    }

    pub fn edge_mut(&mut self, e: EdgeId) -> &mut Edge {
        &mut self.edges[e as usize]
    }

    pub fn lookup(&self, u: u32, v: u32) -> Option<EdgeId> {
        self.by_pair.get(&pair(u, v)).copied()
    }

    pub fn add_edge_record(&mut self, u: u32, v: u32) -> EdgeId {
        let e = Edge {
            u,
            v,
            tree: false,
            host_u: NIL_ART,
            pos_u: 0,
            host_v: NIL_ART,
            pos_v: 0,
            occ_uv: crate::tour::NIL,
            occ_vu: crate::tour::NIL,
        };
        let id = if let Some(r) = self.free_edges.pop() {
            self.edges[r as usize] = e;
            r
        } else {
            self.edges.push(e);
            (self.edges.len() - 1) as EdgeId
        };
        self.by_pair.insert(pair(u, v), id);
        self.verts[u as usize].deg += 1;
        self.verts[v as usize].deg += 1;
        self.n_edges += 1;
        id
    }

    /// Drop an edge record. Both endpoints must already be unhosted.
    pub fn remove_edge_record(&mut self, id: EdgeId) -> Edge {
        let e = self.edges[id as usize].clone();
        debug_assert_eq!(e.host_u, NIL_ART);
        debug_assert_eq!(e.host_v, NIL_ART);
        self.by_pair.remove(&pair(e.u, e.v));
        self.verts[e.u as usize].deg -= 1;
        self.verts[e.v as usize].deg -= 1;
        self.n_edges -= 1;
        self.free_edges.push(id);
        e
    }

    /// Allocate a part for `vertex` at the end of its interval order. The
    /// caller assigns the principal element afterwards.
    pub fn new_art(&mut self, vertex: u32) -> u16 {
        let vx = &mut self.verts[vertex as usize];
        let key = if let Some(k) = vx.free_arts.pop() {
            vx.arts[k as usize] = Some(Artificial {
                principal: crate::tour::NIL,
                hosted: Vec::new(),
            });
            k
        } else {
            vx.arts.push(Some(Artificial {
                principal: crate::tour::NIL,
                hosted: Vec::new(),
            }));
            (vx.arts.len() - 1) as u16
        };
        vx.order.push(key);
        key
    }

    /// Remove a part (any interval position). It must host nothing.
    pub fn drop_art(&mut self, vertex: u32, key: u16) {
        let vx = &mut self.verts[vertex as usize];
        let art = vx.arts[key as usize].take().expect("dropping a dead part");
        assert!(art.hosted.is_empty(), "dropping a part that still hosts edges");
        let pos = vx.order.iter().position(|&k| k == key).unwrap();
        vx.order.remove(pos);
        vx.free_arts.push(key);
    }

    pub fn art(&self, vertex: u32, key: u16) -> &Artificial {
        self.verts[vertex as usize].arts[key as usize]
            .as_ref()
            .expect("dead part")
    }

    pub fn set_principal(&mut self, vertex: u32, key: u16, elem: ElemId) {
        self.verts[vertex as usize].arts[key as usize]
            .as_mut()
            .unwrap()
            .principal = elem;
    }

    pub fn load(&self, vertex: u32, key: u16) -> u32 {
        self.art(vertex, key).hosted.len() as u32
    }

    /// Number of parts of a vertex.
    pub fn parts(&self, vertex: u32) -> usize {
        self.verts[vertex as usize].order.len()
    }

    /// Part with the smallest load; ties go to the latest interval position.
    pub fn min_load_art(&self, vertex: u32) -> u16 {
        let vx = &self.verts[vertex as usize];
        let mut best = vx.order[0];
        let mut best_load = self.load(vertex, best);
        for &k in &vx.order[1..] {
            let l = self.load(vertex, k);
            if l <= best_load {
                best = k;
                best_load = l;
            }
        }
        best
    }

    /// Attach one endpoint of `edge` to a part of `vertex`.
    pub fn assign_host(&mut self, edge: EdgeId, vertex: u32, key: u16) {
        let pos = {
            let art = self.verts[vertex as usize].arts[key as usize]
                .as_mut()
                .unwrap();
            art.hosted.push(edge);
            (art.hosted.len() - 1) as u32
        };
        let e = &mut self.edges[edge as usize];
        if e.u == vertex {
            debug_assert_eq!(e.host_u, NIL_ART);
            e.host_u = key;
            e.pos_u = pos;
        } else {
            debug_assert_eq!(e.v, vertex);
            debug_assert_eq!(e.host_v, NIL_ART);
            e.host_v = key;
            e.pos_v = pos;
        }
    }

    /// Detach one endpoint of `edge` from its host part. Returns the part
    /// key it was hosted by.
    pub fn unassign_host(&mut self, edge: EdgeId, vertex: u32) -> u16 {
        let (key, pos) = {
            let e = &mut self.edges[edge as usize];
            if e.u == vertex {
                let r = (e.host_u, e.pos_u);
                e.host_u = NIL_ART;
                r
            } else {
                debug_assert_eq!(e.v, vertex);
                let r = (e.host_v, e.pos_v);
                e.host_v = NIL_ART;
                r
            }
        };
        assert_ne!(key, NIL_ART);
        let swapped = {
            let art = self.verts[vertex as usize].arts[key as usize]
                .as_mut()
                .unwrap();
            art.hosted.swap_remove(pos as usize);
            if (pos as usize) < art.hosted.len() {
                Some(art.hosted[pos as usize])
            } else {
                None
            }
        };
        if let Some(moved) = swapped {
            let m = &mut self.edges[moved as usize];
            if m.u == vertex && m.host_u == key {
                m.pos_u = pos;
            } else {
                debug_assert!(m.v == vertex && m.host_v == key);
                m.pos_v = pos;
            }
        }
        key
    }

    /// Move one endpoint of `edge` from its current part to `to`.
    pub fn move_host(&mut self, edge: EdgeId, vertex: u32, to: u16) -> u16 {
        let from = self.unassign_host(edge, vertex);
        self.assign_host(edge, vertex, to);
        from
    }

    /// Pop the most recently hosted edge of a part (used when donating a
    /// batch of endpoints to a new part).
    pub fn last_hosted(&self, vertex: u32, key: u16) -> Option<EdgeId> {
        self.art(vertex, key).hosted.last().copied()
    }

    /// Per-vertex consistency: slab/order agreement, hosted back references,
    /// degree totals, and load bounds (`max(1, ceil(deg/k))..` parts with
    /// loads in `[k/2, k]` when there are two or more).
    pub fn check_vertex(&self, vertex: u32, k: u32) -> Result<(), String> {
        let vx = &self.verts[vertex as usize];
        if vx.order.is_empty() {
            return Err(format!("vertex {vertex} has no parts"));
        }
        let mut seen = vec![false; vx.arts.len()];
        let mut hosted_total = 0u32;
        for &key in &vx.order {
            let art = vx.arts[key as usize]
                .as_ref()
                .ok_or_else(|| format!("vertex {vertex} orders dead part {key}"))?;
            if seen[key as usize] {
                return Err(format!("vertex {vertex} orders part {key} twice"));
            }
            seen[key as usize] = true;
            let load = art.hosted.len() as u32;
            hosted_total += load;
            if load > k {
                return Err(format!("vertex {vertex} part {key} overloaded: {load}"));
            }
            if vx.order.len() >= 2 && load < k / 2 {
                return Err(format!("vertex {vertex} part {key} underloaded: {load}"));
            }
            for (i, &e) in art.hosted.iter().enumerate() {
                let ed = &self.edges[e as usize];
                let ok = (ed.u == vertex && ed.host_u == key && ed.pos_u == i as u32)
                    || (ed.v == vertex && ed.host_v == key && ed.pos_v == i as u32);
                if !ok {
                    return Err(format!(
                        "vertex {vertex} part {key} hosted slot {i} mismatched on edge {e}"
                    ));
                }
            }
        }
        if hosted_total != vx.deg {
            return Err(format!(
                "vertex {vertex} hosts {hosted_total} endpoints for degree {}",
                vx.deg
            ));
        }
        Ok(())
    }
}

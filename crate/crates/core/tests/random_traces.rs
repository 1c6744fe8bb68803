//! Randomized differential tests: long operation sequences replayed against
//! a brute-force oracle, with the full-structure audit run along the way.

use dyconn::audit::audit;
use dyconn::oracle::OracleGraph;
use dyconn::{Connectivity, Encoding, Overrides};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Drive `steps` random operations on both structures, comparing every
/// query answer, cross-checking the witness forest, and auditing every
/// `audit_every` mutations. Returns the number of mutations applied.
fn drive(
    c: &mut Connectivity,
    seed: u64,
    steps: usize,
    audit_every: usize,
    check_all_pairs: bool,
) -> usize {
    let n = c.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = OracleGraph::new(n);
    let mut live: Vec<(u32, u32)> = Vec::new();
    let mut mutations = 0usize;

    for step in 0..steps {
        let roll = rng.gen_range(0u32..10);
        if roll < 4 || (live.is_empty() && roll < 8) {
            // Try to insert a fresh edge.
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u == v || oracle.has_edge(u, v) || oracle.edge_count() >= c.params().mhat {
                continue;
            }
            c.insert(u, v).unwrap();
            oracle.insert(u, v);
            live.push((u.min(v), u.max(v)));
            mutations += 1;
        } else if roll < 8 {
            // Delete a random live edge.
            if live.is_empty() {
                continue;
            }
            let at = rng.gen_range(0..live.len());
            let (u, v) = live.swap_remove(at);
            c.delete(u, v).unwrap();
            oracle.delete(u, v);
            mutations += 1;
        } else {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            assert_eq!(
                c.connected(u, v).unwrap(),
                oracle.connected(u, v),
                "query ({u},{v}) disagrees at step {step} (seed {seed})"
            );
            continue;
        }

        if check_all_pairs {
            for u in 0..n {
                for v in (u + 1)..n {
                    assert_eq!(
                        c.connected(u, v).unwrap(),
                        oracle.connected(u, v),
                        "pair ({u},{v}) disagrees at step {step} (seed {seed})"
                    );
                }
            }
        }

        // The witness forest must be a subset of the live edges, acyclic,
        // and connect exactly the connected pairs.
        let forest = c.witness_forest();
        let mut witness = OracleGraph::new(n);
        for &(u, v) in &forest {
            assert!(oracle.has_edge(u, v), "witness edge ({u},{v}) is not live");
            assert!(
                !witness.connected(u, v),
                "witness forest has a cycle through ({u},{v})"
            );
            witness.insert(u, v);
        }
        let labels = oracle.component_labels();
        let witness_labels = witness.component_labels();
        for u in 0..n {
            for v in (u + 1)..n {
                assert_eq!(
                    labels[u as usize] == labels[v as usize],
                    witness_labels[u as usize] == witness_labels[v as usize],
                    "witness forest misconnects ({u},{v}) at step {step} (seed {seed})"
                );
            }
        }

        if mutations % audit_every == 0 {
            let report = audit(c);
            assert!(
                report.is_empty(),
                "audit failed at step {step} (seed {seed}):\n{}",
                report
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join("\n")
            );
        }
    }

    // Settle: audit once more, then drain the graph and audit empty.
    let report = audit(c);
    assert!(report.is_empty(), "final audit (seed {seed}): {report:?}");
    while let Some((u, v)) = live.pop() {
        c.delete(u, v).unwrap();
        oracle.delete(u, v);
    }
    assert_eq!(c.edge_count(), 0);
    let report = audit(c);
    assert!(report.is_empty(), "drained audit (seed {seed}): {report:?}");
    mutations
}

fn overrides(k: Option<u32>, h: Option<u32>) -> Overrides {
    Overrides {
        k,
        h,
        word_bits: None,
    }
}

#[test]
fn small_graphs_match_oracle_exhaustively() {
    // Tiny instances with tiny chunk parameters force every restructuring
    // path; all-pairs answers are checked after every mutation.
    for enc in [Encoding::Dense, Encoding::Packed] {
        for seed in 0..8 {
            let mut c = Connectivity::new(10, 40, enc, overrides(Some(2), Some(4))).unwrap();
            drive(&mut c, seed, 300, 1, true);
        }
    }
}

#[test]
fn medium_graphs_match_oracle() {
    for enc in [Encoding::Dense, Encoding::Packed] {
        for seed in 10..14 {
            let mut c = Connectivity::new(40, 300, enc, overrides(Some(4), Some(6))).unwrap();
            drive(&mut c, seed, 700, 7, false);
        }
    }
}

#[test]
fn derived_parameters_match_oracle() {
    // No overrides: chunk size and arity fall out of n and the edge budget.
    for enc in [Encoding::Dense, Encoding::Packed] {
        for seed in 20..23 {
            let mut c = Connectivity::new(60, 500, enc, overrides(None, None)).unwrap();
            drive(&mut c, seed, 900, 11, false);
        }
    }
}

#[test]
fn dense_phase_hits_edge_budget() {
    // Keep the deletion rate low so the graph rides close to its capacity,
    // exercising full chunks, part growth, and superchunk id pressure.
    for enc in [Encoding::Dense, Encoding::Packed] {
        let mut c = Connectivity::new(16, 60, enc, overrides(Some(3), Some(4))).unwrap();
        let n = c.n();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut oracle = OracleGraph::new(n);
        let mut live: Vec<(u32, u32)> = Vec::new();
        for step in 0..1500 {
            let grow = oracle.edge_count() < c.params().mhat && rng.gen_range(0u32..10) < 8;
            if grow {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u == v || oracle.has_edge(u, v) {
                    continue;
                }
                c.insert(u, v).unwrap();
                oracle.insert(u, v);
                live.push((u.min(v), u.max(v)));
            } else if !live.is_empty() {
                let at = rng.gen_range(0..live.len());
                let (u, v) = live.swap_remove(at);
                c.delete(u, v).unwrap();
                oracle.delete(u, v);
            }
            if step % 25 == 0 {
                let report = audit(&c);
                assert!(report.is_empty(), "audit at step {step}: {report:?}");
                for u in 0..n {
                    for v in (u + 1)..n {
                        assert_eq!(c.connected(u, v).unwrap(), oracle.connected(u, v));
                    }
                }
            }
        }
    }
}

#[test]
fn path_and_cycle_shapes() {
    // Long paths and cycles maximize tree edges and replacement searches.
    for enc in [Encoding::Dense, Encoding::Packed] {
        let n = 48u32;
        let mut c = Connectivity::new(n, 200, enc, overrides(Some(3), Some(4))).unwrap();
        let mut oracle = OracleGraph::new(n);
        for v in 0..n {
            c.insert(v, (v + 1) % n).unwrap();
            oracle.insert(v, (v + 1) % n);
        }
        assert!(audit(&c).is_empty());
        // Cut the cycle open at every position in turn; the rest must stay
        // connected through the other arc.
        for v in 0..n {
            let u = (v + 1) % n;
            c.delete(v, u).unwrap();
            oracle.delete(v, u);
            for x in 0..n {
                assert_eq!(c.connected(0, x).unwrap(), oracle.connected(0, x));
            }
            assert!(audit(&c).is_empty(), "after cutting ({v},{u})");
            c.insert(v, u).unwrap();
            oracle.insert(v, u);
        }
        // Now tear the cycle down to singletons.
        for v in 0..n {
            c.delete(v, (v + 1) % n).unwrap();
        }
        assert_eq!(c.edge_count(), 0);
        assert!(audit(&c).is_empty());
    }
}

#[test]
fn encodings_agree_on_structure() {
    // The two matrix encodings must produce identical answers, witnesses,
    // and restructuring counts on the same trace; only raw word counts may
    // differ.
    for seed in [5u64, 6, 7] {
        let mk = |enc| Connectivity::new(24, 120, enc, overrides(Some(3), Some(4))).unwrap();
        let mut a = mk(Encoding::Dense);
        let mut b = mk(Encoding::Packed);
        let n = a.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut live: Vec<(u32, u32)> = Vec::new();
        for _ in 0..600 {
            let ins = live.is_empty() || rng.gen_range(0u32..2) == 0;
            if ins {
                let u = rng.gen_range(0..n);
                let v = rng.gen_range(0..n);
                if u == v || live.contains(&(u.min(v), u.max(v))) || live.len() >= 120 {
                    continue;
                }
                a.insert(u, v).unwrap();
                b.insert(u, v).unwrap();
                live.push((u.min(v), u.max(v)));
            } else {
                let at = rng.gen_range(0..live.len());
                let (u, v) = live.swap_remove(at);
                a.delete(u, v).unwrap();
                b.delete(u, v).unwrap();
            }
            let ca = a.last_counters();
            let cb = b.last_counters();
            assert_eq!(ca.chunks_split, cb.chunks_split);
            assert_eq!(ca.chunks_merged, cb.chunks_merged);
            assert_eq!(ca.superchunks_split, cb.superchunks_split);
            assert_eq!(ca.superchunks_merged, cb.superchunks_merged);
            assert_eq!(ca.edges_scanned, cb.edges_scanned);
            assert_eq!(a.witness_forest(), b.witness_forest());
        }
        for u in 0..n {
            for v in (u + 1)..n {
                assert_eq!(a.connected(u, v).unwrap(), b.connected(u, v).unwrap());
            }
        }
    }
}

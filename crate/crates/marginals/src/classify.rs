//! Admissibility classification.
//!
//! The trichotomy: a proper connected graph is fully admissible; a proper
//! disconnected graph is fully admissible, quantum-only admissible or
//! non-admissible depending on whether it extends to a proper connected
//! supergraph and whether the inserted vertices stay simple; a non-proper
//! graph (and any graph with a critical quartet) is non-admissible.

use crate::assignment::{AxisAssignment, CriticalQuartet};
use crate::error::{Error, Result};
use crate::graph::{ChainGraph, Link};

/// Guard for the exhaustive supergraph enumeration.
pub const ENUMERATION_MAX_AXES: usize = 6;

/// A maximal linear run of inserted vertices in a connectified tree.
///
/// Endpoints are original vertices or insertions with three or more legs;
/// interior vertices are two-leg insertions. Consecutive entries of the
/// path are contiguous and the link indices along it are pairwise distinct.
/// `start` is the canonically smaller endpoint.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Segment {
    pub start: AxisAssignment,
    pub end: AxisAssignment,
    pub insertions: Vec<AxisAssignment>,
}

impl Segment {
    /// Number of links along the segment.
    pub fn length(&self) -> usize {
        self.insertions.len() + 1
    }

    /// Full vertex path from `start` to `end`.
    pub fn path(&self) -> Vec<AxisAssignment> {
        let mut p = Vec::with_capacity(self.insertions.len() + 2);
        p.push(self.start);
        p.extend(self.insertions.iter().copied());
        p.push(self.end);
        p
    }

    /// Link indices along the path, in path order.
    pub fn link_indices(&self) -> Vec<usize> {
        self.path()
            .windows(2)
            .map(|w| {
                w[0].differing_axes(&w[1]).expect("same dimension")[0]
            })
            .collect()
    }
}

/// Result of connectifying a proper graph.
#[derive(Clone, Debug)]
pub struct ConnectifiedDiagram {
    /// The original graph.
    pub graph: ChainGraph,
    /// Vertices of the connected tree, canonical order.
    pub tree_vertices: Vec<AxisAssignment>,
    /// Tree edges: the component links plus the segment links.
    pub tree_edges: Vec<Link>,
    /// Segments in attachment order.
    pub segments: Vec<Segment>,
    /// The graph derived from the tree's vertex set.
    pub gc: ChainGraph,
}

impl ConnectifiedDiagram {
    /// Vertices of `gc` that are not vertices of the original graph.
    pub fn insertions(&self) -> Vec<AxisAssignment> {
        self.gc
            .vertices()
            .iter()
            .copied()
            .filter(|v| !self.graph.contains(v))
            .collect()
    }

    /// Insertions with more than two legs in `gc`.
    pub fn non_simple_insertions(&self) -> Vec<AxisAssignment> {
        self.insertions()
            .into_iter()
            .filter(|v| self.gc.degree(v) != 2)
            .collect()
    }
}

/// Connect a proper graph into a proper connected supergraph.
///
/// Each non-passive axis splits the vertex set in two by its flag. No
/// critical quartet means these splits are pairwise laminar (for any two,
/// some side pair is disjoint), and a laminar split system is realized by a
/// unique tree with one link per axis: normalize every split to the side
/// away from the canonically smallest vertex, order the distinct sides by
/// containment, and chain axes carrying equal sides in ascending order.
/// This inserts the fewest vertices possible, and each chain vertex sits at
/// the node whose flipped-axis set matches its flags.
///
/// When the graph does contain a quartet (so no proper connectification
/// exists) a greedy recursion still produces a connected diagram: closest
/// remaining component first, through a shortest segment, ties broken by
/// the canonically smallest endpoint pair, insertions generated by flipping
/// the differing axes in ascending order.
pub fn connectify(g: &ChainGraph) -> Result<ConnectifiedDiagram> {
    if let Some(index) = g.duplicate_index() {
        return Err(Error::NonProper { index });
    }
    let (tree_vertices, tree_edges) = match split_tree(g) {
        Some(tree) => tree,
        None => connectify_greedy(g)?,
    };
    let segments = segments_from_tree(g, &tree_vertices, &tree_edges);
    let mut sorted_vertices = tree_vertices;
    sorted_vertices.sort();
    let mut sorted_edges = tree_edges;
    sorted_edges.sort_by_key(|l| (l.a, l.b));
    let gc = ChainGraph::new(g.dim(), sorted_vertices.clone())?;
    Ok(ConnectifiedDiagram {
        graph: g.clone(),
        tree_vertices: sorted_vertices,
        tree_edges: sorted_edges,
        segments,
        gc,
    })
}

/// The laminar split tree, or `None` when some axis pair realizes all four
/// flag combinations (a critical quartet).
fn split_tree(g: &ChainGraph) -> Option<(Vec<AxisAssignment>, Vec<Link>)> {
    let vertices = g.vertices();
    let n = vertices.len();
    let v0 = vertices[0];

    // group non-passive axes by their normalized split side
    let mut groups: std::collections::BTreeMap<Vec<bool>, Vec<usize>> =
        std::collections::BTreeMap::new();
    for axis in 0..g.dim() {
        let side: Vec<bool> = vertices
            .iter()
            .map(|v| v.kind(axis) != v0.kind(axis))
            .collect();
        if side.iter().any(|&b| b) {
            groups.entry(side).or_default().push(axis);
        }
    }
    let sets: Vec<(Vec<bool>, Vec<usize>)> = groups.into_iter().collect();

    // laminarity of the normalized sides: nested or disjoint
    let subset = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !x || *y);
    let disjoint = |a: &[bool], b: &[bool]| a.iter().zip(b).all(|(x, y)| !(*x && *y));
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            let (a, b) = (&sets[i].0, &sets[j].0);
            if !(subset(a, b) || subset(b, a) || disjoint(a, b)) {
                return None;
            }
        }
    }

    let popcount = |s: &[bool]| s.iter().filter(|&&b| b).count();
    // parent of a side: the smallest strict superset (unique by laminarity)
    let parent_of: Vec<Option<usize>> = sets
        .iter()
        .map(|(s, _)| {
            let mut best: Option<usize> = None;
            for (j, (t, _)) in sets.iter().enumerate() {
                if t != s && subset(s, t) {
                    let better = match best {
                        None => true,
                        Some(b) => popcount(t) < popcount(&sets[b].0),
                    };
                    if better {
                        best = Some(j);
                    }
                }
            }
            best
        })
        .collect();

    // assignment of the node t links deep into group gi (t=0 is the node
    // just outside the group, only meaningful for t >= 1)
    let node_assignment = |gi: usize, t: usize| -> AxisAssignment {
        let mut a = v0;
        for (j, (side, axes)) in sets.iter().enumerate() {
            if j == gi {
                for &axis in axes.iter().take(t) {
                    a = a.flip(axis);
                }
            } else if subset(&sets[gi].0, side) {
                for &axis in axes {
                    a = a.flip(axis);
                }
            }
        }
        a
    };

    let mut tree_vertices: Vec<AxisAssignment> = vec![v0];
    let mut tree_edges: Vec<Link> = Vec::new();
    let mut push_edge = |a: AxisAssignment, b: AxisAssignment, index: usize| {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        tree_edges.push(Link { a, b, index });
    };
    for (gi, (_, axes)) in sets.iter().enumerate() {
        let mut prev = match parent_of[gi] {
            None => v0,
            Some(p) => node_assignment(p, sets[p].1.len()),
        };
        for (t, &axis) in axes.iter().enumerate() {
            let node = node_assignment(gi, t + 1);
            tree_vertices.push(node);
            push_edge(prev, node, axis);
            prev = node;
        }
    }
    debug_assert_eq!(tree_edges.len() + 1, tree_vertices.len());
    Some((tree_vertices, tree_edges))
}

/// Greedy recursive connectification for graphs that cannot extend to a
/// proper connected supergraph.
fn connectify_greedy(g: &ChainGraph) -> Result<(Vec<AxisAssignment>, Vec<Link>)> {
    let components = g.component_graphs();
    let mut tree_vertices: Vec<AxisAssignment> = components[0].vertices().to_vec();
    let mut tree_edges: Vec<Link> = components[0].links().to_vec();
    let mut remaining: Vec<&ChainGraph> = components[1..].iter().collect();

    while !remaining.is_empty() {
        let mut best: Option<(usize, AxisAssignment, AxisAssignment, usize)> = None;
        for (ci, comp) in remaining.iter().enumerate() {
            for u in &tree_vertices {
                for v in comp.vertices() {
                    let d = u.distance(v)?;
                    let cand = (d, *u, *v, ci);
                    if best.map_or(true, |b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                        best = Some(cand);
                    }
                }
            }
        }
        let (_, u, v, ci) = best.expect("nonempty remaining components");
        let axes = u.differing_axes(&v)?;
        let mut cursor = u;
        for (step, &axis) in axes.iter().enumerate() {
            let next = cursor.flip(axis);
            let last = step + 1 == axes.len();
            if !last {
                // interior vertices are fresh by minimality of the segment
                if tree_vertices.contains(&next)
                    || remaining.iter().any(|c| c.contains(&next))
                {
                    return Err(Error::InternalInconsistency(format!(
                        "shortest segment through existing vertex {next}"
                    )));
                }
                tree_vertices.push(next);
            }
            tree_edges.push(if cursor < next {
                Link { a: cursor, b: next, index: axis }
            } else {
                Link { a: next, b: cursor, index: axis }
            });
            cursor = next;
        }
        debug_assert_eq!(cursor, v);
        let comp = remaining.remove(ci);
        tree_vertices.extend(comp.vertices().iter().copied());
        tree_edges.extend(comp.links().iter().copied());
    }
    Ok((tree_vertices, tree_edges))
}

/// Maximal linear runs of inserted vertices: endpoints are original
/// vertices or branch insertions (three or more legs), interiors are
/// two-leg insertions. Single tree edges between two original vertices are
/// links of the graph itself, not segments.
fn segments_from_tree(
    g: &ChainGraph,
    tree_vertices: &[AxisAssignment],
    tree_edges: &[Link],
) -> Vec<Segment> {
    let degree = |v: &AxisAssignment| -> usize {
        tree_edges.iter().filter(|l| l.a == *v || l.b == *v).count()
    };
    let is_anchor = |v: &AxisAssignment| g.contains(v) || degree(v) != 2;
    let neighbors = |v: &AxisAssignment| -> Vec<AxisAssignment> {
        let mut out: Vec<AxisAssignment> = tree_edges
            .iter()
            .filter_map(|l| {
                if l.a == *v {
                    Some(l.b)
                } else if l.b == *v {
                    Some(l.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    };
    let mut anchors: Vec<AxisAssignment> = tree_vertices
        .iter()
        .copied()
        .filter(|v| is_anchor(v))
        .collect();
    anchors.sort();
    let mut segments = Vec::new();
    for &start in &anchors {
        for first in neighbors(&start) {
            let mut insertions = Vec::new();
            let mut prev = start;
            let mut here = first;
            while !is_anchor(&here) {
                insertions.push(here);
                let next = neighbors(&here)
                    .into_iter()
                    .find(|w| *w != prev)
                    .expect("two-leg insertion continues");
                prev = here;
                here = next;
            }
            let end = here;
            if start > end {
                continue; // each run is emitted from its smaller endpoint
            }
            if insertions.is_empty() && g.contains(&start) && g.contains(&end) {
                continue; // a link of the original graph
            }
            segments.push(Segment {
                start,
                end,
                insertions,
            });
        }
    }
    segments.sort_by_key(|s| (s.start, s.end, s.insertions.clone()));
    segments
}

/// Whether every insertion of `gc` relative to `g` has exactly two legs.
pub fn is_g_simple(g: &ChainGraph, gc: &ChainGraph) -> Result<bool> {
    for v in g.vertices() {
        if !gc.contains(v) {
            return Err(Error::Containment(v.to_string()));
        }
    }
    if !gc.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(gc
        .vertices()
        .iter()
        .filter(|v| !g.contains(v))
        .all(|v| gc.degree(v) == 2))
}

/// k-subsets of `0..pool` in lexicographic order.
fn combinations(pool: usize, k: usize) -> Vec<Vec<usize>> {
    if k > pool {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        out.push(combo.clone());
        let mut i = k;
        while i > 0 && combo[i - 1] == pool - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        combo[i - 1] += 1;
        for j in i..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

/// All proper connected supergraphs of `g` whose insertions each carry at
/// least two legs, in canonical enumeration order (by number of added
/// vertices, then lexicographically).
///
/// Ground-truth oracle for the classification; guarded to small axis
/// counts. The two-leg floor matters: supergraphs with dangling one-leg
/// insertions exist whenever any supergraph does (and can always be pruned
/// back), but they are never decomposable into components joined by
/// connecting segments, and the simplicity dichotomy fails over them.
pub fn proper_connected_supergraphs(g: &ChainGraph) -> Result<Vec<ChainGraph>> {
    let dim = g.dim();
    if dim > ENUMERATION_MAX_AXES {
        return Err(Error::EnumerationGuard {
            n: dim,
            max: ENUMERATION_MAX_AXES,
        });
    }
    let missing: Vec<AxisAssignment> = (0u32..1u32 << dim)
        .map(|b| AxisAssignment::new(dim, b).expect("valid bits"))
        .filter(|v| !g.contains(v))
        .collect();
    let max_extra = (dim + 1).saturating_sub(g.n());
    let mut candidates = Vec::new();
    for k in 0..=max_extra.min(missing.len()) {
        for combo in combinations(missing.len(), k) {
            let mut vs = g.vertices().to_vec();
            vs.extend(combo.iter().map(|&i| missing[i]));
            candidates.push(vs);
        }
    }
    fn keep_proper_connected(g: &ChainGraph, vs: &[AxisAssignment]) -> Option<ChainGraph> {
        let cand = ChainGraph::new(g.dim(), vs.to_vec()).expect("valid vertex set");
        if !(cand.is_proper() && cand.is_connected()) {
            return None;
        }
        let anchored = cand
            .vertices()
            .iter()
            .filter(|v| !g.contains(v))
            .all(|v| cand.degree(v) >= 2);
        anchored.then_some(cand)
    }
    let threads = crate::max_threads();
    if threads <= 1 || candidates.len() < 512 {
        return Ok(candidates
            .iter()
            .filter_map(|vs| keep_proper_connected(g, vs))
            .collect());
    }
    // chunked scan with an order-preserving merge; deterministic for any
    // thread count
    let chunk = candidates.len().div_ceil(threads);
    let mut results: Vec<Vec<ChainGraph>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = candidates
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .filter_map(|vs| keep_proper_connected(g, vs))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            results.push(h.join().expect("supergraph scan worker"));
        }
    });
    Ok(results.into_iter().flatten().collect())
}

/// First proper connected supergraph in canonical order, if any.
pub fn find_proper_supergraph_exhaustive(g: &ChainGraph) -> Result<Option<ChainGraph>> {
    Ok(proper_connected_supergraphs(g)?.into_iter().next())
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Verdict {
    FullyAdmissible,
    QuantumAdmissible,
    NonAdmissible,
}

/// What backs the verdict.
#[derive(Clone, Debug)]
pub enum Evidence {
    /// The graph itself is proper and connected.
    ProperConnected,
    /// A proper connected supergraph whose insertions are all simple.
    Simple { diagram: ConnectifiedDiagram },
    /// A proper connected supergraph with at least one non-simple insertion.
    NonSimple {
        diagram: ConnectifiedDiagram,
        non_simple_insertions: Vec<AxisAssignment>,
    },
    /// A critical quartet inside the graph; `proper` records whether the
    /// graph was proper to begin with.
    Quartet {
        quartet: CriticalQuartet,
        proper: bool,
    },
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// The full trichotomy for one graph.
pub fn classify(g: &ChainGraph) -> Result<Classification> {
    if !g.is_proper() {
        let quartet = g.find_critical_quartet().ok_or_else(|| {
            Error::InternalInconsistency("non-proper graph without critical quartet".into())
        })?;
        return Ok(Classification {
            verdict: Verdict::NonAdmissible,
            evidence: Evidence::Quartet {
                quartet,
                proper: false,
            },
        });
    }
    if g.is_connected() {
        return Ok(Classification {
            verdict: Verdict::FullyAdmissible,
            evidence: Evidence::ProperConnected,
        });
    }
    if let Some(quartet) = g.find_critical_quartet() {
        return Ok(Classification {
            verdict: Verdict::NonAdmissible,
            evidence: Evidence::Quartet {
                quartet,
                proper: true,
            },
        });
    }
    let diagram = connectify(g)?;
    if !diagram.gc.is_proper() {
        // quartet-free proper graphs always connectify into a proper graph;
        // anything else is a defect, not an input condition
        return Err(Error::InternalInconsistency(
            "connectified graph is non-proper for a quartet-free input".into(),
        ));
    }
    let non_simple = diagram.non_simple_insertions();
    if non_simple.is_empty() {
        Ok(Classification {
            verdict: Verdict::FullyAdmissible,
            evidence: Evidence::Simple { diagram },
        })
    } else {
        Ok(Classification {
            verdict: Verdict::QuantumAdmissible,
            evidence: Evidence::NonSimple {
                diagram,
                non_simple_insertions: non_simple,
            },
        })
    }
}

//! Chain graphs: assignment vertices with contiguity-derived links.
//!
//! Links are a function of the vertex set (one link per pair at distance
//! one) and are always recomputed, never supplied by the caller.

use crate::assignment::{AxisAssignment, CriticalQuartet};
use crate::error::{Error, Result};

/// An unordered contiguous pair together with its differing axis.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Link {
    /// Canonically smaller endpoint.
    pub a: AxisAssignment,
    /// Canonically larger endpoint.
    pub b: AxisAssignment,
    /// The single axis (`0`-based) on which the endpoints differ.
    pub index: usize,
}

/// The unique differing axis if the pair is contiguous.
pub fn contiguity_index(a: &AxisAssignment, b: &AxisAssignment) -> Result<Option<usize>> {
    let axes = a.differing_axes(b)?;
    Ok(match axes.as_slice() {
        [i] => Some(*i),
        _ => None,
    })
}

/// One link per contiguous pair, sorted by endpoints.
///
/// The input must hold distinct assignments of one dimension.
pub fn derive_links(vertices: &[AxisAssignment]) -> Result<Vec<Link>> {
    let mut sorted = vertices.to_vec();
    sorted.sort();
    let mut links = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            if let Some(index) = contiguity_index(&sorted[i], &sorted[j])? {
                links.push(Link {
                    a: sorted[i],
                    b: sorted[j],
                    index,
                });
            }
        }
    }
    Ok(links)
}

/// A set of distinct assignments with its derived links.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainGraph {
    dim: usize,
    vertices: Vec<AxisAssignment>,
    links: Vec<Link>,
}

impl ChainGraph {
    pub fn new(dim: usize, vertices: impl IntoIterator<Item = AxisAssignment>) -> Result<Self> {
        let mut vertices: Vec<AxisAssignment> = vertices.into_iter().collect();
        if vertices.is_empty() {
            return Err(Error::EmptyGraph);
        }
        for v in &vertices {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        vertices.sort();
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateVertex(w[0].to_string()));
            }
        }
        let links = derive_links(&vertices)?;
        Ok(ChainGraph {
            dim,
            vertices,
            links,
        })
    }

    pub fn from_type_strings(dim: usize, types: &[&str]) -> Result<Self> {
        let vertices = types
            .iter()
            .map(|t| AxisAssignment::parse(t, dim))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, vertices)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    /// Vertices in canonical order.
    pub fn vertices(&self) -> &[AxisAssignment] {
        &self.vertices
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn contains(&self, v: &AxisAssignment) -> bool {
        self.vertices.binary_search(v).is_ok()
    }

    /// First link index that repeats, if any.
    pub fn duplicate_index(&self) -> Option<usize> {
        let mut seen = 0u64;
        for l in &self.links {
            if seen >> l.index & 1 == 1 {
                return Some(l.index);
            }
            seen |= 1 << l.index;
        }
        None
    }

    pub fn is_proper(&self) -> bool {
        self.duplicate_index().is_none()
    }

    fn neighbors(&self, v: &AxisAssignment) -> Vec<AxisAssignment> {
        self.links
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
            .collect()
    }

    /// Number of links incident to `v`.
    pub fn degree(&self, v: &AxisAssignment) -> usize {
        self.links
            .iter()
            .filter(|l| l.a == *v || l.b == *v)
            .count()
    }

    /// Vertex partition under the derived links.
    ///
    /// Components come out sorted by their smallest vertex, each component
    /// itself in canonical order.
    pub fn connected_components(&self) -> Vec<Vec<AxisAssignment>> {
        let n = self.vertices.len();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = count;
            while let Some(i) = stack.pop() {
                for nb in self.neighbors(&self.vertices[i]) {
                    let j = self.vertices.binary_search(&nb).unwrap();
                    if comp[j] == usize::MAX {
                        comp[j] = count;
                        stack.push(j);
                    }
                }
            }
            count += 1;
        }
        let mut parts = vec![Vec::new(); count];
        for (i, &c) in comp.iter().enumerate() {
            parts[c].push(self.vertices[i]);
        }
        // Vertices are scanned in canonical order, so parts are already
        // sorted by smallest member.
        parts
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() == 1
    }

    /// The components as graphs of their own.
    pub fn component_graphs(&self) -> Vec<ChainGraph> {
        self.connected_components()
            .into_iter()
            .map(|vs| ChainGraph::new(self.dim, vs).expect("component of a valid graph"))
            .collect()
    }

    /// First four-vertex subset realizing all four combinations on some
    /// axis pair, in canonical scan order.
    pub fn find_critical_quartet(&self) -> Option<CriticalQuartet> {
        let n = self.vertices.len();
        if n < 4 {
            return None;
        }
        let vs = &self.vertices;
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        let quad = [vs[a], vs[b], vs[c], vs[d]];
                        for i in 0..self.dim {
                            for j in i + 1..self.dim {
                                let q = CriticalQuartet {
                                    vertices: quad,
                                    axes: (i, j),
                                };
                                if q.is_valid() {
                                    return Some(q);
                                }
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(dim: usize, types: &[&str]) -> ChainGraph {
        ChainGraph::from_type_strings(dim, types).unwrap()
    }

    fn fig3() -> ChainGraph {
        graph(4, &["1234", "1'234", "1'2'34", "1'23'4", "1'23'4'"])
    }

    fn fig1() -> ChainGraph {
        graph(4, &["1234", "1'234", "1'2'34", "12'3'4'"])
    }

    #[test]
    fn contiguity_examples() {
        let a = AxisAssignment::parse("1234", 4).unwrap();
        let b = AxisAssignment::parse("1'234", 4).unwrap();
        assert_eq!(contiguity_index(&a, &b).unwrap(), Some(0));
        assert_eq!(contiguity_index(&a, &a).unwrap(), None);
        let c = AxisAssignment::parse("12", 2).unwrap();
        let d = AxisAssignment::parse("1'2'", 2).unwrap();
        assert_eq!(contiguity_index(&c, &d).unwrap(), None);
        assert!(contiguity_index(&a, &c).is_err());
    }

    #[test]
    fn fig3_links() {
        let g = fig3();
        assert_eq!(g.links().len(), 4);
        let mut indices: Vec<usize> = g.links().iter().map(|l| l.index).collect();
        indices.sort();
        assert_eq!(indices, vec![0, 1, 2, 3]);
        assert!(g.is_proper());
        assert!(g.is_connected());
    }

    #[test]
    fn single_vertex_no_links() {
        let g = graph(3, &["123"]);
        assert!(g.links().is_empty());
        assert!(g.is_proper());
    }

    #[test]
    fn square_loop() {
        let g = graph(2, &["12", "1'2", "12'", "1'2'"]);
        assert_eq!(g.links().len(), 4);
        let mut indices: Vec<usize> = g.links().iter().map(|l| l.index).collect();
        indices.sort();
        assert_eq!(indices, vec![0, 0, 1, 1]);
        assert!(!g.is_proper());
        let q = g.find_critical_quartet().unwrap();
        assert_eq!(q.axes, (0, 1));
        assert_eq!(q.vertices.to_vec(), g.vertices().to_vec());
    }

    #[test]
    fn fig1_components_and_quartet() {
        let g = fig1();
        assert!(g.is_proper());
        let comps = g.connected_components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 3);
        assert_eq!(comps[1].len(), 1);
        assert_eq!(comps[1][0], AxisAssignment::parse("12'3'4'", 4).unwrap());

        let q = g.find_critical_quartet().unwrap();
        assert_eq!(q.axes, (0, 1));
        assert!(q.is_valid());
    }

    #[test]
    fn fig2b_three_singletons() {
        let g = graph(3, &["1'23", "12'3", "123'"]);
        let comps = g.connected_components();
        assert_eq!(comps.len(), 3);
        assert!(comps.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn fig2a_no_quartet() {
        let g = graph(4, &["1234", "1'234", "1'2'34", "1'23'4'"]);
        assert!(g.find_critical_quartet().is_none());
    }

    #[test]
    fn connected_proper_is_small_tree() {
        // Exhaustive over N = 3: every connected proper graph is a tree with
        // at most N + 1 vertices and n - 1 links.
        let dim = 3;
        let all: Vec<AxisAssignment> = (0..8).map(|b| AxisAssignment::new(dim, b).unwrap()).collect();
        for mask in 1u32..256 {
            let set: Vec<_> = all
                .iter()
                .copied()
                .filter(|v| mask >> v.bits() & 1 == 1)
                .collect();
            let g = ChainGraph::new(dim, set).unwrap();
            if g.is_proper() && g.is_connected() {
                assert!(g.n() <= dim + 1);
                assert_eq!(g.links().len(), g.n() - 1);
                assert!(g.links().len() <= dim);
                assert!(g.find_critical_quartet().is_none());
            }
        }
    }

    #[test]
    fn nonproper_always_has_quartet() {
        // Exhaustive over N = 3, all vertex subsets.
        let dim = 3;
        let all: Vec<AxisAssignment> = (0..8).map(|b| AxisAssignment::new(dim, b).unwrap()).collect();
        for mask in 1u32..256 {
            let set: Vec<_> = all
                .iter()
                .copied()
                .filter(|v| mask >> v.bits() & 1 == 1)
                .collect();
            let g = ChainGraph::new(dim, set).unwrap();
            if !g.is_proper() {
                let q = g
                    .find_critical_quartet()
                    .expect("every non-proper graph carries a critical quartet");
                assert!(q.is_valid());
                for v in &q.vertices {
                    assert!(g.contains(v));
                }
            }
        }
    }

    #[test]
    fn links_do_not_depend_on_input_order() {
        let types = ["1'23'4", "1234", "1'2'34", "1'234", "1'23'4'"];
        let g1 = ChainGraph::from_type_strings(4, &types).unwrap();
        let g2 = fig3();
        assert_eq!(g1, g2);
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(matches!(
            ChainGraph::from_type_strings(2, &["12", "12"]),
            Err(Error::DuplicateVertex(_))
        ));
        assert!(matches!(
            ChainGraph::new(2, Vec::new()),
            Err(Error::EmptyGraph)
        ));
    }
}

//! Tree-factorized reconstruction of a phase-space density.
//!
//! The particular solution is the product of all vertex distributions, one
//! propagator (reciprocal integrated distribution) per tree link, and a free
//! normalized factor over the conjugates of the passive axes. Links may be
//! composite: a single link standing in for a whole segment of a
//! connectified graph, integrating over several axes at once.
//!
//! The general nonnegative solution is rho0 * (1 + lambda * h) where h lies
//! in the range of the projector Pi = 1 - sum P_a + sum P_a P_b (one pair
//! term per link) and lambda stays within the positivity window.

use crate::assignment::{AxisAssignment, Var};
use crate::classify::ConnectifiedDiagram;
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::grid::{integrated_distribution, Chain, GridSpec, PhaseTensor};
use crate::tensor::Factor;

/// Relative support cutoff for propagators: cells of the integrated
/// distribution below `PROPAGATOR_EPS_REL * max` count as outside the
/// essential support.
pub const PROPAGATOR_EPS_REL: f64 = 1e-12;

/// Relative cutoff below which h is treated as identically zero.
const H_ZERO_REL: f64 = 1e-13;

/// Floating-point dust allowance when assembling rho = rho0 (1 + lambda h)
/// at the edge of the positivity window.
const RHO_NEG_TOL: f64 = 1e-12;

/// A tree link joining two chain members; composite when it spans more
/// than one axis.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TreeLink {
    pub a: AxisAssignment,
    pub b: AxisAssignment,
    /// Axes flipped between the endpoints, ascending.
    pub axes: Vec<usize>,
}

impl TreeLink {
    pub fn is_simple(&self) -> bool {
        self.axes.len() == 1
    }
}

/// The tree a reconstruction runs on: the chain members as vertices and
/// n - 1 simple or composite links with pairwise disjoint axis sets.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ReconstructionTree {
    dim: usize,
    vertices: Vec<AxisAssignment>,
    links: Vec<TreeLink>,
}

impl ReconstructionTree {
    /// Use a connected proper graph as-is (all links simple).
    pub fn from_graph(g: &ChainGraph) -> Result<Self> {
        if let Some(index) = g.duplicate_index() {
            return Err(Error::NonProper { index });
        }
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        let links = g
            .links()
            .iter()
            .map(|l| TreeLink {
                a: l.a,
                b: l.b,
                axes: vec![l.index],
            })
            .collect();
        Self::new(g.dim(), g.vertices().to_vec(), links)
    }

    /// Contract the segments of a connectified diagram into composite links.
    ///
    /// Every segment must run between two original vertices, which is
    /// exactly the simple case; a segment attached to an insertion leaves no
    /// valid contraction.
    pub fn from_diagram(d: &ConnectifiedDiagram) -> Result<Self> {
        if let Some(index) = d.gc.duplicate_index() {
            return Err(Error::NonProper { index });
        }
        let g = &d.graph;
        let mut links: Vec<TreeLink> = g
            .links()
            .iter()
            .map(|l| TreeLink {
                a: l.a,
                b: l.b,
                axes: vec![l.index],
            })
            .collect();
        for seg in &d.segments {
            for end in [&seg.start, &seg.end] {
                if !g.contains(end) {
                    return Err(Error::SegmentOnInsertion(end.to_string()));
                }
            }
            let axes = seg.start.differing_axes(&seg.end)?;
            let (a, b) = if seg.start < seg.end {
                (seg.start, seg.end)
            } else {
                (seg.end, seg.start)
            };
            links.push(TreeLink { a, b, axes });
        }
        Self::new(g.dim(), g.vertices().to_vec(), links)
    }

    fn new(dim: usize, vertices: Vec<AxisAssignment>, links: Vec<TreeLink>) -> Result<Self> {
        let mut vertices = vertices;
        vertices.sort();
        let tree = ReconstructionTree {
            dim,
            vertices,
            links,
        };
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.links.len() + 1 != n {
            return Err(Error::NotATree {
                vertices: n,
                links: self.links.len(),
            });
        }
        let mut seen_axes = vec![false; self.dim];
        for l in &self.links {
            if !self.vertices.contains(&l.a) || !self.vertices.contains(&l.b) {
                return Err(Error::UnknownVertex(format!("{} - {}", l.a, l.b)));
            }
            let expect = l.a.differing_axes(&l.b)?;
            if expect != l.axes {
                return Err(Error::InternalInconsistency(format!(
                    "link {} - {} does not flip axes {:?}",
                    l.a, l.b, l.axes
                )));
            }
            for &ax in &l.axes {
                if seen_axes[ax] {
                    return Err(Error::NonProper { index: ax });
                }
                seen_axes[ax] = true;
            }
        }
        // connectivity over the n vertices
        let mut reached = vec![false; n];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(i) = stack.pop() {
            let v = self.vertices[i];
            for l in &self.links {
                let other = if l.a == v {
                    Some(l.b)
                } else if l.b == v {
                    Some(l.a)
                } else {
                    None
                };
                if let Some(o) = other {
                    let j = self.vertices.binary_search(&o).unwrap();
                    if !reached[j] {
                        reached[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if !reached.iter().all(|&r| r) {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[AxisAssignment] {
        &self.vertices
    }

    pub fn links(&self) -> &[TreeLink] {
        &self.links
    }

    pub fn degree(&self, v: &AxisAssignment) -> usize {
        self.links.iter().filter(|l| l.a == *v || l.b == *v).count()
    }

    /// One-leg vertices in canonical order.
    pub fn leaves(&self) -> Vec<AxisAssignment> {
        self.vertices
            .iter()
            .copied()
            .filter(|v| self.degree(v) == 1)
            .collect()
    }

    /// The unique link at a one-leg vertex.
    pub fn leaf_link(&self, leaf: &AxisAssignment) -> Result<&TreeLink> {
        if !self.vertices.contains(leaf) {
            return Err(Error::UnknownVertex(leaf.to_string()));
        }
        let touching: Vec<&TreeLink> = self
            .links
            .iter()
            .filter(|l| l.a == *leaf || l.b == *leaf)
            .collect();
        if touching.len() != 1 {
            return Err(Error::NotALeaf {
                vertex: leaf.to_string(),
                legs: touching.len(),
            });
        }
        Ok(touching[0])
    }

    /// Remove a one-leg vertex and its link.
    pub fn without_leaf(&self, leaf: &AxisAssignment) -> Result<ReconstructionTree> {
        let link = self.leaf_link(leaf)?.clone();
        let vertices: Vec<AxisAssignment> = self
            .vertices
            .iter()
            .copied()
            .filter(|v| v != leaf)
            .collect();
        let links: Vec<TreeLink> = self
            .links
            .iter()
            .filter(|l| **l != link)
            .cloned()
            .collect();
        Ok(ReconstructionTree {
            dim: self.dim,
            vertices,
            links,
        })
    }

    /// Vertices on the unique path between two vertices, endpoints included.
    pub fn path(&self, from: &AxisAssignment, to: &AxisAssignment) -> Result<Vec<AxisAssignment>> {
        if !self.vertices.contains(from) || !self.vertices.contains(to) {
            return Err(Error::UnknownVertex(format!("{from} or {to}")));
        }
        let mut stack = vec![vec![*from]];
        while let Some(path) = stack.pop() {
            let last = *path.last().unwrap();
            if last == *to {
                return Ok(path);
            }
            for l in &self.links {
                let other = if l.a == last {
                    Some(l.b)
                } else if l.b == last {
                    Some(l.a)
                } else {
                    None
                };
                if let Some(o) = other {
                    if !path.contains(&o) {
                        let mut next = path.clone();
                        next.push(o);
                        stack.push(next);
                    }
                }
            }
        }
        Err(Error::Disconnected)
    }
}

/// Reciprocal of an integrated distribution, zero off its essential support.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub link: TreeLink,
    /// The integrated distribution on the link's shared variables.
    pub integrated: Factor,
    /// Reciprocal values on support, exact zero elsewhere.
    pub values: Factor,
}

/// Reciprocal on support; the cutoff is relative to the largest cell.
pub fn build_propagator(integrated: &Factor, eps: f64) -> Factor {
    integrated.reciprocal_on_support(eps)
}

/// The free normalized factor over the conjugates of the passive axes.
#[derive(Clone, Debug)]
pub struct PassiveFactor {
    values: Factor,
}

impl PassiveFactor {
    /// `values` must span exactly the given variables and sum to one.
    pub fn new(values: Factor) -> Result<Self> {
        for &v in values.data() {
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    value: v,
                    index: 0,
                });
            }
        }
        let total = values.total();
        if (total - 1.0).abs() > crate::NORM_TOL {
            return Err(Error::NotNormalized {
                total,
                tol: crate::NORM_TOL,
            });
        }
        Ok(PassiveFactor { values })
    }

    pub fn uniform(grid: &GridSpec, vars: Vec<Var>) -> Result<Self> {
        let shape = grid.shape_of(&vars);
        Ok(PassiveFactor {
            values: Factor::uniform(vars, shape)?,
        })
    }

    pub fn factor(&self) -> &Factor {
        &self.values
    }
}

/// Axes whose assignment is constant across all chain members, ascending.
pub fn passive_axes(chain: &Chain) -> Vec<usize> {
    let members = chain.members();
    (0..chain.grid().dim())
        .filter(|&ax| {
            members
                .iter()
                .all(|m| m.assignment().kind(ax) == members[0].assignment().kind(ax))
        })
        .collect()
}

/// Window of admissible scaling parameters for one choice of h.
#[derive(Clone, Copy, Debug)]
pub struct SolutionFamily {
    /// Supremum of h over the rho0 support.
    pub m_plus: f64,
    /// Negated infimum of h over the rho0 support.
    pub m_minus: f64,
    /// `[-1/m_plus, 1/m_minus]`, or `None` when h vanishes identically and
    /// every lambda works.
    pub lambda_range: Option<(f64, f64)>,
}

impl SolutionFamily {
    pub fn contains(&self, lambda: f64) -> bool {
        match self.lambda_range {
            None => true,
            Some((lo, hi)) => lo <= lambda && lambda <= hi,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MembershipReport {
    /// Largest projector residual over the rho0 support.
    pub projector_residual: f64,
    /// Sup-norm of (Pi h - h) over the rho0 support.
    pub pi_residual: f64,
}

impl MembershipReport {
    pub fn residual(&self) -> f64 {
        self.projector_residual.max(self.pi_residual)
    }

    pub fn is_member(&self, tol: f64) -> bool {
        self.residual() <= tol
    }
}

/// A chain bound to a reconstruction tree, with rho0 and the link
/// distributions precomputed.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    chain: Chain,
    tree: ReconstructionTree,
    zeta: Factor,
    rho0: PhaseTensor,
    /// Integrated distribution per tree link, same order as the tree links.
    link_dists: Vec<Factor>,
    propagators: Vec<Factor>,
    passive: Vec<usize>,
}

impl Reconstruction {
    /// Build rho0 for a compatible chain on a connected proper tree.
    ///
    /// `zeta` defaults to the uniform factor over the passive conjugates;
    /// when given, its scope must be exactly those variables. `tol` bounds
    /// the accepted compatibility deviation per link.
    pub fn new(
        chain: &Chain,
        tree: ReconstructionTree,
        zeta: Option<PassiveFactor>,
        tol: f64,
    ) -> Result<Self> {
        if tree.vertices() != chain.graph().vertices() {
            return Err(Error::InvalidInput(
                "tree vertices must be exactly the chain member types".into(),
            ));
        }
        let passive = passive_axes(chain);
        let zeta_vars: Vec<Var> = passive
            .iter()
            .map(|&ax| Var {
                axis: ax,
                kind: chain.members()[0].assignment().kind(ax).conjugate(),
            })
            .collect();
        let zeta = match zeta {
            Some(z) => {
                if z.factor().vars() != zeta_vars.as_slice() {
                    return Err(Error::PassiveScope {
                        expected: zeta_vars.iter().map(|v| v.to_string()).collect(),
                        got: z.factor().vars().iter().map(|v| v.to_string()).collect(),
                    });
                }
                z.factor().clone()
            }
            None => PassiveFactor::uniform(chain.grid(), zeta_vars)?.factor().clone(),
        };

        let mut link_dists = Vec::with_capacity(tree.links().len());
        let mut propagators = Vec::with_capacity(tree.links().len());
        for link in tree.links() {
            let sa = chain.member(&link.a).expect("tree vertex in chain");
            let sb = chain.member(&link.b).expect("tree vertex in chain");
            let integrated = integrated_distribution(sa, sb, tol)?;
            let eps = PROPAGATOR_EPS_REL * integrated.max();
            propagators.push(build_propagator(&integrated, eps));
            link_dists.push(integrated);
        }

        let mut parts: Vec<&Factor> = chain.members().iter().map(|m| m.factor()).collect();
        for p in &propagators {
            parts.push(p);
        }
        parts.push(&zeta);
        let product = Factor::product_all(&parts)?;
        let full = product.expand(&chain.grid().phase_vars(), &chain.grid().phase_shape())?;
        let rho0 = PhaseTensor::from_factor(chain.grid().clone(), full)?;

        Ok(Reconstruction {
            chain: chain.clone(),
            tree,
            zeta,
            rho0,
            link_dists,
            propagators,
            passive,
        })
    }

    /// Shortcut: tree taken from the chain's own graph.
    pub fn from_connected_chain(chain: &Chain, zeta: Option<PassiveFactor>, tol: f64) -> Result<Self> {
        let tree = ReconstructionTree::from_graph(chain.graph())?;
        Reconstruction::new(chain, tree, zeta, tol)
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn tree(&self) -> &ReconstructionTree {
        &self.tree
    }

    pub fn rho0(&self) -> &PhaseTensor {
        &self.rho0
    }

    pub fn zeta(&self) -> &Factor {
        &self.zeta
    }

    pub fn passive_axes(&self) -> &[usize] {
        &self.passive
    }

    pub fn propagator(&self, link_idx: usize) -> Propagator {
        Propagator {
            link: self.tree.links()[link_idx].clone(),
            integrated: self.link_dists[link_idx].clone(),
            values: self.propagators[link_idx].clone(),
        }
    }

    /// The defining product of rho0 restricted to a subtree, with the same
    /// zeta factor. Used by the peeling checks.
    pub fn partial_product(&self, sub: &ReconstructionTree) -> Result<Factor> {
        let mut parts: Vec<&Factor> = Vec::new();
        for v in sub.vertices() {
            parts.push(self.chain.member(v).expect("subtree vertex").factor());
        }
        for (i, link) in self.tree.links().iter().enumerate() {
            if sub.links().contains(link) {
                parts.push(&self.propagators[i]);
            }
        }
        parts.push(&self.zeta);
        Factor::product_all(&parts)
    }

    /// Largest deviation between the rho0 marginals and the chain members.
    pub fn marginal_residual(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for m in self.chain.members() {
            let got = crate::grid::marginalize(&self.rho0, m.assignment())?;
            worst = worst.max(got.factor().max_abs_diff(m.factor())?);
        }
        Ok(worst)
    }

    /// Conditional-expectation projector of one vertex, materialized on the
    /// full phase space: average f against rho0 over the conjugate
    /// variables, divide by the vertex distribution on its support, zero
    /// elsewhere.
    pub fn apply_p(&self, alpha: &AxisAssignment, f: &Factor) -> Result<Factor> {
        let member = self
            .chain
            .member(alpha)
            .ok_or_else(|| Error::UnknownVertex(alpha.to_string()))?;
        let weighted = self.rho0.factor().product(f)?;
        let reduced = weighted.sum_out(&alpha.conjugate_vars());
        let expanded_member = member
            .factor()
            .expand(reduced.vars(), reduced.shape())?;
        let cond = reduced.div_on_support(&expanded_member)?;
        cond.expand(
            &self.chain.grid().phase_vars(),
            &self.chain.grid().phase_shape(),
        )
    }

    /// Closed form of the link pair term P_a P_b: average f against rho0
    /// over everything but the link's shared variables, divided by the
    /// integrated distribution.
    pub fn apply_p_pair(&self, link_idx: usize, f: &Factor) -> Result<Factor> {
        let sigma_ab = &self.link_dists[link_idx];
        let weighted = self.rho0.factor().product(f)?;
        let kill: Vec<Var> = self
            .chain
            .grid()
            .phase_vars()
            .into_iter()
            .filter(|v| sigma_ab.vars().binary_search(v).is_err())
            .collect();
        let reduced = weighted.sum_out(&kill);
        let cond = reduced.div_on_support(sigma_ab)?;
        cond.expand(
            &self.chain.grid().phase_vars(),
            &self.chain.grid().phase_shape(),
        )
    }

    /// The solution projector: f - sum of vertex terms + sum of link pair
    /// terms.
    pub fn apply_pi(&self, f: &Factor) -> Result<Factor> {
        let full_vars = self.chain.grid().phase_vars();
        let full_shape = self.chain.grid().phase_shape();
        let mut acc = f.expand(&full_vars, &full_shape)?;
        for m in self.chain.members() {
            acc = acc.sub(&self.apply_p(m.assignment(), f)?)?;
        }
        for i in 0..self.tree.links().len() {
            acc = acc.add(&self.apply_p_pair(i, f)?)?;
        }
        Ok(acc)
    }

    /// Extrema of h over the rho0 support and the lambda window.
    pub fn family(&self, f: &Factor) -> Result<(SolutionFamily, Factor)> {
        let h = self.apply_pi(f)?;
        let rho = self.rho0.factor();
        let mut hi = 0.0f64;
        let mut lo = 0.0f64;
        for (r, v) in rho.data().iter().zip(h.data()) {
            if *r > 0.0 {
                hi = hi.max(*v);
                lo = lo.min(*v);
            }
        }
        let scale = f.max_abs().max(1.0);
        let vanished = hi.max(-lo) <= H_ZERO_REL * scale;
        let family = SolutionFamily {
            m_plus: hi,
            m_minus: -lo,
            lambda_range: if vanished {
                None
            } else {
                Some((-1.0 / hi, 1.0 / -lo))
            },
        };
        Ok((family, h))
    }

    /// The density rho0 (1 + lambda h) for h = Pi f.
    ///
    /// Outside the admissible window positivity fails; the error carries the
    /// window. With h identically zero the result is rho0 for every lambda.
    pub fn general_solution(
        &self,
        f: &Factor,
        lambda: f64,
    ) -> Result<(SolutionFamily, PhaseTensor)> {
        let (family, h) = self.family(f)?;
        if !family.contains(lambda) {
            let (lo, hi) = family.lambda_range.expect("bounded range");
            return Err(Error::LambdaOutOfRange { lambda, lo, hi });
        }
        let rho = match family.lambda_range {
            None => self.rho0.clone(),
            Some(_) => {
                let scaled = h.map(|v| 1.0 + lambda * v);
                let values = self.rho0.factor().mul_elem(&scaled)?;
                PhaseTensor::from_factor_clamped(self.chain.grid().clone(), values, RHO_NEG_TOL)?
            }
        };
        Ok((family, rho))
    }

    /// Check that a candidate density belongs to the solution family: its
    /// support lies inside the rho0 support, every vertex projector
    /// annihilates h = candidate / rho0 - 1, and Pi fixes h.
    pub fn membership(&self, candidate: &PhaseTensor) -> Result<MembershipReport> {
        let rho = self.rho0.factor();
        for (i, (c, r)) in candidate
            .factor()
            .data()
            .iter()
            .zip(rho.data())
            .enumerate()
        {
            if *c > 0.0 && *r == 0.0 {
                return Err(Error::SupportViolation {
                    value: *c,
                    index: i,
                });
            }
        }
        // h = candidate / rho0 - 1 on the support, zero outside; a candidate
        // cell at exactly zero mass contributes h = -1 there
        let mut h = candidate.factor().clone();
        for (v, r) in h.data_mut().iter_mut().zip(rho.data()) {
            *v = if *r == 0.0 { 0.0 } else { *v / *r - 1.0 };
        }
        let mut projector_residual = 0.0f64;
        for m in self.chain.members() {
            let ph = self.apply_p(m.assignment(), &h)?;
            projector_residual = projector_residual.max(support_sup_norm(rho, &ph));
        }
        let pi_h = self.apply_pi(&h)?;
        let pi_residual = support_sup_norm(rho, &pi_h.sub(&h)?);
        Ok(MembershipReport {
            projector_residual,
            pi_residual,
        })
    }
}

fn support_sup_norm(rho: &Factor, f: &Factor) -> f64 {
    rho.data()
        .iter()
        .zip(f.data())
        .filter(|(r, _)| **r > 0.0)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()))
}

/// One step of the peeling process: sum the current density over the leaf's
/// own variables on its link axes. The result is the density of the reduced
/// chain, i.e. the product with the leaf's vertex function and propagator
/// divided out.
pub fn peel(
    rho: &Factor,
    tree: &ReconstructionTree,
    leaf: &AxisAssignment,
) -> Result<(Factor, ReconstructionTree)> {
    let link = tree.leaf_link(leaf)?;
    let kill: Vec<Var> = link
        .axes
        .iter()
        .map(|&ax| Var {
            axis: ax,
            kind: leaf.kind(ax),
        })
        .collect();
    let reduced = rho.sum_out(&kill);
    let sub = tree.without_leaf(leaf)?;
    Ok((reduced, sub))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{check_compatibility, chain_from_phase, marginalize, random_chain, random_phase_tensor};
    use crate::COMPAT_TOL;

    fn parse(t: &str, dim: usize) -> AxisAssignment {
        AxisAssignment::parse(t, dim).unwrap()
    }

    fn fig3_chain(seed: u64, points: usize) -> Chain {
        let g = ChainGraph::from_type_strings(
            4,
            &["1234", "1'234", "1'2'34", "1'23'4", "1'23'4'"],
        )
        .unwrap();
        let grid = GridSpec::uniform(4, points).unwrap();
        random_chain(&g, &grid, seed).unwrap()
    }

    #[test]
    fn propagator_examples() {
        let f = Factor::new(vec![Var::q(0)], vec![3], vec![0.25, 0.0, 1e-15]).unwrap();
        let p = build_propagator(&f, 1e-12);
        assert_eq!(p.data(), &[4.0, 0.0, 0.0]);
    }

    #[test]
    fn single_member_rho0_is_sigma_times_zeta() {
        let grid = GridSpec::uniform(2, 2).unwrap();
        let g = ChainGraph::from_type_strings(2, &["12'"]).unwrap();
        let chain = random_chain(&g, &grid, 8).unwrap();
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        // rho0 = sigma (q1, p2) * zeta uniform over (p1, q2)
        let sigma = chain.members()[0].factor();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        // full index (q1, p1, q2, p2)
                        let got = rec.rho0().factor().at(&[i, j, k, l]);
                        let want = sigma.at(&[i, l]) * 0.25;
                        assert!((got - want).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn fig3_rho0_matches_handwritten_product() {
        let chain = fig3_chain(21, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();

        // the explicit five-vertex product with four propagators
        let s = |t: &str| chain.member(&parse(t, 4)).unwrap().factor().clone();
        let sd = |a: &str, b: &str| {
            integrated_distribution(
                chain.member(&parse(a, 4)).unwrap(),
                chain.member(&parse(b, 4)).unwrap(),
                COMPAT_TOL,
            )
            .unwrap()
        };
        let recip = |f: &Factor| build_propagator(f, PROPAGATOR_EPS_REL * f.max());
        let parts = [
            s("1234"),
            recip(&sd("1234", "1'234")),
            s("1'234"),
            recip(&sd("1'234", "1'2'34")),
            s("1'2'34"),
            recip(&sd("1'234", "1'23'4")),
            s("1'23'4"),
            recip(&sd("1'23'4", "1'23'4'")),
            s("1'23'4'"),
        ];
        let refs: Vec<&Factor> = parts.iter().collect();
        let manual = Factor::product_all(&refs).unwrap();
        // no passive axes here, so zeta is the empty factor
        let full = manual
            .expand(
                &chain.grid().phase_vars(),
                &chain.grid().phase_shape(),
            )
            .unwrap();
        assert!(rec.rho0().factor().max_abs_diff(&full).unwrap() < 1e-14);
    }

    #[test]
    fn rho0_reproduces_members_and_normalizes() {
        let chain = fig3_chain(33, 3);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        assert!(rec.marginal_residual().unwrap() < 1e-10);
        assert!((rec.rho0().factor().total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn peel_fig3_leaf_matches_reduced_product() {
        let chain = fig3_chain(5, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let leaf = parse("1'2'34", 4);
        let (reduced, sub) = peel(rec.rho0().factor(), rec.tree(), &leaf).unwrap();
        let expected = rec.partial_product(&sub).unwrap();
        // the reduced density no longer involves the leaf's flipped variable
        assert!(!reduced.vars().contains(&Var::p(1)));
        assert!(
            reduced
                .max_abs_diff(&expected.expand(reduced.vars(), reduced.shape()).unwrap())
                .unwrap()
                < 1e-13
        );
    }

    #[test]
    fn full_peel_recovers_each_member() {
        let chain = fig3_chain(13, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        for target in chain.types() {
            let mut rho = rec.rho0().factor().clone();
            let mut tree = rec.tree().clone();
            // peel leaves in canonical order until only the target remains
            while tree.vertices().len() > 1 {
                let leaf = tree
                    .leaves()
                    .into_iter()
                    .find(|l| *l != target)
                    .expect("a tree with two or more vertices has two leaves");
                let (r, t) = peel(&rho, &tree, &leaf).unwrap();
                rho = r;
                tree = t;
            }
            // integrate out the passive conjugates (none here) and compare
            let conj: Vec<Var> = target.conjugate_vars();
            let sigma = rho.sum_out(&conj);
            let want = chain.member(&target).unwrap().factor();
            assert!(sigma.max_abs_diff(want).unwrap() < 1e-12);
        }
    }

    #[test]
    fn peel_rejects_internal_vertex() {
        let chain = fig3_chain(3, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let internal = parse("1'234", 4);
        assert!(matches!(
            peel(rec.rho0().factor(), rec.tree(), &internal),
            Err(Error::NotALeaf { .. })
        ));
    }

    #[test]
    fn zeta_choice_does_not_move_member_marginals() {
        // two-member chain in three axes leaves one passive axis
        let g = ChainGraph::from_type_strings(3, &["123", "1'23"]).unwrap();
        let grid = GridSpec::uniform(3, 2).unwrap();
        let chain = random_chain(&g, &grid, 17).unwrap();
        let rec_uniform = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let zeta_vars = vec![Var::p(1), Var::p(2)];
        let skewed = PassiveFactor::new(
            Factor::new(zeta_vars, vec![2, 2], vec![0.5, 0.25, 0.125, 0.125]).unwrap(),
        )
        .unwrap();
        let tree = ReconstructionTree::from_graph(chain.graph()).unwrap();
        let rec_skewed = Reconstruction::new(&chain, tree, Some(skewed), COMPAT_TOL).unwrap();
        assert!(rec_skewed
            .rho0()
            .factor()
            .max_abs_diff(rec_uniform.rho0().factor())
            .unwrap()
            > 1e-3);
        for m in chain.members() {
            let a = marginalize(rec_uniform.rho0(), m.assignment()).unwrap();
            let b = marginalize(rec_skewed.rho0(), m.assignment()).unwrap();
            assert!(a.factor().max_abs_diff(m.factor()).unwrap() < 1e-12);
            assert!(b.factor().max_abs_diff(m.factor()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn projector_basics() {
        let chain = fig3_chain(44, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let grid = chain.grid();
        let ones = Factor::ones(grid.phase_vars(), grid.phase_shape()).unwrap();
        // P 1 = 1 on the support (full support for random chains)
        let alpha = parse("1234", 4);
        let p1 = rec.apply_p(&alpha, &ones).unwrap();
        assert!(p1.max_abs_diff(&ones).unwrap() < 1e-12);
        // idempotence on a random f
        let f = random_phase_tensor(grid, 91).unwrap().factor().scale(17.0);
        let once = rec.apply_p(&alpha, &f).unwrap();
        let twice = rec.apply_p(&alpha, &once).unwrap();
        assert!(once.max_abs_diff(&twice).unwrap() < 1e-10);
        // contiguous commutation
        let beta = parse("1'234", 4);
        let ab = rec.apply_p(&alpha, &rec.apply_p(&beta, &f).unwrap()).unwrap();
        let ba = rec.apply_p(&beta, &rec.apply_p(&alpha, &f).unwrap()).unwrap();
        assert!(ab.max_abs_diff(&ba).unwrap() < 1e-10);
        // closed-form pair term equals the sequential application
        let link_idx = rec
            .tree()
            .links()
            .iter()
            .position(|l| l.a == alpha && l.b == beta)
            .unwrap();
        let closed = rec.apply_p_pair(link_idx, &f).unwrap();
        assert!(closed.max_abs_diff(&ab).unwrap() < 1e-10);
    }

    #[test]
    fn pi_constant_annihilation_and_idempotence() {
        let chain = fig3_chain(55, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let grid = chain.grid();
        let ones = Factor::ones(grid.phase_vars(), grid.phase_shape()).unwrap();
        let pi_one = rec.apply_pi(&ones).unwrap();
        assert!(pi_one.max_abs() < 1e-12);

        let f = random_phase_tensor(grid, 92).unwrap().factor().scale(5.0);
        let h = rec.apply_pi(&f).unwrap();
        for m in chain.members() {
            let ph = rec.apply_p(m.assignment(), &h).unwrap();
            assert!(ph.max_abs() < 1e-10);
        }
        let hh = rec.apply_pi(&h).unwrap();
        assert!(hh.max_abs_diff(&h).unwrap() < 1e-10);
    }

    #[test]
    fn general_solution_window() {
        let chain = fig3_chain(66, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let grid = chain.grid();
        let f = random_phase_tensor(grid, 93).unwrap().factor().clone();
        let (family, h) = rec.family(&f).unwrap();
        let (a, b) = (f.min(), f.max());
        let n = chain.n() as f64;
        assert!(family.m_plus <= n * (b - a) + 1e-12);
        assert!(family.m_minus <= n * (b - a) + 1e-12);
        let (lo, hi) = family.lambda_range.unwrap();
        assert!(lo < 0.0 && hi > 0.0);

        // lambda = 0 returns rho0 itself
        let (_, rho) = rec.general_solution(&f, 0.0).unwrap();
        assert!(rho.factor().max_abs_diff(rec.rho0().factor()).unwrap() < 1e-15);

        // at the upper end the support minimum touches zero
        let (_, rho_hi) = rec.general_solution(&f, hi).unwrap();
        let min_on_support = rho_hi
            .factor()
            .data()
            .iter()
            .zip(rec.rho0().factor().data())
            .filter(|(_, r)| **r > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min);
        assert!(min_on_support.abs() < 1e-10);

        // marginals are reproduced inside the window
        for lambda in [lo, 0.37 * hi, hi] {
            let (_, rho) = rec.general_solution(&f, lambda).unwrap();
            for m in chain.members() {
                let got = marginalize(&rho, m.assignment()).unwrap();
                assert!(got.factor().max_abs_diff(m.factor()).unwrap() < 1e-10);
            }
        }

        // outside the window the error carries the range
        let err = rec.general_solution(&f, hi * 1.5).unwrap_err();
        assert!(matches!(err, Error::LambdaOutOfRange { .. }));

        let _ = h;
    }

    #[test]
    fn membership_roundtrip() {
        let chain = fig3_chain(77, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let report = rec.membership(rec.rho0()).unwrap();
        assert!(report.residual() < 1e-12);

        let f = random_phase_tensor(chain.grid(), 94).unwrap().factor().clone();
        let (family, _) = rec.family(&f).unwrap();
        let (lo, hi) = family.lambda_range.unwrap();
        let lambda = lo + 0.3 * (hi - lo);
        let (_, rho) = rec.general_solution(&f, lambda).unwrap();
        let report = rec.membership(&rho).unwrap();
        assert!(report.is_member(1e-9), "residual {}", report.residual());
    }

    #[test]
    fn composite_link_reconstruction() {
        // the disconnected simple example: one composite link of length two
        let g = ChainGraph::from_type_strings(4, &["1234", "1'234", "1'2'34", "1'23'4'"]).unwrap();
        let grid = GridSpec::uniform(4, 2).unwrap();
        let chain = random_chain(&g, &grid, 111).unwrap();
        let diagram = crate::classify::connectify(&g).unwrap();
        let tree = ReconstructionTree::from_diagram(&diagram).unwrap();
        assert_eq!(tree.links().len(), 3);
        assert!(tree.links().iter().any(|l| l.axes.len() == 2));
        let rec = Reconstruction::new(&chain, tree, None, COMPAT_TOL).unwrap();
        assert!(rec.marginal_residual().unwrap() < 1e-10);
        assert!((rec.rho0().factor().total() - 1.0).abs() < 1e-10);

        // peeling across the composite link
        let leaf = parse("1'23'4'", 4);
        let (reduced, sub) = peel(rec.rho0().factor(), rec.tree(), &leaf).unwrap();
        let expected = rec.partial_product(&sub).unwrap();
        assert!(
            reduced
                .max_abs_diff(&expected.expand(reduced.vars(), reduced.shape()).unwrap())
                .unwrap()
                < 1e-12
        );

        // projector algebra still holds with the composite pair term
        let f = random_phase_tensor(&grid, 112).unwrap().factor().clone();
        let h = rec.apply_pi(&f).unwrap();
        for m in chain.members() {
            assert!(rec.apply_p(m.assignment(), &h).unwrap().max_abs() < 1e-10);
        }
        let _ = check_compatibility(&chain, 1e-12).unwrap();
    }

    #[test]
    fn lemma2_path_identity_exhaustive_small_tree() {
        let chain = fig3_chain(88, 2);
        let rec = Reconstruction::from_connected_chain(&chain, None, COMPAT_TOL).unwrap();
        let f = random_phase_tensor(chain.grid(), 95).unwrap().factor().scale(3.0);
        let types = chain.types();
        for gamma in &types {
            for beta in &types {
                if gamma == beta {
                    continue;
                }
                let path = rec.tree().path(gamma, beta).unwrap();
                if path.len() < 3 {
                    continue;
                }
                for alpha in &path[1..path.len() - 1] {
                    let contiguous = alpha.distance(gamma).unwrap() == 1
                        || alpha.distance(beta).unwrap() == 1;
                    if !contiguous {
                        continue;
                    }
                    let pb = rec.apply_p(beta, &f).unwrap();
                    let pab = rec.apply_p(alpha, &pb).unwrap();
                    let lhs = rec.apply_p(gamma, &pab).unwrap();
                    let rhs = rec.apply_p(gamma, &pb).unwrap();
                    assert!(
                        lhs.max_abs_diff(&rhs).unwrap() < 1e-10,
                        "path identity failed for {gamma}, {alpha}, {beta}"
                    );
                }
            }
        }
    }

    #[test]
    fn rho0_from_phase_roundtrip_on_disconnected_simple_graph() {
        // chains from an actual density are reproduced by the composite
        // construction as well
        let g = ChainGraph::from_type_strings(4, &["1234", "1'234", "1'2'34", "1'23'4'"]).unwrap();
        let grid = GridSpec::uniform(4, 2).unwrap();
        let rho = random_phase_tensor(&grid, 200).unwrap();
        let chain = chain_from_phase(&rho, &g).unwrap();
        let diagram = crate::classify::connectify(&g).unwrap();
        let tree = ReconstructionTree::from_diagram(&diagram).unwrap();
        let rec = Reconstruction::new(&chain, tree, None, COMPAT_TOL).unwrap();
        for m in chain.members() {
            let got = marginalize(rec.rho0(), m.assignment()).unwrap();
            assert!(got.factor().max_abs_diff(m.factor()).unwrap() < 1e-11);
        }
    }
}

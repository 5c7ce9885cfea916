//! Finite-grid probability machinery.
//!
//! All integrals are finite sums over probability masses; there are no
//! quadrature weights. Grid labels are real values used only for reporting.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::{AxisAssignment, Var, VarKind};
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::tensor::Factor;
use crate::NORM_TOL;

/// Per-axis position and momentum grids (labels; the counts are the lengths).
#[derive(Clone, PartialEq, Debug)]
pub struct AxisGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct GridSpec {
    axes: Vec<AxisGrid>,
}

impl GridSpec {
    pub fn new(axes: Vec<AxisGrid>) -> Result<Self> {
        if axes.is_empty() || axes.len() > crate::assignment::MAX_AXES {
            return Err(Error::BadDimension(axes.len()));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.q.is_empty() || a.p.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "axis {} needs at least one grid point per side",
                    i + 1
                )));
            }
        }
        Ok(GridSpec { axes })
    }

    /// Equal q/p point counts per axis with labels centered on zero.
    pub fn centered(sizes: &[usize]) -> Result<Self> {
        let axes = sizes
            .iter()
            .map(|&m| {
                let labels: Vec<f64> = (0..m).map(|j| j as f64 - (m as f64 - 1.0) / 2.0).collect();
                AxisGrid {
                    q: labels.clone(),
                    p: labels,
                }
            })
            .collect();
        GridSpec::new(axes)
    }

    /// `dim` axes, `m` points on every grid.
    pub fn uniform(dim: usize, m: usize) -> Result<Self> {
        GridSpec::centered(&vec![m; dim])
    }

    /// Two-point grids labeled {-1, +1} on every axis.
    pub fn two_point(dim: usize) -> Result<Self> {
        let axis = AxisGrid {
            q: vec![-1.0, 1.0],
            p: vec![-1.0, 1.0],
        };
        GridSpec::new(vec![axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[AxisGrid] {
        &self.axes
    }

    pub fn len_of(&self, v: Var) -> usize {
        match v.kind {
            VarKind::Position => self.axes[v.axis].q.len(),
            VarKind::Momentum => self.axes[v.axis].p.len(),
        }
    }

    pub fn shape_of(&self, vars: &[Var]) -> Vec<usize> {
        vars.iter().map(|&v| self.len_of(v)).collect()
    }

    /// All 2N variables in canonical order.
    pub fn phase_vars(&self) -> Vec<Var> {
        let mut vars = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            vars.push(Var::q(axis));
            vars.push(Var::p(axis));
        }
        vars
    }

    pub fn phase_shape(&self) -> Vec<usize> {
        self.shape_of(&self.phase_vars())
    }

    pub fn cell_count(&self) -> usize {
        self.phase_shape().iter().product()
    }

    /// Shape of a distribution of the given type.
    pub fn member_shape(&self, a: &AxisAssignment) -> Vec<usize> {
        self.shape_of(&a.vars())
    }
}

/// A nonnegative normalized rank-N mass tensor attached to one type.
#[derive(Clone, PartialEq, Debug)]
pub struct MarginalTensor {
    assignment: AxisAssignment,
    values: Factor,
}

fn check_mass_tensor(f: &Factor, tol: f64) -> Result<()> {
    for (i, &v) in f.data().iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeEntry { value: v, index: i });
        }
    }
    let total = f.total();
    if (total - 1.0).abs() > tol {
        return Err(Error::NotNormalized { total, tol });
    }
    Ok(())
}

impl MarginalTensor {
    pub fn new(grid: &GridSpec, assignment: AxisAssignment, values: Vec<f64>) -> Result<Self> {
        if assignment.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: assignment.dim(),
            });
        }
        let vars = assignment.vars();
        let shape = grid.shape_of(&vars);
        let factor = Factor::new(vars, shape, values)?;
        check_mass_tensor(&factor, NORM_TOL)?;
        Ok(MarginalTensor {
            assignment,
            values: factor,
        })
    }

    pub fn from_factor(assignment: AxisAssignment, values: Factor) -> Result<Self> {
        check_mass_tensor(&values, NORM_TOL)?;
        if values.vars() != assignment.vars().as_slice() {
            return Err(Error::InvalidInput(format!(
                "factor scope does not match type {assignment}"
            )));
        }
        Ok(MarginalTensor { assignment, values })
    }

    pub fn assignment(&self) -> &AxisAssignment {
        &self.assignment
    }

    pub fn factor(&self) -> &Factor {
        &self.values
    }
}

/// A nonnegative normalized rank-2N mass tensor on the full phase space.
#[derive(Clone, PartialEq, Debug)]
pub struct PhaseTensor {
    grid: GridSpec,
    values: Factor,
}

impl PhaseTensor {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let factor = Factor::new(grid.phase_vars(), grid.phase_shape(), values)?;
        check_mass_tensor(&factor, NORM_TOL)?;
        Ok(PhaseTensor {
            grid,
            values: factor,
        })
    }

    pub fn from_factor(grid: GridSpec, values: Factor) -> Result<Self> {
        if values.vars() != grid.phase_vars().as_slice() {
            return Err(Error::InvalidInput(
                "phase tensor must span all 2N variables".into(),
            ));
        }
        check_mass_tensor(&values, NORM_TOL)?;
        Ok(PhaseTensor { grid, values })
    }

    /// Accept floating-point dust: entries in `[-neg_tol, 0)` are clamped to
    /// zero, anything more negative is an error.
    pub fn from_factor_clamped(grid: GridSpec, values: Factor, neg_tol: f64) -> Result<Self> {
        let mut values = values;
        for (i, v) in values.data_mut().iter_mut().enumerate() {
            if *v < 0.0 {
                if *v < -neg_tol {
                    return Err(Error::NegativeEntry { value: *v, index: i });
                }
                *v = 0.0;
            }
            let _ = i;
        }
        PhaseTensor::from_factor(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn factor(&self) -> &Factor {
        &self.values
    }
}

/// Sum out the conjugate variables, leaving the distribution of type `a`.
pub fn marginalize(rho: &PhaseTensor, a: &AxisAssignment) -> Result<MarginalTensor> {
    if a.dim() != rho.grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.grid.dim(),
            got: a.dim(),
        });
    }
    let reduced = rho.values.sum_out(&a.conjugate_vars());
    MarginalTensor::from_factor(*a, reduced)
}

/// Mutually compatible distributions of distinct types on one grid.
#[derive(Clone, Debug)]
pub struct Chain {
    grid: GridSpec,
    members: Vec<MarginalTensor>,
    graph: ChainGraph,
}

impl Chain {
    /// Members are sorted into canonical order; the graph is derived from
    /// the member types. Compatibility is not checked here, see
    /// [`check_compatibility`].
    pub fn new(grid: GridSpec, members: Vec<MarginalTensor>) -> Result<Self> {
        let mut members = members;
        members.sort_by_key(|m| *m.assignment());
        for m in &members {
            if m.assignment().dim() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    got: m.assignment().dim(),
                });
            }
            let expected = grid.member_shape(m.assignment());
            if m.factor().shape() != expected.as_slice() {
                return Err(Error::Shape {
                    expected,
                    got: m.factor().shape().to_vec(),
                });
            }
        }
        let graph = ChainGraph::new(grid.dim(), members.iter().map(|m| *m.assignment()))?;
        Ok(Chain {
            grid,
            members,
            graph,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    /// Members in canonical order.
    pub fn members(&self) -> &[MarginalTensor] {
        &self.members
    }

    pub fn member(&self, a: &AxisAssignment) -> Option<&MarginalTensor> {
        self.members.iter().find(|m| m.assignment() == a)
    }

    pub fn graph(&self) -> &ChainGraph {
        &self.graph
    }

    pub fn types(&self) -> Vec<AxisAssignment> {
        self.members.iter().map(|m| *m.assignment()).collect()
    }
}

/// Both sides of the pairwise compatibility condition: each distribution is
/// summed over the axes on which the two types disagree.
pub fn compat_deviation(sa: &MarginalTensor, sb: &MarginalTensor) -> Result<f64> {
    let diff = sa.assignment().differing_axes(sb.assignment())?;
    let kill_a: Vec<Var> = diff.iter().map(|&ax| Var { axis: ax, kind: sa.assignment().kind(ax) }).collect();
    let kill_b: Vec<Var> = diff.iter().map(|&ax| Var { axis: ax, kind: sb.assignment().kind(ax) }).collect();
    let lhs = sa.factor().sum_out(&kill_a);
    let rhs = sb.factor().sum_out(&kill_b);
    lhs.max_abs_diff(&rhs)
}

#[derive(Clone, Debug)]
pub struct PairDeviation {
    pub a: AxisAssignment,
    pub b: AxisAssignment,
    pub deviation: f64,
}

#[derive(Clone, Debug)]
pub struct CompatReport {
    pub tol: f64,
    pub pairs: Vec<PairDeviation>,
    pub max_deviation: f64,
    pub pass: bool,
}

/// Pairwise compatibility of every member pair.
pub fn check_compatibility(chain: &Chain, tol: f64) -> Result<CompatReport> {
    let mut pairs = Vec::new();
    let mut max_dev = 0.0f64;
    for i in 0..chain.members.len() {
        for j in i + 1..chain.members.len() {
            let deviation = compat_deviation(&chain.members[i], &chain.members[j])?;
            max_dev = max_dev.max(deviation);
            pairs.push(PairDeviation {
                a: *chain.members[i].assignment(),
                b: *chain.members[j].assignment(),
                deviation,
            });
        }
    }
    Ok(CompatReport {
        tol,
        pairs,
        max_deviation: max_dev,
        pass: max_dev <= tol,
    })
}

/// The common reduction of a compatible pair: both distributions summed over
/// their differing axes, averaged.
///
/// The result is a factor over the shared variables. Fails when the two
/// sums deviate by more than `tol`, or when the types coincide.
pub fn integrated_distribution(
    sa: &MarginalTensor,
    sb: &MarginalTensor,
    tol: f64,
) -> Result<Factor> {
    let diff = sa.assignment().differing_axes(sb.assignment())?;
    if diff.is_empty() {
        return Err(Error::IdenticalAssignments {
            a: sa.assignment().to_string(),
            b: sb.assignment().to_string(),
        });
    }
    let kill_a: Vec<Var> = diff.iter().map(|&ax| Var { axis: ax, kind: sa.assignment().kind(ax) }).collect();
    let kill_b: Vec<Var> = diff.iter().map(|&ax| Var { axis: ax, kind: sb.assignment().kind(ax) }).collect();
    let lhs = sa.factor().sum_out(&kill_a);
    let rhs = sb.factor().sum_out(&kill_b);
    let deviation = lhs.max_abs_diff(&rhs)?;
    if deviation > tol {
        return Err(Error::Incompatible {
            a: sa.assignment().to_string(),
            b: sb.assignment().to_string(),
            deviation,
            tol,
        });
    }
    Ok(lhs.add(&rhs)?.scale(0.5))
}

/// A strictly positive random mass tensor with dyadic entries.
///
/// Cell weights are integers and the total is padded to a power of two, so
/// every entry and every partial sum is exact in f64 and exactly
/// representable over the denominator 2^32. Fixed seeds give bit-identical
/// tensors.
pub fn random_phase_tensor(grid: &GridSpec, seed: u64) -> Result<PhaseTensor> {
    let cells = grid.cell_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<u64> = (0..cells).map(|_| rng.gen_range(1..=65535u64)).collect();
    let total: u64 = weights.iter().sum();
    let padded = total.next_power_of_two();
    weights[0] += padded - total;
    let scale = 1.0 / padded as f64;
    let values = weights.iter().map(|&w| w as f64 * scale).collect();
    PhaseTensor::new(grid.clone(), values)
}

/// Marginalize a density onto every vertex of a graph.
pub fn chain_from_phase(rho: &PhaseTensor, graph: &ChainGraph) -> Result<Chain> {
    if graph.dim() != rho.grid().dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.grid().dim(),
            got: graph.dim(),
        });
    }
    let members = graph
        .vertices()
        .iter()
        .map(|v| marginalize(rho, v))
        .collect::<Result<Vec<_>>>()?;
    Chain::new(rho.grid().clone(), members)
}

/// A compatible-by-construction random chain: a common random density,
/// marginalized onto each vertex.
pub fn random_chain(graph: &ChainGraph, grid: &GridSpec, seed: u64) -> Result<Chain> {
    let rho = random_phase_tensor(grid, seed)?;
    chain_from_phase(&rho, graph)
}

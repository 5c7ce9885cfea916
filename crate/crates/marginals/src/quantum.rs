//! Chains generated from discrete wavefunctions.
//!
//! Position amplitudes live on per-axis grids; momentum representations come
//! from the centered unitary discrete Fourier transform applied axis by
//! axis (negative exponent for position to momentum, frequency labels
//! symmetric about zero). Squared moduli of the mixed-basis amplitudes give
//! the member distributions, which are mutually compatible by construction.

use num_complex::Complex64;

use crate::assignment::{AxisAssignment, VarKind};
use crate::classify::ConnectifiedDiagram;
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::grid::{Chain, GridSpec, MarginalTensor};
use crate::tensor::Factor;
use crate::NORM_TOL;

/// A normalized complex amplitude tensor over the position grids.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    grid: GridSpec,
    shape: Vec<usize>,
    amps: Vec<Complex64>,
}

impl WaveFunction {
    /// Amplitudes over centered grids of the given per-axis sizes,
    /// row-major, axis 1 outermost.
    pub fn new(sizes: &[usize], amps: Vec<Complex64>) -> Result<Self> {
        Self::with_grid(GridSpec::centered(sizes)?, amps)
    }

    /// Same, against an explicit grid. Every axis must have matching
    /// position and momentum point counts.
    pub fn with_grid(grid: GridSpec, amps: Vec<Complex64>) -> Result<Self> {
        for (axis, a) in grid.axes().iter().enumerate() {
            if a.q.len() != a.p.len() {
                return Err(Error::UnequalGridSizes {
                    axis: axis + 1,
                    q: a.q.len(),
                    p: a.p.len(),
                });
            }
        }
        let shape: Vec<usize> = grid.axes().iter().map(|a| a.q.len()).collect();
        let len: usize = shape.iter().product();
        if amps.len() != len {
            return Err(Error::Shape {
                expected: vec![len],
                got: vec![amps.len()],
            });
        }
        let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                total,
                tol: NORM_TOL,
            });
        }
        Ok(WaveFunction { grid, shape, amps })
    }

    /// Normalize raw amplitudes (all-zero input is rejected).
    pub fn normalized(sizes: &[usize], mut amps: Vec<Complex64>) -> Result<Self> {
        let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("zero wavefunction".into()));
        }
        let scale = 1.0 / total.sqrt();
        for a in &mut amps {
            *a *= scale;
        }
        Self::new(sizes, amps)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.shape
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }
}

/// Centered unitary DFT matrix, row-major: entry (k, j) is
/// exp(-2 pi i (k - c)(j - c) / m) / sqrt(m) with c = (m - 1) / 2.
pub fn dft_matrix(m: usize) -> Vec<Complex64> {
    let c = (m as f64 - 1.0) / 2.0;
    let scale = 1.0 / (m as f64).sqrt();
    let mut out = Vec::with_capacity(m * m);
    for k in 0..m {
        for j in 0..m {
            let phase = -2.0 * std::f64::consts::PI * (k as f64 - c) * (j as f64 - c) / m as f64;
            out.push(Complex64::from_polar(scale, phase));
        }
    }
    out
}

/// Apply an m-by-m matrix along one axis of a row-major complex tensor.
fn transform_axis(shape: &[usize], data: &mut Vec<Complex64>, axis: usize, matrix: &[Complex64]) {
    let m = shape[axis];
    debug_assert_eq!(matrix.len(), m * m);
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::default(); m];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * m * inner + i;
            for (k, slot) in line.iter_mut().enumerate() {
                let mut acc = Complex64::default();
                for j in 0..m {
                    acc += matrix[k * m + j] * data[base + j * inner];
                }
                *slot = acc;
            }
            for (k, v) in line.iter().enumerate() {
                data[base + k * inner] = *v;
            }
        }
    }
}

/// Amplitudes in the mixed basis selected by `a`: the transform acts on
/// every momentum-assigned axis, position axes are untouched.
pub fn to_mixed_basis(psi: &WaveFunction, a: &AxisAssignment) -> Result<Vec<Complex64>> {
    if a.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            got: a.dim(),
        });
    }
    let mut data = psi.amps.clone();
    for axis in 0..psi.dim() {
        if a.kind(axis) == VarKind::Momentum {
            let m = psi.shape[axis];
            transform_axis(&psi.shape, &mut data, axis, &dft_matrix(m));
        }
    }
    Ok(data)
}

fn member_from_amps(
    grid: &GridSpec,
    a: AxisAssignment,
    amps: &[Complex64],
) -> Result<MarginalTensor> {
    let values: Vec<f64> = amps.iter().map(|v| v.norm_sqr()).collect();
    MarginalTensor::new(grid, a, values)
}

/// The chain of squared-modulus distributions of one state over all
/// vertices of a graph.
pub fn quantum_chain(psi: &WaveFunction, graph: &ChainGraph) -> Result<Chain> {
    if graph.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            got: graph.dim(),
        });
    }
    let members = graph
        .vertices()
        .iter()
        .map(|v| {
            let amps = to_mixed_basis(psi, v)?;
            member_from_amps(&psi.grid, *v, &amps)
        })
        .collect::<Result<Vec<_>>>()?;
    Chain::new(psi.grid.clone(), members)
}

/// A convex mixture of pure states.
#[derive(Clone, Debug)]
pub struct Ensemble {
    entries: Vec<(f64, WaveFunction)>,
}

impl Ensemble {
    pub fn new(entries: Vec<(f64, WaveFunction)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("empty ensemble".into()));
        }
        let total: f64 = entries.iter().map(|(w, _)| *w).sum();
        if entries.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > NORM_TOL {
            return Err(Error::BadWeights { total });
        }
        let sizes = entries[0].1.sizes().to_vec();
        for (_, psi) in &entries {
            if psi.sizes() != sizes.as_slice() {
                return Err(Error::Shape {
                    expected: sizes.clone(),
                    got: psi.sizes().to_vec(),
                });
            }
        }
        Ok(Ensemble { entries })
    }

    pub fn entries(&self) -> &[(f64, WaveFunction)] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries[0].1.dim()
    }

    pub fn grid(&self) -> &GridSpec {
        self.entries[0].1.grid()
    }
}

/// The weighted combination of the per-state chains.
pub fn mixed_state_chain(ens: &Ensemble, graph: &ChainGraph) -> Result<Chain> {
    let grid = ens.grid().clone();
    let members = graph
        .vertices()
        .iter()
        .map(|v| {
            let mut acc: Option<Factor> = None;
            for (w, psi) in ens.entries() {
                let amps = to_mixed_basis(psi, v)?;
                let vals: Vec<f64> = amps.iter().map(|z| w * z.norm_sqr()).collect();
                let f = Factor::new(v.vars(), grid.member_shape(v), vals)?;
                acc = Some(match acc {
                    None => f,
                    Some(a) => a.add(&f)?,
                });
            }
            MarginalTensor::from_factor(*v, acc.expect("nonempty ensemble"))
        })
        .collect::<Result<Vec<_>>>()?;
    Chain::new(grid, members)
}

/// A pure or mixed source of quantum chains.
#[derive(Clone, Debug)]
pub enum QuantumSource {
    Pure(WaveFunction),
    Mixed(Ensemble),
}

impl QuantumSource {
    pub fn dim(&self) -> usize {
        match self {
            QuantumSource::Pure(p) => p.dim(),
            QuantumSource::Mixed(e) => e.dim(),
        }
    }

    pub fn chain(&self, graph: &ChainGraph) -> Result<Chain> {
        match self {
            QuantumSource::Pure(p) => quantum_chain(p, graph),
            QuantumSource::Mixed(e) => mixed_state_chain(e, graph),
        }
    }
}

/// Evaluate the source on every vertex of the connectified graph, insertions
/// included. The result is a chain of the supergraph's type whose
/// restriction to the original vertices is the plain chain of the source.
pub fn extend_chain(source: &QuantumSource, diagram: &ConnectifiedDiagram) -> Result<Chain> {
    if let Some(index) = diagram.gc.duplicate_index() {
        return Err(Error::NonProper { index });
    }
    if !diagram.gc.is_connected() {
        return Err(Error::Disconnected);
    }
    if source.dim() != diagram.gc.dim() {
        return Err(Error::DimensionMismatch {
            expected: diagram.gc.dim(),
            got: source.dim(),
        });
    }
    source.chain(&diagram.gc)
}

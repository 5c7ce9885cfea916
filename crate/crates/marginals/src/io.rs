//! JSON file formats.
//!
//! Every emitted document carries a `schema_version` field. Values
//! round-trip bit-exactly (serde_json uses shortest-roundtrip printing for
//! f64). Chain and phase-tensor files may carry parallel `values_exact`
//! arrays of `"numerator/denominator"` strings; the feasibility oracle
//! prefers those when present, since quantized floats cannot stay exactly
//! compatible.
//!
//! Layouts: member values are row-major with axis 1 outermost, each axis
//! sized by its own (position or momentum) grid; phase-tensor values are
//! row-major over (q1..qN, p1..pN).

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::assignment::{AxisAssignment, Var, VarKind};
use crate::classify::{Classification, Evidence, Verdict};
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::grid::{AxisGrid, Chain, CompatReport, GridSpec, MarginalTensor, PhaseTensor};
use crate::oracle::{FeasibilityResult, Lemma3Certificate, RationalChain, RationalPhaseTensor};
use crate::tensor::Factor;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct GridAxisFile {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct MemberFile {
    /// Canonical type form: one of 'q'/'p' per axis, e.g. "qpq".
    #[serde(rename = "type")]
    pub kind: String,
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values_exact: Option<Vec<String>>,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct ChainFile {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub grids: Vec<GridAxisFile>,
    pub members: Vec<MemberFile>,
}

fn grid_to_file(grid: &GridSpec) -> Vec<GridAxisFile> {
    grid.axes()
        .iter()
        .map(|a| GridAxisFile {
            q: a.q.clone(),
            p: a.p.clone(),
        })
        .collect()
}

fn grid_from_file(grids: &[GridAxisFile]) -> Result<GridSpec> {
    GridSpec::new(
        grids
            .iter()
            .map(|a| AxisGrid {
                q: a.q.clone(),
                p: a.p.clone(),
            })
            .collect(),
    )
}

fn rational_to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn rational_from_string(s: &str) -> Result<BigRational> {
    BigRational::from_str(s.trim())
        .map_err(|e| Error::InvalidInput(format!("bad rational {s:?}: {e}")))
}

/// Serialize a chain; when `exact` is given its members must match and are
/// embedded as exact value strings.
pub fn chain_to_file(chain: &Chain, exact: Option<&RationalChain>) -> Result<ChainFile> {
    if let Some(rc) = exact {
        if rc.members().len() != chain.members().len() {
            return Err(Error::InvalidInput(
                "exact chain does not match the float chain".into(),
            ));
        }
    }
    let members = chain
        .members()
        .iter()
        .enumerate()
        .map(|(i, m)| MemberFile {
            kind: m.assignment().qp_string(),
            values: m.factor().data().to_vec(),
            values_exact: exact.map(|rc| {
                rc.members()[i].1.iter().map(|r| rational_to_string(r)).collect()
            }),
        })
        .collect();
    Ok(ChainFile {
        schema_version: SCHEMA_VERSION,
        n: chain.grid().dim(),
        grids: grid_to_file(chain.grid()),
        members,
    })
}

/// Parse a chain file; the exact chain comes back only when every member
/// carries exact values.
pub fn chain_from_file(file: &ChainFile) -> Result<(Chain, Option<RationalChain>)> {
    let grid = grid_from_file(&file.grids)?;
    if grid.dim() != file.n {
        return Err(Error::DimensionMismatch {
            expected: file.n,
            got: grid.dim(),
        });
    }
    let mut members = Vec::new();
    for m in &file.members {
        let a = AxisAssignment::from_qp_string(&m.kind)?;
        members.push(MarginalTensor::new(&grid, a, m.values.clone())?);
    }
    let chain = Chain::new(grid.clone(), members)?;
    let exact = if file.members.iter().all(|m| m.values_exact.is_some()) {
        let q_sizes = grid.axes().iter().map(|a| a.q.len()).collect();
        let p_sizes = grid.axes().iter().map(|a| a.p.len()).collect();
        let mut exact_members = Vec::new();
        for m in &file.members {
            let a = AxisAssignment::from_qp_string(&m.kind)?;
            let values = m
                .values_exact
                .as_ref()
                .unwrap()
                .iter()
                .map(|s| rational_from_string(s))
                .collect::<Result<Vec<_>>>()?;
            exact_members.push((a, values));
        }
        Some(RationalChain::new(q_sizes, p_sizes, exact_members)?)
    } else {
        None
    };
    Ok((chain, exact))
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct PhaseFile {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub grids: Vec<GridAxisFile>,
    /// Row-major over (q1..qN, p1..pN).
    pub values: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values_exact: Option<Vec<String>>,
}

fn file_order_vars(dim: usize) -> Vec<Var> {
    (0..dim)
        .map(Var::q)
        .chain((0..dim).map(Var::p))
        .collect()
}

pub fn phase_to_file(rho: &PhaseTensor, exact: Option<&RationalPhaseTensor>) -> Result<PhaseFile> {
    let dim = rho.grid().dim();
    let order = file_order_vars(dim);
    let values = rho.factor().permuted_values(&order)?;
    let values_exact = match exact {
        None => None,
        Some(rt) => {
            // same permutation applied to the rational values
            let shape = rho.grid().phase_shape();
            let marker: Vec<f64> = (0..rt.values.len()).map(|i| i as f64).collect();
            let index_factor = Factor::new(rho.grid().phase_vars(), shape, marker)?;
            let perm = index_factor.permuted_values(&order)?;
            Some(
                perm.iter()
                    .map(|&i| rational_to_string(&rt.values[i as usize]))
                    .collect(),
            )
        }
    };
    Ok(PhaseFile {
        schema_version: SCHEMA_VERSION,
        n: dim,
        grids: grid_to_file(rho.grid()),
        values,
        values_exact,
    })
}

pub fn phase_from_file(file: &PhaseFile) -> Result<PhaseTensor> {
    let grid = grid_from_file(&file.grids)?;
    if grid.dim() != file.n {
        return Err(Error::DimensionMismatch {
            expected: file.n,
            got: grid.dim(),
        });
    }
    let order = file_order_vars(grid.dim());
    let shape: Vec<usize> = order.iter().map(|&v| grid.len_of(v)).collect();
    let factor = Factor::from_permuted(&order, &shape, &file.values)?;
    PhaseTensor::from_factor(grid, factor)
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct WaveFunctionFile {
    pub schema_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub sizes: Vec<usize>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

pub fn wavefunction_to_file(psi: &crate::quantum::WaveFunction) -> WaveFunctionFile {
    WaveFunctionFile {
        schema_version: SCHEMA_VERSION,
        n: psi.dim(),
        sizes: psi.sizes().to_vec(),
        re: psi.amplitudes().iter().map(|z| z.re).collect(),
        im: psi.amplitudes().iter().map(|z| z.im).collect(),
    }
}

pub fn wavefunction_from_file(file: &WaveFunctionFile) -> Result<crate::quantum::WaveFunction> {
    if file.sizes.len() != file.n {
        return Err(Error::DimensionMismatch {
            expected: file.n,
            got: file.sizes.len(),
        });
    }
    if file.re.len() != file.im.len() {
        return Err(Error::Shape {
            expected: vec![file.re.len()],
            got: vec![file.im.len()],
        });
    }
    let amps = file
        .re
        .iter()
        .zip(&file.im)
        .map(|(&re, &im)| num_complex::Complex64::new(re, im))
        .collect();
    crate::quantum::WaveFunction::new(&file.sizes, amps)
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct EnsembleFile {
    pub schema_version: u32,
    pub weights: Vec<f64>,
    pub states: Vec<WaveFunctionFile>,
}

pub fn ensemble_from_file(file: &EnsembleFile) -> Result<crate::quantum::Ensemble> {
    if file.weights.len() != file.states.len() {
        return Err(Error::Shape {
            expected: vec![file.weights.len()],
            got: vec![file.states.len()],
        });
    }
    let entries = file
        .weights
        .iter()
        .zip(&file.states)
        .map(|(&w, s)| Ok((w, wavefunction_from_file(s)?)))
        .collect::<Result<Vec<_>>>()?;
    crate::quantum::Ensemble::new(entries)
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct VarFile {
    /// 1-based axis.
    pub axis: usize,
    /// "q" or "p".
    pub kind: String,
}

/// A bare factor over named variables (free passive factors, direction
/// tensors for the general solution).
#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct FactorFile {
    pub schema_version: u32,
    pub vars: Vec<VarFile>,
    /// Row-major over `vars` in the order given.
    pub values: Vec<f64>,
}

pub fn factor_to_file(f: &Factor) -> FactorFile {
    FactorFile {
        schema_version: SCHEMA_VERSION,
        vars: f
            .vars()
            .iter()
            .map(|v| VarFile {
                axis: v.axis + 1,
                kind: v.kind.letter().to_string(),
            })
            .collect(),
        values: f.data().to_vec(),
    }
}

pub fn factor_from_file(file: &FactorFile, grid: &GridSpec) -> Result<Factor> {
    let vars = file
        .vars
        .iter()
        .map(|v| {
            let kind = match v.kind.as_str() {
                "q" => VarKind::Position,
                "p" => VarKind::Momentum,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "variable kind must be \"q\" or \"p\", got {other:?}"
                    )))
                }
            };
            if v.axis == 0 || v.axis > grid.dim() {
                return Err(Error::InvalidInput(format!(
                    "axis {} out of range 1..={}",
                    v.axis,
                    grid.dim()
                )));
            }
            Ok(Var {
                axis: v.axis - 1,
                kind,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let shape: Vec<usize> = vars.iter().map(|&v| grid.len_of(v)).collect();
    Factor::from_permuted(&vars, &shape, &file.values)
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct QuartetFile {
    pub vertices: Vec<String>,
    /// 1-based axis pair.
    pub axes: [usize; 2],
    pub proper: bool,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct EvidenceFile {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gc: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub insertions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub non_simple_insertions: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quartet: Option<QuartetFile>,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct ClassificationFile {
    pub schema_version: u32,
    /// "fully", "quantum" or "non".
    pub verdict: String,
    pub evidence: EvidenceFile,
}

fn type_strings(vs: &[AxisAssignment]) -> Vec<String> {
    vs.iter().map(|v| v.to_string()).collect()
}

pub fn classification_to_file(g: &ChainGraph, c: &Classification) -> ClassificationFile {
    let verdict = match c.verdict {
        Verdict::FullyAdmissible => "fully",
        Verdict::QuantumAdmissible => "quantum",
        Verdict::NonAdmissible => "non",
    }
    .to_string();
    let evidence = match &c.evidence {
        Evidence::ProperConnected => EvidenceFile {
            kind: "proper_connected".into(),
            gc: Some(type_strings(g.vertices())),
            insertions: None,
            non_simple_insertions: None,
            quartet: None,
        },
        Evidence::Simple { diagram } => EvidenceFile {
            kind: "simple_supergraph".into(),
            gc: Some(type_strings(diagram.gc.vertices())),
            insertions: Some(type_strings(&diagram.insertions())),
            non_simple_insertions: None,
            quartet: None,
        },
        Evidence::NonSimple {
            diagram,
            non_simple_insertions,
        } => EvidenceFile {
            kind: "non_simple_supergraph".into(),
            gc: Some(type_strings(diagram.gc.vertices())),
            insertions: Some(type_strings(&diagram.insertions())),
            non_simple_insertions: Some(type_strings(non_simple_insertions)),
            quartet: None,
        },
        Evidence::Quartet { quartet, proper } => EvidenceFile {
            kind: "critical_quartet".into(),
            gc: None,
            insertions: None,
            non_simple_insertions: None,
            quartet: Some(QuartetFile {
                vertices: quartet.vertices.iter().map(|v| v.to_string()).collect(),
                axes: [quartet.axes.0 + 1, quartet.axes.1 + 1],
                proper: *proper,
            }),
        },
    };
    ClassificationFile {
        schema_version: SCHEMA_VERSION,
        verdict,
        evidence,
    }
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct FeasibilityFile {
    pub schema_version: u32,
    /// "feasible" or "infeasible".
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_file: Option<String>,
    /// One entry per constraint row, ordered by member (canonical order)
    /// then member cell (row-major).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Vec<String>>,
}

pub fn feasibility_to_file(result: &FeasibilityResult, witness_file: Option<String>) -> FeasibilityFile {
    match result {
        FeasibilityResult::Feasible { .. } => FeasibilityFile {
            schema_version: SCHEMA_VERSION,
            status: "feasible".into(),
            witness_file,
            certificate: None,
        },
        FeasibilityResult::Infeasible { certificate } => FeasibilityFile {
            schema_version: SCHEMA_VERSION,
            status: "infeasible".into(),
            witness_file: None,
            certificate: Some(certificate.iter().map(rational_to_string).collect()),
        },
    }
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct AffineCoeffFile {
    pub constant: String,
    pub lambda: String,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct Lemma3CertificateFile {
    pub schema_version: u32,
    pub k: usize,
    pub coeff_a: AffineCoeffFile,
    pub coeff_b: AffineCoeffFile,
    pub sum: String,
    pub family_dimension: usize,
}

pub fn lemma3_certificate_to_file(c: &Lemma3Certificate) -> Lemma3CertificateFile {
    Lemma3CertificateFile {
        schema_version: SCHEMA_VERSION,
        k: c.k,
        coeff_a: AffineCoeffFile {
            constant: rational_to_string(&c.coeff_a.0),
            lambda: rational_to_string(&c.coeff_a.1),
        },
        coeff_b: AffineCoeffFile {
            constant: rational_to_string(&c.coeff_b.0),
            lambda: rational_to_string(&c.coeff_b.1),
        },
        sum: rational_to_string(&c.sum),
        family_dimension: c.family_dimension,
    }
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct PairDeviationFile {
    pub a: String,
    pub b: String,
    pub deviation: f64,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct CompatFile {
    pub schema_version: u32,
    pub tol: f64,
    pub pass: bool,
    pub max_deviation: f64,
    pub pairs: Vec<PairDeviationFile>,
}

pub fn compat_to_file(report: &CompatReport) -> CompatFile {
    CompatFile {
        schema_version: SCHEMA_VERSION,
        tol: report.tol,
        pass: report.pass,
        max_deviation: report.max_deviation,
        pairs: report
            .pairs
            .iter()
            .map(|p| PairDeviationFile {
                a: p.a.to_string(),
                b: p.b.to_string(),
                deviation: p.deviation,
            })
            .collect(),
    }
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct LambdaOutputFile {
    pub lambda: f64,
    pub file: String,
}

/// Scaling window and emitted densities of one general-solution run.
#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct FamilyPartFile {
    pub m_plus: f64,
    pub m_minus: f64,
    /// True when the direction vanishes and every lambda works.
    pub unbounded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    pub rho_files: Vec<LambdaOutputFile>,
}

#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct ReconstructionFile {
    pub schema_version: u32,
    pub verdict: String,
    pub rho0_file: String,
    /// Largest deviation between the rho0 marginals and the chain members.
    pub marginal_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyPartFile>,
}

//! Independent ground truth for admissibility questions.
//!
//! [`lp_feasible`] answers "does a nonnegative phase tensor with these
//! marginals exist" by an exact-rational phase-one simplex over the cell
//! masses, returning either a witness tensor (verified to reproduce every
//! marginal exactly) or a Farkas certificate (verified to separate).
//!
//! [`lemma3_chain`] builds the analytic family of compatible but
//! non-admissible chains on two-point grids, and [`lemma3_certificate`]
//! checks its closed-form obstruction on the configuration grid.

pub mod exact;
pub mod simplex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::assignment::{AxisAssignment, Var, VarKind};
use crate::error::{Error, Result};
use crate::grid::{AxisGrid, Chain, GridSpec, MarginalTensor};
use crate::tensor::Factor;

use simplex::{phase_one, verify_certificate, verify_solution, PhaseOneOutcome};

/// Default cap on the number of phase-space cells the oracle accepts.
pub const DEFAULT_CELL_CAP: usize = 1_000_000;

/// Default quantization denominator, 2^32.
pub fn default_denominator() -> BigInt {
    BigInt::one() << 32
}

#[derive(Clone, Debug)]
pub struct LpOptions {
    pub cell_cap: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// A chain with exact rational masses (grid labels dropped, only counts).
#[derive(Clone, PartialEq, Debug)]
pub struct RationalChain {
    dim: usize,
    q_sizes: Vec<usize>,
    p_sizes: Vec<usize>,
    /// Sorted by assignment; values row-major over the member's variables.
    members: Vec<(AxisAssignment, Vec<BigRational>)>,
}

impl RationalChain {
    pub fn new(
        q_sizes: Vec<usize>,
        p_sizes: Vec<usize>,
        mut members: Vec<(AxisAssignment, Vec<BigRational>)>,
    ) -> Result<Self> {
        let dim = q_sizes.len();
        if dim == 0 || dim != p_sizes.len() {
            return Err(Error::BadDimension(dim));
        }
        members.sort_by_key(|(a, _)| *a);
        for w in members.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateVertex(w[0].0.to_string()));
            }
        }
        for (a, values) in &members {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
            let len: usize = (0..dim)
                .map(|ax| match a.kind(ax) {
                    VarKind::Position => q_sizes[ax],
                    VarKind::Momentum => p_sizes[ax],
                })
                .product();
            if values.len() != len {
                return Err(Error::Shape {
                    expected: vec![len],
                    got: vec![values.len()],
                });
            }
            if values.iter().any(|v| v.is_negative()) {
                return Err(Error::NegativeEntry {
                    value: f64::NAN,
                    index: 0,
                });
            }
        }
        if members.is_empty() {
            return Err(Error::EmptyGraph);
        }
        Ok(RationalChain {
            dim,
            q_sizes,
            p_sizes,
            members,
        })
    }

    /// Exact ingestion: every value must be an integer multiple of
    /// `1/denominator` (each f64 is converted exactly, then checked).
    pub fn from_chain_strict(chain: &Chain, denominator: &BigInt) -> Result<Self> {
        let den = BigRational::from_integer(denominator.clone());
        let convert = |v: f64| -> Result<BigRational> {
            let r = BigRational::from_float(v).ok_or(Error::NonRational {
                value: v,
                denominator: denominator.to_string(),
            })?;
            if !(&r * &den).is_integer() {
                return Err(Error::NonRational {
                    value: v,
                    denominator: denominator.to_string(),
                });
            }
            Ok(r)
        };
        Self::from_chain_with(chain, convert)
    }

    /// Lossy ingestion: round every value to the nearest multiple of
    /// `1/denominator`. The feasibility verdict then applies to the rounded
    /// chain, which may differ from the intended one near the boundary.
    pub fn from_chain_rounded(chain: &Chain, denominator: &BigInt) -> Result<Self> {
        let den = BigRational::from_integer(denominator.clone());
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        let convert = |v: f64| -> Result<BigRational> {
            let r = BigRational::from_float(v).ok_or(Error::NonRational {
                value: v,
                denominator: denominator.to_string(),
            })?;
            let scaled = &r * &den + &half;
            Ok(BigRational::from_integer(scaled.floor().to_integer()) / &den)
        };
        Self::from_chain_with(chain, convert)
    }

    fn from_chain_with(
        chain: &Chain,
        convert: impl Fn(f64) -> Result<BigRational>,
    ) -> Result<Self> {
        let grid = chain.grid();
        let q_sizes: Vec<usize> = grid.axes().iter().map(|a| a.q.len()).collect();
        let p_sizes: Vec<usize> = grid.axes().iter().map(|a| a.p.len()).collect();
        let members = chain
            .members()
            .iter()
            .map(|m| {
                let values = m
                    .factor()
                    .data()
                    .iter()
                    .map(|&v| convert(v))
                    .collect::<Result<Vec<_>>>()?;
                Ok((*m.assignment(), values))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(q_sizes, p_sizes, members)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q_sizes(&self) -> &[usize] {
        &self.q_sizes
    }

    pub fn p_sizes(&self) -> &[usize] {
        &self.p_sizes
    }

    pub fn members(&self) -> &[(AxisAssignment, Vec<BigRational>)] {
        &self.members
    }

    pub fn cell_count(&self) -> usize {
        self.q_sizes
            .iter()
            .zip(&self.p_sizes)
            .map(|(q, p)| q * p)
            .product()
    }

    fn var_size(&self, v: Var) -> usize {
        match v.kind {
            VarKind::Position => self.q_sizes[v.axis],
            VarKind::Momentum => self.p_sizes[v.axis],
        }
    }

    /// Convert to f64 against a matching grid.
    pub fn to_chain(&self, grid: &GridSpec) -> Result<Chain> {
        let members = self
            .members
            .iter()
            .map(|(a, values)| {
                let vals: Vec<f64> = values
                    .iter()
                    .map(|r| r.to_f64().expect("rational fits in f64"))
                    .collect();
                MarginalTensor::new(grid, *a, vals)
            })
            .collect::<Result<Vec<_>>>()?;
        Chain::new(grid.clone(), members)
    }

    /// Sum each member over the axes outside `j_axes`, deduplicate members
    /// whose restricted types coincide (their reductions must agree
    /// exactly), and renumber the kept axes ascending.
    pub fn j_reduce(&self, j_axes: &[usize]) -> Result<RationalChain> {
        let keep = normalize_axis_set(self.dim, j_axes)?;
        let mut reduced: Vec<(AxisAssignment, Vec<BigRational>)> = Vec::new();
        for (a, values) in &self.members {
            let (ra, rv) = reduce_member_exact(self, a, values, &keep);
            match reduced.iter().find(|(t, _)| *t == ra) {
                Some((_, existing)) => {
                    if *existing != rv {
                        return Err(Error::Incompatible {
                            a: a.to_string(),
                            b: ra.to_string(),
                            deviation: f64::NAN,
                            tol: 0.0,
                        });
                    }
                }
                None => reduced.push((ra, rv)),
            }
        }
        let q_sizes: Vec<usize> = keep.iter().map(|&ax| self.q_sizes[ax]).collect();
        let p_sizes: Vec<usize> = keep.iter().map(|&ax| self.p_sizes[ax]).collect();
        RationalChain::new(q_sizes, p_sizes, reduced)
    }
}

fn normalize_axis_set(dim: usize, axes: &[usize]) -> Result<Vec<usize>> {
    if axes.is_empty() {
        return Err(Error::InvalidInput("empty axis subset".into()));
    }
    let mut keep: Vec<usize> = axes.to_vec();
    keep.sort();
    keep.dedup();
    if keep.last().copied().unwrap_or(0) >= dim {
        return Err(Error::InvalidInput(format!(
            "axis {} out of range 1..={dim}",
            keep.last().unwrap() + 1
        )));
    }
    Ok(keep)
}

fn reduce_member_exact(
    chain: &RationalChain,
    a: &AxisAssignment,
    values: &[BigRational],
    keep: &[usize],
) -> (AxisAssignment, Vec<BigRational>) {
    let shape: Vec<usize> = (0..chain.dim)
        .map(|ax| chain.var_size(Var { axis: ax, kind: a.kind(ax) }))
        .collect();
    let out_shape: Vec<usize> = keep.iter().map(|&ax| shape[ax]).collect();
    let out_len: usize = out_shape.iter().product();
    let mut out = vec![BigRational::zero(); out_len];
    let mut idx = vec![0usize; chain.dim];
    for v in values {
        let mut off = 0usize;
        for &ax in keep {
            off = off * shape[ax] + idx[ax];
        }
        out[off] += v;
        for d in (0..chain.dim).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    let flags: Vec<VarKind> = keep.iter().map(|&ax| a.kind(ax)).collect();
    let ra = AxisAssignment::from_flags(&flags).expect("nonempty axis subset");
    (ra, out)
}

/// A phase tensor with exact rational masses, canonical interleaved
/// variable order (q1, p1, q2, p2, ...), row-major.
#[derive(Clone, PartialEq, Debug)]
pub struct RationalPhaseTensor {
    pub q_sizes: Vec<usize>,
    pub p_sizes: Vec<usize>,
    pub values: Vec<BigRational>,
}

impl RationalPhaseTensor {
    pub fn to_phase_tensor(&self, grid: &GridSpec) -> Result<crate::grid::PhaseTensor> {
        let values: Vec<f64> = self
            .values
            .iter()
            .map(|r| r.to_f64().expect("rational fits in f64"))
            .collect();
        crate::grid::PhaseTensor::new(grid.clone(), values)
    }
}

/// The oracle's verdict. Both arms carry exact, re-verified evidence.
#[derive(Clone, Debug)]
pub enum FeasibilityResult {
    Feasible {
        witness: RationalPhaseTensor,
    },
    /// One certificate entry per constraint row, ordered by member
    /// (canonical) and member cell (row-major): the certificate has
    /// nonnegative induced cost on every phase cell while its inner product
    /// with the marginal values is strictly negative.
    Infeasible {
        certificate: Vec<BigRational>,
    },
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityResult::Feasible { .. })
    }
}

/// The equality system of a chain: one 0/1 row per member cell over the
/// phase cells (canonical interleaved order), matching right-hand sides.
pub fn build_system(chain: &RationalChain) -> (Vec<Vec<BigRational>>, Vec<BigRational>) {
    let cells = chain.cell_count();
    let dim = chain.dim;
    let phase_vars: Vec<Var> = (0..dim)
        .flat_map(|ax| [Var::q(ax), Var::p(ax)])
        .collect();
    let phase_shape: Vec<usize> = phase_vars.iter().map(|&v| chain.var_size(v)).collect();

    // rows: per member, per member cell, in canonical order
    let mut a_rows: Vec<Vec<BigRational>> = Vec::new();
    let mut b: Vec<BigRational> = Vec::new();
    for (assignment, values) in &chain.members {
        let member_vars = assignment.vars();
        let member_shape: Vec<usize> = member_vars.iter().map(|&v| chain.var_size(v)).collect();
        let row_base = a_rows.len();
        for _ in 0..values.len() {
            a_rows.push(vec![BigRational::zero(); cells]);
        }
        b.extend(values.iter().cloned());
        // scan phase cells once, bumping the matching member row
        let mut idx = vec![0usize; phase_vars.len()];
        for cell in 0..cells {
            let mut off = 0usize;
            for (mv, ms) in member_vars.iter().zip(&member_shape) {
                let pos = phase_vars.iter().position(|v| v == mv).unwrap();
                off = off * ms + idx[pos];
            }
            a_rows[row_base + off][cell] = BigRational::one();
            for d in (0..phase_vars.len()).rev() {
                idx[d] += 1;
                if idx[d] < phase_shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
    }
    (a_rows, b)
}

/// Re-verify a result against its chain in exact arithmetic: a witness must
/// reproduce every marginal exactly, a certificate must separate.
pub fn verify_result(chain: &RationalChain, result: &FeasibilityResult) -> bool {
    let (a_rows, b) = build_system(chain);
    match result {
        FeasibilityResult::Feasible { witness } => {
            witness.values.len() == chain.cell_count()
                && verify_solution(&a_rows, &b, &witness.values)
        }
        FeasibilityResult::Infeasible { certificate } => {
            certificate.len() == b.len() && verify_certificate(&a_rows, &b, certificate)
        }
    }
}

/// Exact feasibility of "some nonnegative phase tensor has these marginals".
pub fn lp_feasible(chain: &RationalChain, opts: &LpOptions) -> Result<FeasibilityResult> {
    let cells = chain.cell_count();
    if cells > opts.cell_cap {
        return Err(Error::CellCap {
            cells,
            cap: opts.cell_cap,
        });
    }
    let (a_rows, b) = build_system(chain);
    let run = phase_one(&a_rows, &b);
    match run.outcome {
        PhaseOneOutcome::Feasible { x } => {
            if !verify_solution(&a_rows, &b, &x) {
                return Err(Error::InternalInconsistency(
                    "simplex witness failed exact verification".into(),
                ));
            }
            Ok(FeasibilityResult::Feasible {
                witness: RationalPhaseTensor {
                    q_sizes: chain.q_sizes.clone(),
                    p_sizes: chain.p_sizes.clone(),
                    values: x,
                },
            })
        }
        PhaseOneOutcome::Infeasible { y } => {
            if !verify_certificate(&a_rows, &b, &y) {
                return Err(Error::InternalInconsistency(
                    "simplex certificate failed exact verification".into(),
                ));
            }
            Ok(FeasibilityResult::Infeasible { certificate: y })
        }
    }
}

/// Deterministic pivot trace for one feasibility problem (diagnostics).
pub fn lp_pivot_trace(chain: &RationalChain) -> Result<Vec<(usize, usize)>> {
    let cells = chain.cell_count();
    if cells > DEFAULT_CELL_CAP {
        return Err(Error::CellCap {
            cells,
            cap: DEFAULT_CELL_CAP,
        });
    }
    let (a_rows, b) = build_system(chain);
    Ok(phase_one(&a_rows, &b).pivots)
}

/// Sum each member over the axes outside `j_axes`, deduplicate identical
/// reduced types (values must agree within `tol`), renumber axes ascending.
pub fn j_reduce(chain: &Chain, j_axes: &[usize], tol: f64) -> Result<Chain> {
    let keep = normalize_axis_set(chain.grid().dim(), j_axes)?;
    let axes: Vec<AxisGrid> = keep
        .iter()
        .map(|&ax| chain.grid().axes()[ax].clone())
        .collect();
    let reduced_grid = GridSpec::new(axes)?;
    let mut reduced: Vec<MarginalTensor> = Vec::new();
    for m in chain.members() {
        let a = m.assignment();
        let kill: Vec<Var> = (0..chain.grid().dim())
            .filter(|ax| !keep.contains(ax))
            .map(|ax| Var {
                axis: ax,
                kind: a.kind(ax),
            })
            .collect();
        let summed = m.factor().sum_out(&kill);
        // renumber the kept axes
        let new_vars: Vec<Var> = keep
            .iter()
            .enumerate()
            .map(|(new_ax, &old_ax)| Var {
                axis: new_ax,
                kind: a.kind(old_ax),
            })
            .collect();
        let renumbered = Factor::new(
            new_vars,
            summed.shape().to_vec(),
            summed.data().to_vec(),
        )?;
        let flags: Vec<VarKind> = keep.iter().map(|&ax| a.kind(ax)).collect();
        let ra = AxisAssignment::from_flags(&flags)?;
        match reduced.iter().find(|t| t.assignment() == &ra) {
            Some(existing) => {
                let dev = existing.factor().max_abs_diff(&renumbered)?;
                if dev > tol {
                    return Err(Error::Incompatible {
                        a: a.to_string(),
                        b: ra.to_string(),
                        deviation: dev,
                        tol,
                    });
                }
            }
            None => reduced.push(MarginalTensor::from_factor(ra, renumbered)?),
        }
    }
    Chain::new(reduced_grid, reduced)
}

fn k_guard(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::KTooSmall {
            k,
            hint: String::new(),
        });
    }
    if k == 2 {
        return Err(Error::KTooSmall {
            k,
            hint: "; the obstruction monomials only exist for k >= 3".into(),
        });
    }
    Ok(())
}

/// The compatible-but-infeasible k-chain on two-point position grids
/// labeled {-1, +1}: member j puts momentum on axis j with an arbitrary
/// normalized one-variable factor, and a parity-locked mass pattern on the
/// remaining position axes (minus parity for the first member, plus for the
/// others).
pub fn lemma3_chain(k: usize, gammas: Option<&[Vec<f64>]>) -> Result<Chain> {
    k_guard(k)?;
    let default_gamma = vec![0.5, 0.5];
    let gamma_of = |j: usize| -> Result<&[f64]> {
        match gammas {
            None => Ok(default_gamma.as_slice()),
            Some(gs) => {
                if gs.len() != k {
                    return Err(Error::InvalidInput(format!(
                        "expected {k} momentum factors, got {}",
                        gs.len()
                    )));
                }
                Ok(gs[j].as_slice())
            }
        }
    };
    for j in 0..k {
        let g = gamma_of(j)?;
        if g.is_empty() || g.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidInput("momentum factor must be nonnegative".into()));
        }
        let total: f64 = g.iter().sum();
        if (total - 1.0).abs() > crate::NORM_TOL {
            return Err(Error::NotNormalized {
                total,
                tol: crate::NORM_TOL,
            });
        }
    }

    let axes: Vec<AxisGrid> = (0..k)
        .map(|j| {
            let p_len = gamma_of(j).map(|g| g.len()).unwrap_or(2);
            AxisGrid {
                q: vec![-1.0, 1.0],
                p: if p_len == 2 {
                    vec![-1.0, 1.0]
                } else {
                    (0..p_len).map(|i| i as f64).collect()
                },
            }
        })
        .collect();
    let grid = GridSpec::new(axes)?;

    let scale = 1.0 / (1u64 << (k - 1)) as f64;
    let mut members = Vec::with_capacity(k);
    for j in 0..k {
        let gamma = gamma_of(j)?;
        let a = AxisAssignment::new(k, 1 << j)?;
        let shape = grid.member_shape(&a);
        let len: usize = shape.iter().product();
        let mut values = vec![0.0; len];
        let mut idx = vec![0usize; k];
        for slot in values.iter_mut() {
            // parity over the position axes, signs +1 at index 1, -1 at 0
            let mut parity = 1i32;
            for (ax, &i) in idx.iter().enumerate() {
                if ax != j {
                    parity *= if i == 1 { 1 } else { -1 };
                }
            }
            let tau_bar = if j == 0 {
                // minus the parity product for the first member
                (1.0 - parity as f64) * scale
            } else {
                (1.0 + parity as f64) * scale
            };
            *slot = gamma[idx[j]] * tau_bar;
            for d in (0..k).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        members.push(MarginalTensor::new(&grid, a, values)?);
    }
    Chain::new(grid, members)
}

/// The closed-form obstruction for [`lemma3_chain`].
#[derive(Clone, Debug)]
pub struct Lemma3Certificate {
    pub k: usize,
    /// Mass at (-1, +1, ..., +1) as (constant, lambda coefficient):
    /// -(k - 1 + lambda) / 2^k.
    pub coeff_a: (BigRational, BigRational),
    /// Mass at (+1, -1, -1, +1, ..., +1): (k - 5 + lambda) / 2^k.
    pub coeff_b: (BigRational, BigRational),
    /// The lambda-independent sum, -4 / 2^k; negative, so no member of the
    /// solution family is nonnegative.
    pub sum: BigRational,
    /// Dimension of the configuration-grid solution family (the lambda
    /// line), verified by exact elimination.
    pub family_dimension: usize,
}

/// Mass vector of the one-parameter solution family at a given lambda,
/// over the 2^k configuration grid (index bit 1 = +1), row-major.
fn lemma3_family_masses(k: usize, lambda: &BigRational) -> Vec<BigRational> {
    let denom = BigRational::from_integer(BigInt::one() << k);
    let mut out = Vec::with_capacity(1 << k);
    for cell in 0..(1usize << k) {
        let sign = |ax: usize| -> i64 {
            if cell >> (k - 1 - ax) & 1 == 1 {
                1
            } else {
                -1
            }
        };
        let full: i64 = (0..k).map(sign).product();
        let skip0: i64 = (1..k).map(sign).product();
        let mut sum_terms: i64 = 0;
        for j in 1..k {
            let prod: i64 = (0..k).filter(|&r| r != j).map(sign).product();
            sum_terms += prod;
        }
        let base = BigRational::from_integer(BigInt::from(1 - skip0 + sum_terms));
        let mass = (base + lambda * BigRational::from_integer(BigInt::from(full))) / &denom;
        out.push(mass);
    }
    out
}

/// Exact rank computation by Gauss elimination; returns (rank, consistent)
/// for the augmented system.
fn rank_and_consistency(
    mut a: Vec<Vec<BigRational>>,
    mut b: Vec<BigRational>,
) -> (usize, bool) {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    let mut rank = 0;
    for col in 0..n {
        let Some(pivot) = (rank..m).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(rank, pivot);
        b.swap(rank, pivot);
        let p = a[rank][col].clone();
        for v in a[rank].iter_mut() {
            *v /= &p;
        }
        b[rank] /= &p;
        let pivot_row = a[rank].clone();
        let pivot_rhs = b[rank].clone();
        for r in 0..m {
            if r != rank && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                    *v -= &f * pv;
                }
                b[r] -= &f * &pivot_rhs;
            }
        }
        rank += 1;
        if rank == m {
            break;
        }
    }
    let consistent = (rank..m).all(|r| b[r].is_zero());
    (rank, consistent)
}

/// Verify the obstruction: the configuration-grid marginal system has a
/// one-dimensional solution family whose two tracked masses are affine in
/// lambda with a negative lambda-free sum.
pub fn lemma3_certificate(k: usize) -> Result<Lemma3Certificate> {
    k_guard(k)?;
    let denom = BigRational::from_integer(BigInt::one() << k);
    let coeff_a = (
        BigRational::from_integer(BigInt::from(-((k as i64) - 1))) / &denom,
        BigRational::from_integer(BigInt::from(-1)) / &denom,
    );
    let coeff_b = (
        BigRational::from_integer(BigInt::from(k as i64 - 5)) / &denom,
        BigRational::from_integer(BigInt::from(1)) / &denom,
    );
    let sum = &coeff_a.0 + &coeff_b.0;
    debug_assert_eq!(
        sum,
        BigRational::from_integer(BigInt::from(-4)) / &denom
    );

    // configuration-grid system: unknown masses on {-1,+1}^k, one equation
    // per member per configuration of its position axes
    let cells = 1usize << k;
    let mut a_rows: Vec<Vec<BigRational>> = Vec::new();
    let mut b: Vec<BigRational> = Vec::new();
    for j in 0..k {
        // equations: sum over axis j of rho-bar = tau-bar_j
        for eq in 0..(cells >> 1) {
            let mut row = vec![BigRational::zero(); cells];
            // interleave eq bits around axis j (axis 0 is the outermost bit)
            for qj in 0..2usize {
                let high = eq >> (k - 1 - j) << (k - j);
                let low = eq & ((1 << (k - 1 - j)) - 1);
                let cell = high | (qj << (k - 1 - j)) | low;
                row[cell] = BigRational::one();
            }
            a_rows.push(row);
            // tau-bar value: parity of the k-1 remaining sign bits
            let mut parity = 1i64;
            for bit in 0..k - 1 {
                if eq >> bit & 1 == 0 {
                    parity = -parity;
                }
            }
            let v = if j == 0 { 1 - parity } else { 1 + parity };
            b.push(
                BigRational::from_integer(BigInt::from(v))
                    / BigRational::from_integer(BigInt::one() << (k - 1)),
            );
        }
    }
    let (rank, consistent) = rank_and_consistency(a_rows.clone(), b.clone());
    if !consistent {
        return Err(Error::InternalInconsistency(
            "configuration-grid system inconsistent".into(),
        ));
    }
    let family_dimension = cells - rank;
    if family_dimension != 1 {
        return Err(Error::InternalInconsistency(format!(
            "solution family has dimension {family_dimension}, expected 1"
        )));
    }

    // the closed-form family solves the system for every lambda, and the two
    // tracked masses match the affine formulas; check at lambda = 0 and 1
    for lam in [BigRational::zero(), BigRational::one()] {
        let masses = lemma3_family_masses(k, &lam);
        for (row, want) in a_rows.iter().zip(&b) {
            let mut s = BigRational::zero();
            for (c, v) in row.iter().zip(&masses) {
                if !c.is_zero() {
                    s += c * v;
                }
            }
            if &s != want {
                return Err(Error::InternalInconsistency(
                    "closed-form family does not solve the system".into(),
                ));
            }
        }
        // config A: (-1, +1, ..., +1); config B: (+1, -1, -1, +1, ..., +1)
        let idx_a = (1usize << (k - 1)) - 1;
        let idx_b = cells - 1 - (1 << (k - 2)) - (1 << (k - 3));
        let want_a = &coeff_a.0 + &coeff_a.1 * &lam;
        let want_b = &coeff_b.0 + &coeff_b.1 * &lam;
        if masses[idx_a] != want_a || masses[idx_b] != want_b {
            return Err(Error::InternalInconsistency(
                "tracked masses disagree with the affine formulas".into(),
            ));
        }
    }

    Ok(Lemma3Certificate {
        k,
        coeff_a,
        coeff_b,
        sum,
        family_dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ChainGraph;
    use crate::grid::random_chain;

    #[test]
    fn random_chain_is_feasible_with_exact_witness() {
        let g = ChainGraph::from_type_strings(2, &["12", "1'2", "1'2'"]).unwrap();
        let grid = GridSpec::uniform(2, 2).unwrap();
        let chain = random_chain(&g, &grid, 77).unwrap();
        let rc = RationalChain::from_chain_strict(&chain, &default_denominator()).unwrap();
        let res = lp_feasible(&rc, &LpOptions::default()).unwrap();
        match res {
            FeasibilityResult::Feasible { witness } => {
                let total: BigRational = witness.values.iter().cloned().sum();
                assert_eq!(total, BigRational::one());
            }
            FeasibilityResult::Infeasible { .. } => panic!("common-density chain is feasible"),
        }
    }

    #[test]
    fn strict_ingestion_rejects_non_dyadic() {
        let grid = GridSpec::uniform(1, 3).unwrap();
        let m = MarginalTensor::new(
            &grid,
            AxisAssignment::parse("1", 1).unwrap(),
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0],
        )
        .unwrap();
        let chain = Chain::new(grid, vec![m]).unwrap();
        let err = RationalChain::from_chain_strict(&chain, &default_denominator()).unwrap_err();
        assert!(matches!(err, Error::NonRational { .. }));
        // rounding accepts it
        let rc = RationalChain::from_chain_rounded(&chain, &default_denominator()).unwrap();
        assert_eq!(rc.members().len(), 1);
    }

    #[test]
    fn lemma3_chain_small_cases() {
        assert!(matches!(
            lemma3_chain(1, None),
            Err(Error::KTooSmall { k: 1, .. })
        ));
        let err = lemma3_chain(2, None).unwrap_err();
        match err {
            Error::KTooSmall { k, hint } => {
                assert_eq!(k, 2);
                assert!(!hint.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }

        let chain = lemma3_chain(3, None).unwrap();
        assert_eq!(chain.n(), 3);
        // first member: gamma(p1) x tau-bar(q2, q3) with masses 1/2 on
        // (+,-) and (-,+)
        let m = chain
            .member(&AxisAssignment::new(3, 0b001).unwrap())
            .unwrap();
        // member vars in axis order: (p1, q2, q3)
        assert_eq!(m.factor().at(&[0, 0, 1]), 0.25); // gamma 1/2 * 1/2
        assert_eq!(m.factor().at(&[0, 1, 0]), 0.25);
        assert_eq!(m.factor().at(&[0, 0, 0]), 0.0);
        assert_eq!(m.factor().at(&[0, 1, 1]), 0.0);
        for mem in chain.members() {
            assert!((mem.factor().total() - 1.0).abs() < 1e-15);
            assert!(mem.factor().data().iter().all(|&v| v >= 0.0));
        }
        let report = crate::grid::check_compatibility(&chain, 1e-15).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn lemma3_chain_is_infeasible() {
        let chain = lemma3_chain(3, None).unwrap();
        let rc = RationalChain::from_chain_strict(&chain, &default_denominator()).unwrap();
        let res = lp_feasible(&rc, &LpOptions::default()).unwrap();
        assert!(!res.is_feasible());
    }

    #[test]
    fn lemma3_certificate_values() {
        let c3 = lemma3_certificate(3).unwrap();
        assert_eq!(c3.coeff_a.0, simplex::ratio(-2, 8));
        assert_eq!(c3.coeff_a.1, simplex::ratio(-1, 8));
        assert_eq!(c3.coeff_b.0, simplex::ratio(-2, 8));
        assert_eq!(c3.coeff_b.1, simplex::ratio(1, 8));
        assert_eq!(c3.sum, simplex::ratio(-1, 2));
        assert_eq!(c3.family_dimension, 1);

        let c4 = lemma3_certificate(4).unwrap();
        assert_eq!(c4.sum, simplex::ratio(-1, 4));
        let c5 = lemma3_certificate(5).unwrap();
        assert_eq!(c5.sum, simplex::ratio(-4, 32));
    }

    #[test]
    fn j_reduce_identity_and_projection() {
        let g = ChainGraph::from_type_strings(3, &["123", "1'23", "12'3"]).unwrap();
        let grid = GridSpec::uniform(3, 2).unwrap();
        let chain = random_chain(&g, &grid, 5).unwrap();

        let all = j_reduce(&chain, &[0, 1, 2], 1e-12).unwrap();
        assert_eq!(all.n(), 3);
        for (a, b) in all.members().iter().zip(chain.members()) {
            assert_eq!(a.factor().data(), b.factor().data());
        }

        let reduced = j_reduce(&chain, &[0, 1], 1e-12).unwrap();
        assert_eq!(reduced.grid().dim(), 2);
        assert_eq!(reduced.n(), 3);

        // reducing to the axis where two members agree merges them
        let merged = j_reduce(&chain, &[2], 1e-12).unwrap();
        assert_eq!(merged.n(), 1);
    }

    #[test]
    fn j_reduce_fig1_pattern() {
        let g =
            ChainGraph::from_type_strings(4, &["1234", "1'234", "1'2'34", "12'3'4'"]).unwrap();
        let grid = GridSpec::uniform(4, 2).unwrap();
        let chain = random_chain(&g, &grid, 6).unwrap();
        let reduced = j_reduce(&chain, &[0, 1], 1e-12).unwrap();
        assert_eq!(reduced.n(), 4);
        let mut kinds: Vec<String> = reduced
            .members()
            .iter()
            .map(|m| m.assignment().qp_string())
            .collect();
        kinds.sort();
        assert_eq!(kinds, vec!["pp", "pq", "qp", "qq"]);
    }

    #[test]
    fn factorized_reduction() {
        // a product density reduces cleanly axis by axis
        let g = ChainGraph::from_type_strings(2, &["12", "1'2'"]).unwrap();
        let grid = GridSpec::uniform(2, 2).unwrap();
        let chain = random_chain(&g, &grid, 9).unwrap();
        let r1 = j_reduce(&chain, &[0], 1e-12).unwrap();
        assert_eq!(r1.n(), 2);
        for m in r1.members() {
            assert!((m.factor().total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_determinism() {
        let chain = lemma3_chain(3, None).unwrap();
        let rc = RationalChain::from_chain_strict(&chain, &default_denominator()).unwrap();
        let t1 = lp_pivot_trace(&rc).unwrap();
        let t2 = lp_pivot_trace(&rc).unwrap();
        assert_eq!(t1, t2);
        let r1 = lp_feasible(&rc, &LpOptions::default()).unwrap();
        let r2 = lp_feasible(&rc, &LpOptions::default()).unwrap();
        match (r1, r2) {
            (
                FeasibilityResult::Infeasible { certificate: c1 },
                FeasibilityResult::Infeasible { certificate: c2 },
            ) => assert_eq!(c1, c2),
            _ => panic!("verdicts changed between runs"),
        }
    }

    #[test]
    fn cell_cap_enforced() {
        let chain = lemma3_chain(3, None).unwrap();
        let rc = RationalChain::from_chain_strict(&chain, &default_denominator()).unwrap();
        let err = lp_feasible(&rc, &LpOptions { cell_cap: 8 }).unwrap_err();
        assert!(matches!(err, Error::CellCap { .. }));
    }
}

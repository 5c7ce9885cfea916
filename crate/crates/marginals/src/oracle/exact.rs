//! Exact rational quantum chains on two- and three-point grids.
//!
//! On those grid sizes the mixed-basis probabilities of states with
//! cyclotomic-rational amplitudes are themselves rational: the two-point
//! centered transform is a global phase times [[1, i], [i, 1]]/sqrt(2), so
//! Gaussian-rational amplitudes stay Gaussian-rational, and the three-point
//! centered transform has integer powers of the primitive cube root w, so
//! amplitudes of the form a + b w close under it and their squared moduli
//! are plain rationals. This is what lets the exact LP oracle cross-check
//! quantum chains without any quantization error.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{AxisAssignment, VarKind};
use crate::error::{Error, Result};
use crate::graph::ChainGraph;
use crate::oracle::{lp_feasible, LpOptions, RationalChain};
use crate::quantum::WaveFunction;

/// a + b i with rational parts.
#[derive(Clone, PartialEq, Debug)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

/// a + b w with w the primitive cube root of unity (w^2 = -1 - w).
#[derive(Clone, PartialEq, Debug)]
pub struct EisenRat {
    pub a: BigRational,
    pub b: BigRational,
}

pub trait ExactAmp: Clone {
    fn zero() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn conj(&self) -> Self;
    /// Squared modulus, always plain rational.
    fn norm_sq(&self) -> BigRational;
    fn to_complex(&self) -> Complex64;
}

impl ExactAmp for GaussRat {
    fn zero() -> Self {
        GaussRat {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    fn add(&self, other: &Self) -> Self {
        GaussRat {
            re: &self.re + &other.re,
            im: &self.im + &other.im,
        }
    }

    fn mul(&self, other: &Self) -> Self {
        GaussRat {
            re: &self.re * &other.re - &self.im * &other.im,
            im: &self.re * &other.im + &self.im * &other.re,
        }
    }

    fn conj(&self) -> Self {
        GaussRat {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    fn norm_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    fn to_complex(&self) -> Complex64 {
        Complex64::new(
            self.re.to_f64().expect("fits f64"),
            self.im.to_f64().expect("fits f64"),
        )
    }
}

impl ExactAmp for EisenRat {
    fn zero() -> Self {
        EisenRat {
            a: BigRational::zero(),
            b: BigRational::zero(),
        }
    }

    fn add(&self, other: &Self) -> Self {
        EisenRat {
            a: &self.a + &other.a,
            b: &self.b + &other.b,
        }
    }

    fn mul(&self, other: &Self) -> Self {
        // (a1 + b1 w)(a2 + b2 w), w^2 = -1 - w
        let cross = &self.a * &other.b + &self.b * &other.a;
        let bb = &self.b * &other.b;
        EisenRat {
            a: &self.a * &other.a - &bb,
            b: cross - bb,
        }
    }

    fn conj(&self) -> Self {
        // conj(w) = w^2 = -1 - w
        EisenRat {
            a: &self.a - &self.b,
            b: -self.b.clone(),
        }
    }

    fn norm_sq(&self) -> BigRational {
        &self.a * &self.a - &self.a * &self.b + &self.b * &self.b
    }

    fn to_complex(&self) -> Complex64 {
        let w = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
        Complex64::new(self.a.to_f64().expect("fits f64"), 0.0)
            + w * self.b.to_f64().expect("fits f64")
    }
}

fn gauss_int(re: i64, im: i64) -> GaussRat {
    GaussRat {
        re: BigRational::from_integer(BigInt::from(re)),
        im: BigRational::from_integer(BigInt::from(im)),
    }
}

fn eisen_int(a: i64, b: i64) -> EisenRat {
    EisenRat {
        a: BigRational::from_integer(BigInt::from(a)),
        b: BigRational::from_integer(BigInt::from(b)),
    }
}

/// Unscaled two-point transform: the centered unitary transform equals a
/// global phase times this matrix divided by sqrt(2).
fn matrix_m2() -> Vec<GaussRat> {
    vec![
        gauss_int(1, 0),
        gauss_int(0, 1),
        gauss_int(0, 1),
        gauss_int(1, 0),
    ]
}

/// Unscaled three-point transform: the centered unitary transform equals
/// this matrix divided by sqrt(3). Entries are powers of w.
fn matrix_m3() -> Vec<EisenRat> {
    let one = eisen_int(1, 0);
    let w = eisen_int(0, 1);
    let w2 = eisen_int(-1, -1);
    vec![
        w2.clone(),
        one.clone(),
        w.clone(),
        one.clone(),
        one.clone(),
        one.clone(),
        w,
        one,
        w2,
    ]
}

fn transform_axis_exact<T: ExactAmp>(shape: &[usize], data: &mut Vec<T>, axis: usize, matrix: &[T]) {
    let m = shape[axis];
    debug_assert_eq!(matrix.len(), m * m);
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line: Vec<T> = vec![T::zero(); m];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * m * inner + i;
            for (k, slot) in line.iter_mut().enumerate() {
                let mut acc = T::zero();
                for j in 0..m {
                    acc = acc.add(&matrix[k * m + j].mul(&data[base + j * inner]));
                }
                *slot = acc;
            }
            for (k, v) in line.iter().enumerate() {
                data[base + k * inner] = v.clone();
            }
        }
    }
}

/// Amplitudes of one exact state, uniform grid size across axes.
#[derive(Clone, Debug)]
pub enum ExactAmps {
    /// Grid size 2, Gaussian rationals.
    Gauss(Vec<GaussRat>),
    /// Grid size 3, Eisenstein rationals.
    Eisen(Vec<EisenRat>),
}

/// An unnormalized exact state; probabilities divide by the squared norm,
/// so normalization never leaves the rationals.
#[derive(Clone, Debug)]
pub struct ExactWaveFunction {
    dim: usize,
    amps: ExactAmps,
}

impl ExactWaveFunction {
    pub fn new(dim: usize, amps: ExactAmps) -> Result<Self> {
        let (m, len) = match &amps {
            ExactAmps::Gauss(v) => (2usize, v.len()),
            ExactAmps::Eisen(v) => (3usize, v.len()),
        };
        let expect = m.pow(dim as u32);
        if len != expect {
            return Err(Error::Shape {
                expected: vec![expect],
                got: vec![len],
            });
        }
        let state = ExactWaveFunction { dim, amps };
        if state.norm_sq().is_zero() {
            return Err(Error::InvalidInput("zero wavefunction".into()));
        }
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid_size(&self) -> usize {
        match &self.amps {
            ExactAmps::Gauss(_) => 2,
            ExactAmps::Eisen(_) => 3,
        }
    }

    pub fn norm_sq(&self) -> BigRational {
        match &self.amps {
            ExactAmps::Gauss(v) => v.iter().map(|z| z.norm_sq()).sum(),
            ExactAmps::Eisen(v) => v.iter().map(|z| z.norm_sq()).sum(),
        }
    }

    fn member_values<T: ExactAmp>(
        &self,
        amps: &[T],
        matrix: &[T],
        a: &AxisAssignment,
    ) -> Vec<BigRational> {
        let m = self.grid_size();
        let shape = vec![m; self.dim];
        let mut data: Vec<T> = amps.to_vec();
        let mut p_axes = 0u32;
        for axis in 0..self.dim {
            if a.kind(axis) == VarKind::Momentum {
                transform_axis_exact(&shape, &mut data, axis, matrix);
                p_axes += 1;
            }
        }
        let scale =
            self.norm_sq() * BigRational::from_integer(BigInt::from(m as i64).pow(p_axes));
        data.iter().map(|z| z.norm_sq() / &scale).collect()
    }

    /// The exact chain of this state over the graph's vertices.
    pub fn chain(&self, graph: &ChainGraph) -> Result<RationalChain> {
        if graph.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: graph.dim(),
            });
        }
        let m = self.grid_size();
        let members = graph
            .vertices()
            .iter()
            .map(|v| {
                let values = match &self.amps {
                    ExactAmps::Gauss(amps) => self.member_values(amps, &matrix_m2(), v),
                    ExactAmps::Eisen(amps) => self.member_values(amps, &matrix_m3(), v),
                };
                (*v, values)
            })
            .collect();
        RationalChain::new(vec![m; self.dim], vec![m; self.dim], members)
    }

    /// The f64 state with the same probabilities (normalized amplitudes).
    pub fn to_wavefunction(&self) -> Result<WaveFunction> {
        let sizes = vec![self.grid_size(); self.dim];
        let amps: Vec<Complex64> = match &self.amps {
            ExactAmps::Gauss(v) => v.iter().map(|z| z.to_complex()).collect(),
            ExactAmps::Eisen(v) => v.iter().map(|z| z.to_complex()).collect(),
        };
        WaveFunction::normalized(&sizes, amps)
    }

    /// Exact view of a two-point-grid state: every f64 amplitude is a
    /// dyadic rational, so the conversion is lossless.
    pub fn from_wavefunction_m2(psi: &WaveFunction) -> Result<ExactWaveFunction> {
        if psi.sizes().iter().any(|&m| m != 2) {
            return Err(Error::InvalidInput(
                "exact conversion requires two-point grids on every axis".into(),
            ));
        }
        let amps = psi
            .amplitudes()
            .iter()
            .map(|z| {
                let re = BigRational::from_float(z.re);
                let im = BigRational::from_float(z.im);
                match (re, im) {
                    (Some(re), Some(im)) => Ok(GaussRat { re, im }),
                    _ => Err(Error::InvalidInput("non-finite amplitude".into())),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        ExactWaveFunction::new(psi.dim(), ExactAmps::Gauss(amps))
    }

    /// Tensor with a position basis vector on one extra trailing axis.
    pub fn extend_with_basis_axis(&self, basis_index: usize) -> Result<ExactWaveFunction> {
        let m = self.grid_size();
        if basis_index >= m {
            return Err(Error::InvalidInput(format!(
                "basis index {basis_index} out of range 0..{m}"
            )));
        }
        let amps = match &self.amps {
            ExactAmps::Gauss(v) => {
                let mut out = vec![GaussRat::zero(); v.len() * m];
                for (i, z) in v.iter().enumerate() {
                    out[i * m + basis_index] = z.clone();
                }
                ExactAmps::Gauss(out)
            }
            ExactAmps::Eisen(v) => {
                let mut out = vec![EisenRat::zero(); v.len() * m];
                for (i, z) in v.iter().enumerate() {
                    out[i * m + basis_index] = z.clone();
                }
                ExactAmps::Eisen(out)
            }
        };
        ExactWaveFunction::new(self.dim + 1, amps)
    }
}

/// Persisted form of the square-search result: dyadic Gaussian amplitudes
/// row-major over a 2x2 grid, numerators over a common denominator.
#[derive(Clone, Serialize, Deserialize, Debug)]
pub struct SquareFixture {
    pub seed: u64,
    pub draw: usize,
    pub den: i64,
    pub re_num: Vec<i64>,
    pub im_num: Vec<i64>,
}

impl SquareFixture {
    pub fn state(&self) -> Result<ExactWaveFunction> {
        let amps = self
            .re_num
            .iter()
            .zip(&self.im_num)
            .map(|(&re, &im)| GaussRat {
                re: BigRational::new(BigInt::from(re), BigInt::from(self.den)),
                im: BigRational::new(BigInt::from(im), BigInt::from(self.den)),
            })
            .collect();
        ExactWaveFunction::new(2, ExactAmps::Gauss(amps))
    }
}

/// The four types on two axes.
pub fn square_graph() -> ChainGraph {
    ChainGraph::from_type_strings(2, &["12", "1'2", "12'", "1'2'"]).expect("valid square")
}

/// Seeded search for a state whose four-member chain on the square is
/// LP-infeasible. Returns the draw index alongside the fixture data.
pub fn find_square_counterexample(seed: u64, max_draws: usize) -> Result<Option<SquareFixture>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = square_graph();
    let den = 8i64;
    for draw in 0..max_draws {
        let re_num: Vec<i64> = (0..4).map(|_| rng.gen_range(-8..=8i64)).collect();
        let im_num: Vec<i64> = (0..4).map(|_| rng.gen_range(-8..=8i64)).collect();
        let fixture = SquareFixture {
            seed,
            draw,
            den,
            re_num,
            im_num,
        };
        let Ok(state) = fixture.state() else {
            continue; // all-zero draw
        };
        let chain = state.chain(&graph)?;
        if !lp_feasible(&chain, &LpOptions::default())?.is_feasible() {
            return Ok(Some(fixture));
        }
    }
    Ok(None)
}

/// Sample a random exact state with small dyadic coefficients.
pub fn random_exact_state(dim: usize, m: usize, seed: u64) -> Result<ExactWaveFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = m.pow(dim as u32);
    let den = BigInt::from(8);
    loop {
        let amps = match m {
            2 => ExactAmps::Gauss(
                (0..len)
                    .map(|_| GaussRat {
                        re: BigRational::new(BigInt::from(rng.gen_range(-8..=8i64)), den.clone()),
                        im: BigRational::new(BigInt::from(rng.gen_range(-8..=8i64)), den.clone()),
                    })
                    .collect(),
            ),
            3 => ExactAmps::Eisen(
                (0..len)
                    .map(|_| EisenRat {
                        a: BigRational::new(BigInt::from(rng.gen_range(-8..=8i64)), den.clone()),
                        b: BigRational::new(BigInt::from(rng.gen_range(-8..=8i64)), den.clone()),
                    })
                    .collect(),
            ),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "exact states exist for grid sizes 2 and 3, not {m}"
                )))
            }
        };
        match ExactWaveFunction::new(dim, amps) {
            Ok(state) => return Ok(state),
            Err(Error::InvalidInput(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Quick feasibility wrapper used by tests.
pub fn state_is_feasible(state: &ExactWaveFunction, graph: &ChainGraph) -> Result<bool> {
    let chain = state.chain(graph)?;
    Ok(lp_feasible(&chain, &LpOptions::default())?.is_feasible())
}

pub use crate::oracle::default_denominator;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::quantum_chain;
    use num_traits::Signed;

    #[test]
    fn eisen_arithmetic() {
        let w = eisen_int(0, 1);
        let w2 = w.mul(&w);
        assert_eq!(w2, eisen_int(-1, -1));
        let w3 = w2.mul(&w);
        assert_eq!(w3, eisen_int(1, 0));
        assert_eq!(w.norm_sq(), BigRational::from_integer(BigInt::from(1)));
        let z = eisen_int(2, 3);
        let n = z.mul(&z.conj());
        assert_eq!(n.b, BigRational::zero());
        assert_eq!(n.a, z.norm_sq()); // 4 - 6 + 9 = 7
        assert_eq!(z.norm_sq(), BigRational::from_integer(BigInt::from(7)));
    }

    #[test]
    fn exact_chain_matches_float_path_m2() {
        let state = random_exact_state(3, 2, 31).unwrap();
        let graph = ChainGraph::from_type_strings(3, &["1'23", "12'3", "123'", "1'2'3'"]).unwrap();
        let exact = state.chain(&graph).unwrap();
        let psi = state.to_wavefunction().unwrap();
        let float = quantum_chain(&psi, &graph).unwrap();
        for ((a, values), m) in exact.members().iter().zip(float.members()) {
            assert_eq!(a, m.assignment());
            for (r, &v) in values.iter().zip(m.factor().data()) {
                assert!((r.to_f64().unwrap() - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_chain_matches_float_path_m3() {
        let state = random_exact_state(2, 3, 32).unwrap();
        let graph = ChainGraph::from_type_strings(2, &["12", "1'2", "12'"]).unwrap();
        let exact = state.chain(&graph).unwrap();
        let psi = state.to_wavefunction().unwrap();
        let float = quantum_chain(&psi, &graph).unwrap();
        for ((_, values), m) in exact.members().iter().zip(float.members()) {
            for (r, &v) in values.iter().zip(m.factor().data()) {
                assert!((r.to_f64().unwrap() - v).abs() < 1e-12, "{r} vs {v}");
            }
        }
    }

    #[test]
    fn exact_members_normalized() {
        for (dim, m, seed) in [(2usize, 2usize, 5u64), (2, 3, 6), (3, 2, 7)] {
            let state = random_exact_state(dim, m, seed).unwrap();
            let graph = ChainGraph::new(
                dim,
                (0..dim as u32 + 1).map(|b| AxisAssignment::new(dim, (1 << b) - 1).unwrap()),
            )
            .unwrap();
            let chain = state.chain(&graph).unwrap();
            for (_, values) in chain.members() {
                let total: BigRational = values.iter().cloned().sum();
                assert_eq!(total, BigRational::from_integer(BigInt::from(1)));
                assert!(values.iter().all(|v| !v.is_negative()));
            }
        }
    }

    #[test]
    fn exact_quantum_chain_is_lp_feasible_on_tree() {
        // proper connected type set: feasibility must hold
        let state = random_exact_state(2, 2, 8).unwrap();
        let graph = ChainGraph::from_type_strings(2, &["12", "1'2", "1'2'"]).unwrap();
        assert!(state_is_feasible(&state, &graph).unwrap());
    }

    #[test]
    fn basis_extension_keeps_axis_probabilities() {
        let state = random_exact_state(2, 2, 9).unwrap();
        let extended = state.extend_with_basis_axis(0).unwrap();
        assert_eq!(extended.dim(), 3);
        let g2 = ChainGraph::from_type_strings(2, &["12"]).unwrap();
        let g3 = ChainGraph::from_type_strings(3, &["123"]).unwrap();
        let c2 = state.chain(&g2).unwrap();
        let c3 = extended.chain(&g3).unwrap();
        let (_, v2) = &c2.members()[0];
        let (_, v3) = &c3.members()[0];
        for (i, v) in v2.iter().enumerate() {
            assert_eq!(&v3[i * 2], v); // q3 = index 0 carries everything
            assert!(v3[i * 2 + 1].is_zero());
        }
    }
}

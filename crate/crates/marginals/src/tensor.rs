//! Dense nonparametric tensors over named phase-space variables.
//!
//! A [`Factor`] owns a row-major table over a sorted set of [`Var`]s. The
//! three workhorses are `product`, `sum_out` and `expand`; everything in the
//! reconstruction is a chain of those. Variable scope is tracked explicitly
//! so products broadcast over missing variables.

use crate::assignment::Var;
use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Debug)]
pub struct Factor {
    vars: Vec<Var>,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn row_major_strides(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = acc;
        acc *= shape[d];
    }
    strides
}

impl Factor {
    /// A factor over `vars` (must be strictly increasing) with row-major
    /// `data` of the matching length.
    pub fn new(vars: Vec<Var>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if vars.len() != shape.len() {
            return Err(Error::Shape {
                expected: vec![vars.len()],
                got: vec![shape.len()],
            });
        }
        if !vars.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "factor variables must be strictly increasing".into(),
            ));
        }
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::Shape {
                expected: vec![len],
                got: vec![data.len()],
            });
        }
        Ok(Factor { vars, shape, data })
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn ones(vars: Vec<Var>, shape: Vec<usize>) -> Result<Self> {
        let len = shape.iter().product();
        Factor::new(vars, shape, vec![1.0; len])
    }

    /// Constant factor with total mass one.
    pub fn uniform(vars: Vec<Var>, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        Factor::new(vars, shape, vec![1.0 / len as f64; len])
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.shape.len());
        let strides = row_major_strides(&self.shape);
        let off: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
        self.data[off]
    }

    /// Stride of each of `target_vars` inside this factor, zero when absent.
    ///
    /// Walking a row-major odometer over the target scope while adding these
    /// strides visits this factor's matching cells (broadcast semantics).
    fn strides_in(&self, target_vars: &[Var]) -> Vec<usize> {
        let own = row_major_strides(&self.shape);
        target_vars
            .iter()
            .map(|v| match self.vars.binary_search(v) {
                Ok(pos) => own[pos],
                Err(_) => 0,
            })
            .collect()
    }

    /// Pointwise product over the union scope.
    ///
    /// Shapes must agree on shared variables.
    pub fn product_all(factors: &[&Factor]) -> Result<Factor> {
        let mut vars: Vec<Var> = Vec::new();
        let mut shape: Vec<usize> = Vec::new();
        for f in factors {
            for (v, s) in f.vars.iter().zip(&f.shape) {
                match vars.binary_search(v) {
                    Ok(pos) => {
                        if shape[pos] != *s {
                            return Err(Error::Shape {
                                expected: vec![shape[pos]],
                                got: vec![*s],
                            });
                        }
                    }
                    Err(pos) => {
                        vars.insert(pos, *v);
                        shape.insert(pos, *s);
                    }
                }
            }
        }
        let len: usize = shape.iter().product();
        let strides: Vec<Vec<usize>> = factors.iter().map(|f| f.strides_in(&vars)).collect();
        let mut offsets = vec![0usize; factors.len()];
        let mut idx = vec![0usize; vars.len()];
        let mut data = vec![0.0; len];
        for cell in data.iter_mut() {
            let mut v = 1.0;
            for (f, off) in factors.iter().zip(&offsets) {
                v *= f.data[*off];
            }
            *cell = v;
            for d in (0..vars.len()).rev() {
                idx[d] += 1;
                for (o, s) in offsets.iter_mut().zip(&strides) {
                    *o += s[d];
                }
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
                for (o, s) in offsets.iter_mut().zip(&strides) {
                    *o -= s[d] * shape[d];
                }
            }
        }
        Factor::new(vars, shape, data)
    }

    pub fn product(&self, other: &Factor) -> Result<Factor> {
        Factor::product_all(&[self, other])
    }

    /// Sum the listed variables out of the table.
    ///
    /// Variables not in scope are ignored.
    pub fn sum_out(&self, kill: &[Var]) -> Factor {
        let mut keep_vars = Vec::new();
        let mut keep_shape = Vec::new();
        for (v, s) in self.vars.iter().zip(&self.shape) {
            if !kill.contains(v) {
                keep_vars.push(*v);
                keep_shape.push(*s);
            }
        }
        if keep_vars.len() == self.vars.len() {
            return self.clone();
        }
        let out_strides_full = {
            // stride of each self var in the output, zero for killed vars
            let out_strides = row_major_strides(&keep_shape);
            self.vars
                .iter()
                .map(|v| match keep_vars.binary_search(v) {
                    Ok(pos) => out_strides[pos],
                    Err(_) => 0,
                })
                .collect::<Vec<_>>()
        };
        let out_len: usize = keep_shape.iter().product();
        let mut data = vec![0.0; out_len];
        let mut idx = vec![0usize; self.vars.len()];
        let mut out_off = 0usize;
        for cell in &self.data {
            data[out_off] += *cell;
            for d in (0..self.vars.len()).rev() {
                idx[d] += 1;
                out_off += out_strides_full[d];
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
                out_off -= out_strides_full[d] * self.shape[d];
            }
        }
        Factor::new(keep_vars, keep_shape, data).expect("sum_out scope is valid")
    }

    /// Materialize on a superset scope, repeating values along new axes.
    pub fn expand(&self, target_vars: &[Var], target_shape: &[usize]) -> Result<Factor> {
        for v in &self.vars {
            if target_vars.binary_search(v).is_err() {
                return Err(Error::InvalidInput(format!(
                    "expand target lacks variable {v}"
                )));
            }
        }
        let strides = self.strides_in(target_vars);
        let len: usize = target_shape.iter().product();
        let mut data = vec![0.0; len];
        let mut idx = vec![0usize; target_vars.len()];
        let mut off = 0usize;
        for cell in data.iter_mut() {
            *cell = self.data[off];
            for d in (0..target_vars.len()).rev() {
                idx[d] += 1;
                off += strides[d];
                if idx[d] < target_shape[d] {
                    break;
                }
                idx[d] = 0;
                off -= strides[d] * target_shape[d];
            }
        }
        Factor::new(target_vars.to_vec(), target_shape.to_vec(), data)
    }

    /// Reorder `values` given over `perm_vars` (any order) into canonical
    /// variable order.
    pub fn from_permuted(perm_vars: &[Var], perm_shape: &[usize], values: &[f64]) -> Result<Factor> {
        let mut pairs: Vec<(Var, usize)> = perm_vars.iter().copied().zip(perm_shape.iter().copied()).collect();
        pairs.sort_by_key(|(v, _)| *v);
        let vars: Vec<Var> = pairs.iter().map(|(v, _)| *v).collect();
        let shape: Vec<usize> = pairs.iter().map(|(_, s)| *s).collect();
        if !vars.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("repeated variable".into()));
        }
        let len: usize = shape.iter().product();
        if values.len() != len {
            return Err(Error::Shape {
                expected: vec![len],
                got: vec![values.len()],
            });
        }
        // Walk the permuted layout, scattering into canonical offsets.
        let canon_strides = row_major_strides(&shape);
        let strides: Vec<usize> = perm_vars
            .iter()
            .map(|v| canon_strides[vars.binary_search(v).unwrap()])
            .collect();
        let mut data = vec![0.0; len];
        let mut idx = vec![0usize; perm_vars.len()];
        let mut off = 0usize;
        for value in values {
            data[off] = *value;
            for d in (0..perm_vars.len()).rev() {
                idx[d] += 1;
                off += strides[d];
                if idx[d] < perm_shape[d] {
                    break;
                }
                idx[d] = 0;
                off -= strides[d] * perm_shape[d];
            }
        }
        Factor::new(vars, shape, data)
    }

    /// Values re-laid-out in the order of `perm_vars` (a permutation of the
    /// factor scope).
    pub fn permuted_values(&self, perm_vars: &[Var]) -> Result<Vec<f64>> {
        if perm_vars.len() != self.vars.len() {
            return Err(Error::InvalidInput("permutation length mismatch".into()));
        }
        let perm_shape: Vec<usize> = perm_vars
            .iter()
            .map(|v| {
                self.vars
                    .binary_search(v)
                    .map(|pos| self.shape[pos])
                    .map_err(|_| Error::InvalidInput(format!("variable {v} not in scope")))
            })
            .collect::<Result<Vec<_>>>()?;
        let strides = {
            let own = row_major_strides(&self.shape);
            perm_vars
                .iter()
                .map(|v| own[self.vars.binary_search(v).unwrap()])
                .collect::<Vec<_>>()
        };
        let len = self.data.len();
        let mut out = vec![0.0; len];
        let mut idx = vec![0usize; perm_vars.len()];
        let mut off = 0usize;
        for cell in out.iter_mut() {
            *cell = self.data[off];
            for d in (0..perm_vars.len()).rev() {
                idx[d] += 1;
                off += strides[d];
                if idx[d] < perm_shape[d] {
                    break;
                }
                idx[d] = 0;
                off -= strides[d] * perm_shape[d];
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Factor {
        Factor {
            vars: self.vars.clone(),
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Reciprocal where the value exceeds `eps`, exactly zero elsewhere.
    pub fn reciprocal_on_support(&self, eps: f64) -> Factor {
        self.map(|v| if v > eps { 1.0 / v } else { 0.0 })
    }

    fn zip(&self, other: &Factor, f: impl Fn(f64, f64) -> f64) -> Result<Factor> {
        if self.vars != other.vars || self.shape != other.shape {
            return Err(Error::InvalidInput(
                "elementwise op needs identical scopes".into(),
            ));
        }
        Ok(Factor {
            vars: self.vars.clone(),
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Factor) -> Result<Factor> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Factor) -> Result<Factor> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul_elem(&self, other: &Factor) -> Result<Factor> {
        self.zip(other, |a, b| a * b)
    }

    /// Quotient with the zero-extension convention: zero wherever the
    /// denominator is zero.
    pub fn div_on_support(&self, den: &Factor) -> Result<Factor> {
        self.zip(den, |a, b| if b == 0.0 { 0.0 } else { a / b })
    }

    pub fn scale(&self, s: f64) -> Factor {
        self.map(|v| v * s)
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Largest absolute difference; scopes must match.
    pub fn max_abs_diff(&self, other: &Factor) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }
}

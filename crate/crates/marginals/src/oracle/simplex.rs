//! Dense phase-one simplex over exact rationals.
//!
//! Decides solvability of A x = b, x >= 0 (b >= 0) by minimizing the sum of
//! artificial variables, pivoting with Bland's rule (smallest eligible
//! entering column, smallest basic variable on ratio ties). Exact arithmetic
//! and the fixed pivot rule make the run fully deterministic: identical
//! inputs produce identical pivot sequences and identical outcomes.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Outcome of the feasibility run.
pub enum PhaseOneOutcome {
    /// A nonnegative solution of A x = b.
    Feasible { x: Vec<BigRational> },
    /// A separating vector: `A^T y >= 0` columnwise while `b^T y < 0`.
    Infeasible { y: Vec<BigRational> },
}

pub struct PhaseOneRun {
    pub outcome: PhaseOneOutcome,
    /// (entering column, pivot row) per iteration.
    pub pivots: Vec<(usize, usize)>,
}

/// Solve the phase-one problem for `a` (m rows, n columns) and `b` (m).
///
/// Every `b[i]` must be nonnegative; rows may be linearly dependent.
pub fn phase_one(a: &[Vec<BigRational>], b: &[BigRational]) -> PhaseOneRun {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    debug_assert!(b.iter().all(|v| !v.is_negative()));

    let zero = BigRational::zero();
    let one = BigRational::one();
    let cols = n + m; // structural then artificial
    let rhs = cols;

    // tableau rows 0..m are constraints [A | I | b]; row m is the reduced
    // cost row with the negated objective in the rhs slot
    let mut t: Vec<Vec<BigRational>> = Vec::with_capacity(m + 1);
    for i in 0..m {
        let mut row = Vec::with_capacity(cols + 1);
        row.extend(a[i].iter().cloned());
        for k in 0..m {
            row.push(if k == i { one.clone() } else { zero.clone() });
        }
        row.push(b[i].clone());
        t.push(row);
    }
    let mut cost = vec![zero.clone(); cols + 1];
    for (j, slot) in cost.iter_mut().enumerate().take(n) {
        let mut s = BigRational::zero();
        for row in t.iter().take(m) {
            s += &row[j];
        }
        *slot = -s;
    }
    let mut obj = BigRational::zero();
    for row in t.iter().take(m) {
        obj += &row[rhs];
    }
    cost[rhs] = -obj;
    t.push(cost);

    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = Vec::new();

    loop {
        // Bland: smallest column with negative reduced cost
        let entering = (0..cols).find(|&j| t[m][j].is_negative());
        let Some(j) = entering else { break };

        // ratio test; ties resolved by the smallest basic variable
        let mut pick: Option<(BigRational, usize, usize)> = None; // (ratio, basis var, row)
        for i in 0..m {
            if t[i][j].is_positive() {
                let ratio = &t[i][rhs] / &t[i][j];
                let better = match &pick {
                    None => true,
                    Some(p) => (&ratio, basis[i]) < (&p.0, p.1),
                };
                if better {
                    pick = Some((ratio, basis[i], i));
                }
            }
        }
        let Some((_, _, piv)) = pick else {
            // the phase-one objective is bounded below by zero, so an
            // unbounded direction cannot occur
            unreachable!("phase-one ratio test found no pivot row");
        };
        pivots.push((j, piv));

        let p = t[piv][j].clone();
        if !p.is_one() {
            for v in t[piv].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
        }
        let pivot_row = t[piv].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == piv || row[j].is_zero() {
                continue;
            }
            let f = row[j].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
            row[j] = BigRational::zero(); // exact by construction
        }
        basis[piv] = j;
    }

    let objective = -t[m][rhs].clone();
    let outcome = if objective.is_zero() {
        let mut x = vec![BigRational::zero(); n];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                x[bv] = t[i][rhs].clone();
            }
        }
        PhaseOneOutcome::Feasible { x }
    } else {
        // simplex multipliers off the artificial block: y_i = 1 - r_{n+i};
        // the separating vector is the negation
        let y = (0..m)
            .map(|i| &t[m][n + i] - BigRational::one())
            .collect();
        PhaseOneOutcome::Infeasible { y }
    };
    PhaseOneRun { outcome, pivots }
}

/// Exact check of a feasible point: A x = b and x >= 0.
pub fn verify_solution(a: &[Vec<BigRational>], b: &[BigRational], x: &[BigRational]) -> bool {
    if x.iter().any(|v| v.is_negative()) {
        return false;
    }
    for (row, want) in a.iter().zip(b) {
        let mut s = BigRational::zero();
        for (c, v) in row.iter().zip(x) {
            if !c.is_zero() && !v.is_zero() {
                s += c * v;
            }
        }
        if &s != want {
            return false;
        }
    }
    true
}

/// Exact check of a separating vector: every column of A^T y is
/// nonnegative while b^T y is negative.
pub fn verify_certificate(a: &[Vec<BigRational>], b: &[BigRational], y: &[BigRational]) -> bool {
    let m = a.len();
    let n = if m == 0 { 0 } else { a[0].len() };
    for j in 0..n {
        let mut s = BigRational::zero();
        for i in 0..m {
            if !a[i][j].is_zero() {
                s += &a[i][j] * &y[i];
            }
        }
        if s.is_negative() {
            return false;
        }
    }
    let mut dot = BigRational::zero();
    for (bi, yi) in b.iter().zip(y) {
        dot += bi * yi;
    }
    dot.is_negative()
}

pub fn big(i: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(i))
}

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

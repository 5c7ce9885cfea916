//! Variable assignments: one position/momentum choice per axis.
//!
//! An [`AxisAssignment`] is a vertex of the N-dimensional assignment
//! hypercube. The text form follows the usual shorthand: axis indices
//! 1..N, a prime marking momentum, e.g. `12'3` for (q1, p2, q3). Axes
//! beyond 9 are written in brackets, e.g. `[10]'`.

use std::fmt;

use crate::error::{Error, Result};

/// Hard cap on the axis count; assignments are stored as 32-bit masks.
pub const MAX_AXES: usize = 32;

/// Position or momentum for one axis.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum VarKind {
    Position,
    Momentum,
}

impl VarKind {
    pub fn conjugate(self) -> Self {
        match self {
            VarKind::Position => VarKind::Momentum,
            VarKind::Momentum => VarKind::Position,
        }
    }

    pub fn letter(self) -> char {
        match self {
            VarKind::Position => 'q',
            VarKind::Momentum => 'p',
        }
    }
}

/// One concrete phase-space variable, q_i or p_i (axis `0`-based).
///
/// The derived order (axis first, position before momentum) is the canonical
/// storage order for all tensors in this crate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var {
    pub axis: usize,
    pub kind: VarKind,
}

impl Var {
    pub fn q(axis: usize) -> Self {
        Var {
            axis,
            kind: VarKind::Position,
        }
    }

    pub fn p(axis: usize) -> Self {
        Var {
            axis,
            kind: VarKind::Momentum,
        }
    }

    pub fn conjugate(self) -> Self {
        Var {
            axis: self.axis,
            kind: self.kind.conjugate(),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.letter(), self.axis + 1)
    }
}

/// A position/momentum flag per axis; momentum flags are the set bits.
///
/// Assignments of equal dimension order by their bit pattern; that order is
/// the canonical "first found" order everywhere in the crate.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AxisAssignment {
    dim: u8,
    bits: u32,
}

impl AxisAssignment {
    pub fn new(dim: usize, bits: u32) -> Result<Self> {
        if dim == 0 || dim > MAX_AXES {
            return Err(Error::BadDimension(dim));
        }
        let mask = if dim == 32 { u32::MAX } else { (1u32 << dim) - 1 };
        if bits & !mask != 0 {
            return Err(Error::InvalidInput(format!(
                "assignment bits {bits:#x} exceed {dim} axes"
            )));
        }
        Ok(AxisAssignment {
            dim: dim as u8,
            bits,
        })
    }

    pub fn from_flags(flags: &[VarKind]) -> Result<Self> {
        let mut bits = 0u32;
        for (i, k) in flags.iter().enumerate() {
            if *k == VarKind::Momentum {
                bits |= 1 << i;
            }
        }
        Self::new(flags.len(), bits)
    }

    /// All-position assignment in `dim` axes.
    pub fn all_positions(dim: usize) -> Result<Self> {
        Self::new(dim, 0)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    /// Momentum mask; doubles as the canonical ordering key.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn kind(&self, axis: usize) -> VarKind {
        debug_assert!(axis < self.dim());
        if self.bits >> axis & 1 == 1 {
            VarKind::Momentum
        } else {
            VarKind::Position
        }
    }

    pub fn flags(&self) -> Vec<VarKind> {
        (0..self.dim()).map(|i| self.kind(i)).collect()
    }

    /// The assignment's own variables, one per axis, in axis order.
    pub fn vars(&self) -> Vec<Var> {
        (0..self.dim())
            .map(|i| Var {
                axis: i,
                kind: self.kind(i),
            })
            .collect()
    }

    /// The conjugate variables, one per axis, in axis order.
    pub fn conjugate_vars(&self) -> Vec<Var> {
        (0..self.dim())
            .map(|i| Var {
                axis: i,
                kind: self.kind(i).conjugate(),
            })
            .collect()
    }

    pub fn flip(&self, axis: usize) -> Self {
        debug_assert!(axis < self.dim());
        AxisAssignment {
            dim: self.dim,
            bits: self.bits ^ (1 << axis),
        }
    }

    /// Number of axes on which the two assignments differ.
    pub fn distance(&self, other: &Self) -> Result<usize> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok((self.bits ^ other.bits).count_ones() as usize)
    }

    /// Axes on which the two assignments differ, ascending.
    pub fn differing_axes(&self, other: &Self) -> Result<Vec<usize>> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let d = self.bits ^ other.bits;
        Ok((0..self.dim()).filter(|i| d >> i & 1 == 1).collect())
    }

    /// Parse the primed-index shorthand, e.g. `12'3` with `dim = 3`.
    ///
    /// Every axis 1..=dim must appear exactly once; a trailing `'` marks
    /// momentum. Axes above 9 are bracketed: `[10]'`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_AXES {
            return Err(Error::BadDimension(dim));
        }
        let fail = |reason: &str| Error::TypeString {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let mut seen = vec![false; dim];
        let mut bits = 0u32;
        let mut chars = text.chars().peekable();
        while let Some(c) = chars.next() {
            let axis_1based = match c {
                '1'..='9' => c as usize - '0' as usize,
                '[' => {
                    let mut digits = String::new();
                    loop {
                        match chars.next() {
                            Some(']') => break,
                            Some(d) if d.is_ascii_digit() => digits.push(d),
                            _ => return Err(fail("unterminated or non-numeric bracket")),
                        }
                    }
                    digits
                        .parse::<usize>()
                        .map_err(|_| fail("empty bracket"))?
                }
                _ => return Err(fail(&format!("unexpected character {c:?}"))),
            };
            if axis_1based == 0 || axis_1based > dim {
                return Err(fail(&format!("axis {axis_1based} out of range 1..={dim}")));
            }
            let axis = axis_1based - 1;
            if seen[axis] {
                return Err(fail(&format!("axis {axis_1based} listed twice")));
            }
            seen[axis] = true;
            if chars.peek() == Some(&'\'') {
                chars.next();
                bits |= 1 << axis;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(fail(&format!("axis {} missing", missing + 1)));
        }
        Self::new(dim, bits)
    }

    /// Canonical JSON form: `'q'`/`'p'` per axis, e.g. `"qpq"`.
    pub fn qp_string(&self) -> String {
        (0..self.dim()).map(|i| self.kind(i).letter()).collect()
    }

    pub fn from_qp_string(s: &str) -> Result<Self> {
        let mut flags = Vec::with_capacity(s.len());
        for c in s.chars() {
            flags.push(match c {
                'q' => VarKind::Position,
                'p' => VarKind::Momentum,
                _ => {
                    return Err(Error::TypeString {
                        text: s.to_string(),
                        reason: format!("expected 'q' or 'p', got {c:?}"),
                    })
                }
            });
        }
        Self::from_flags(&flags)
    }
}

impl fmt::Display for AxisAssignment {
    /// Primed-index shorthand with axes ascending.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for axis in 0..self.dim() {
            if axis + 1 <= 9 {
                write!(f, "{}", axis + 1)?;
            } else {
                write!(f, "[{}]", axis + 1)?;
            }
            if self.kind(axis) == VarKind::Momentum {
                write!(f, "'")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for AxisAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Four vertices realizing all four assignment combinations on an axis pair.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CriticalQuartet {
    /// In canonical order.
    pub vertices: [AxisAssignment; 4],
    /// The certifying axis pair, ascending, `0`-based.
    pub axes: (usize, usize),
}

impl CriticalQuartet {
    /// Check that the four vertices realize all four (i, j) combinations.
    pub fn is_valid(&self) -> bool {
        let (i, j) = self.axes;
        let mut seen = [false; 4];
        for v in &self.vertices {
            if i >= v.dim() || j >= v.dim() {
                return false;
            }
            let key = (v.bits() >> i & 1) | (v.bits() >> j & 1) << 1;
            seen[key as usize] = true;
        }
        seen.iter().all(|&s| s)
    }
}

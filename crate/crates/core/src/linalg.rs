//! Vectors and symmetric matrices of dimension 1 or 2.
//!
//! Every solve here is closed form: scalar division, Cramer's rule, or the
//! explicit 2×2 symmetric eigendecomposition.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    data: [f64; 2],
    dim: usize,
}

impl Vector {
    pub fn new1(x: f64) -> Self {
        Self { data: [x, 0.0], dim: 1 }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Self { data: [x, y], dim: 2 }
    }

    pub fn zeros(dim: usize) -> Self {
        debug_assert!(dim == 1 || dim == 2);
        Self { data: [0.0; 2], dim }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        match values {
            [x] => Ok(Self::new1(*x)),
            [x, y] => Ok(Self::new2(*x, *y)),
            _ => Err(Error::InvalidInput(format!(
                "points must have 1 or 2 coordinates, got {}",
                values.len()
            ))),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.as_slice()[i]
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm; the absolute value in one dimension.
    pub fn norm(&self) -> f64 {
        match self.dim {
            1 => self.data[0].abs(),
            _ => self.data[0].hypot(self.data[1]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        let mut out = *self;
        for v in &mut out.data[..self.dim] {
            *v = f(*v);
        }
        out
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Add for Vector {
    type Output = Vector;
    fn add(self, rhs: Vector) -> Vector {
        debug_assert_eq!(self.dim, rhs.dim);
        Vector {
            data: [self.data[0] + rhs.data[0], self.data[1] + rhs.data[1]],
            dim: self.dim,
        }
    }
}

impl Sub for Vector {
    type Output = Vector;
    fn sub(self, rhs: Vector) -> Vector {
        debug_assert_eq!(self.dim, rhs.dim);
        Vector {
            data: [self.data[0] - rhs.data[0], self.data[1] - rhs.data[1]],
            dim: self.dim,
        }
    }
}

impl Neg for Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.map(|v| -v)
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: Vector) -> Vector {
        rhs.map(|v| self * v)
    }
}

/// Symmetric matrix `[[a, b], [b, c]]`; only `a` is meaningful in 1-D.
#[derive(Clone, Copy, PartialEq)]
pub struct SymMatrix {
    a: f64,
    b: f64,
    c: f64,
    dim: usize,
}

/// Eigenpairs in ascending order of eigenvalue.
#[derive(Clone, Copy, Debug)]
pub struct Eigen {
    pub values: [f64; 2],
    pub vectors: [Vector; 2],
    pub dim: usize,
}

impl Eigen {
    pub fn min_value(&self) -> f64 {
        self.values[0]
    }

    pub fn min_vector(&self) -> Vector {
        self.vectors[0]
    }

    /// Coordinates of `v` in the eigenbasis.
    pub fn project(&self, v: &Vector) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.vectors[i].dot(v);
        }
        out
    }

    /// Inverse of [`Eigen::project`].
    pub fn combine(&self, coords: [f64; 2]) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            out = out + coords[i] * self.vectors[i];
        }
        out
    }
}

impl SymMatrix {
    pub fn new1(a: f64) -> Self {
        Self { a, b: 0.0, c: 0.0, dim: 1 }
    }

    pub fn new2(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, dim: 2 }
    }

    pub fn diag(values: &Vector) -> Self {
        match values.dim() {
            1 => Self::new1(values.get(0)),
            _ => Self::new2(values.get(0), 0.0, values.get(1)),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { a: 0.0, b: 0.0, c: 0.0, dim }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entries in row-major upper-triangular order: `[a]` or `[a, b, c]`.
    pub fn entries(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.a],
            _ => vec![self.a, self.b, self.c],
        }
    }

    pub fn from_entries(entries: &[f64]) -> Result<Self> {
        match entries {
            [a] => Ok(Self::new1(*a)),
            [a, b, c] => Ok(Self::new2(*a, *b, *c)),
            _ => Err(Error::InvalidInput(format!(
                "symmetric matrix needs 1 or 3 entries, got {}",
                entries.len()
            ))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    pub fn shifted(&self, lambda: f64) -> Self {
        let mut out = *self;
        out.a += lambda;
        if self.dim == 2 {
            out.c += lambda;
        }
        out
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.dim, v.dim());
        match self.dim {
            1 => Vector::new1(self.a * v.get(0)),
            _ => Vector::new2(
                self.a * v.get(0) + self.b * v.get(1),
                self.b * v.get(0) + self.c * v.get(1),
            ),
        }
    }

    pub fn quad_form(&self, v: &Vector) -> f64 {
        v.dot(&self.mul_vec(v))
    }

    pub fn eigen(&self) -> Eigen {
        if self.dim == 1 {
            let e = Vector::new1(1.0);
            return Eigen { values: [self.a, self.a], vectors: [e, e], dim: 1 };
        }
        let mean = 0.5 * (self.a + self.c);
        let half_diff = 0.5 * (self.a - self.c);
        let radius = half_diff.hypot(self.b);
        let values = [mean - radius, mean + radius];
        let vectors = if self.b == 0.0 {
            if self.a <= self.c {
                [Vector::new2(1.0, 0.0), Vector::new2(0.0, 1.0)]
            } else {
                [Vector::new2(0.0, 1.0), Vector::new2(1.0, 0.0)]
            }
        } else {
            // (cos t, sin t) spans the eigenspace of the larger eigenvalue.
            let t = 0.5 * (2.0 * self.b).atan2(self.a - self.c);
            let (s, c) = t.sin_cos();
            [Vector::new2(-s, c), Vector::new2(c, s)]
        };
        Eigen { values, vectors, dim: 2 }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min_value()
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        let e = self.eigen();
        e.values[0].abs().max(e.values[1].abs())
    }

    pub fn determinant(&self) -> f64 {
        match self.dim {
            1 => self.a,
            _ => self.a * self.c - self.b * self.b,
        }
    }

    /// Solves `self * x = rhs` by division (diagonal case) or Cramer's rule.
    pub fn solve(&self, rhs: &Vector) -> Option<Vector> {
        debug_assert_eq!(self.dim, rhs.dim());
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let x = match self.dim {
            1 => Vector::new1(rhs.get(0) / self.a),
            _ if self.b == 0.0 => Vector::new2(rhs.get(0) / self.a, rhs.get(1) / self.c),
            _ => Vector::new2(
                (rhs.get(0) * self.c - self.b * rhs.get(1)) / det,
                (self.a * rhs.get(1) - self.b * rhs.get(0)) / det,
            ),
        };
        x.is_finite().then_some(x)
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "[[{}]]", self.a),
            _ => write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.b, self.c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn diagonal_eigen_is_sorted() {
        let e = SymMatrix::new2(3.0, 0.0, -1.0).eigen();
        assert_eq!(e.values, [-1.0, 3.0]);
        assert_eq!(e.min_vector(), Vector::new2(0.0, 1.0));
    }

    #[test]
    fn cramer_solve() {
        let m = SymMatrix::new2(2.0, 1.0, 3.0);
        let x = m.solve(&Vector::new2(1.0, 2.0)).unwrap();
        assert_relative_eq!(x.get(0), 0.2, epsilon = 1e-15);
        assert_relative_eq!(x.get(1), 0.6, epsilon = 1e-15);
        assert!(SymMatrix::new2(1.0, 1.0, 1.0).solve(&x).is_none());
    }

    proptest! {
        #[test]
        fn eigenpairs_satisfy_definition(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64) {
            let m = SymMatrix::new2(a, b, c);
            let e = m.eigen();
            for i in 0..2 {
                let v = e.vectors[i];
                let r = m.mul_vec(&v) - e.values[i] * v;
                prop_assert!(r.norm() < 1e-12 * (1.0 + m.norm()));
                prop_assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            prop_assert!(e.values[0] <= e.values[1]);
            let back = e.combine(e.project(&Vector::new2(0.3, -0.7)));
            prop_assert!((back - Vector::new2(0.3, -0.7)).norm() < 1e-14);
        }
    }
}

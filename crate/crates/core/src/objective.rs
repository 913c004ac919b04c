use crate::error::Result;
use crate::linalg::{SymMatrix, Vector};

/// Value and first two derivatives at a point.
#[derive(Clone, Copy, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vector,
    pub hessian: SymMatrix,
}

/// A twice-differentiable objective of dimension 1 or 2.
///
/// Implementations must be pure: methods call these from several threads
/// at once when sweeps run in parallel.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> Result<f64>;

    fn evaluate(&self, x: &Vector) -> Result<Evaluation>;
}

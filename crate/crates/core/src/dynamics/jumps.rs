use nalgebra::DMatrix;

use crate::algebra::{difference_raising, total_lowering, CoupledBasis, Scheme, SparseOperator};
use crate::error::{domain, Result};

/// One dissipator channel `L = sqrt(rate) * operator`.
#[derive(Clone, Debug)]
pub struct Jump {
    pub operator: SparseOperator,
    pub rate: f64,
}

/// A set of jump operators acting on one Hilbert space.
#[derive(Clone, Debug, Default)]
pub struct JumpSet {
    jumps: Vec<Jump>,
}

impl JumpSet {
    pub fn new(jumps: Vec<Jump>) -> Result<Self> {
        if let Some(first) = jumps.first() {
            let dim = first.operator.ncols();
            for j in &jumps {
                if !(j.rate >= 0.0) || !j.rate.is_finite() {
                    return domain(format!("jump rate must be finite and nonnegative, got {}", j.rate));
                }
                if j.operator.ncols() != dim || j.operator.nrows() != dim {
                    return domain("jump operators act on different spaces");
                }
            }
        }
        Ok(JumpSet { jumps })
    }

    /// `{ sqrt(lambda_h) J^-, sqrt(lambda_o) (j_X^+ - j_Y^+) }` in `basis`,
    /// with the raising operator taken from partition `raising`.
    pub fn squeezing(basis: &CoupledBasis, lambda_h: f64, lambda_o: f64, raising: Scheme) -> Result<Self> {
        JumpSet::new(vec![
            Jump { operator: total_lowering(basis), rate: lambda_h },
            Jump { operator: difference_raising(basis, raising), rate: lambda_o },
        ])
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn dimension(&self) -> Option<usize> {
        self.jumps.first().map(|j| j.operator.ncols())
    }

    pub(crate) fn dense(&self) -> DenseJumps {
        let ops = self
            .jumps
            .iter()
            .filter(|j| j.rate > 0.0)
            .map(|j| {
                let l = j.operator.to_dense() * j.rate.sqrt();
                let ldl = l.transpose() * &l;
                (l, ldl)
            })
            .collect();
        DenseJumps { ops }
    }
}

/// Dense `L` and `L^T L` pairs with the rates folded in.
pub(crate) struct DenseJumps {
    pub ops: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

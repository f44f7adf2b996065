//! Dense master-equation integration for small systems.
//!
//! All operators in this crate are real, so density matrices that start real
//! stay real symmetric and are stored as `DMatrix<f64>`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::jumps::{DenseJumps, JumpSet};
use crate::error::{domain, Error, Result};

/// Largest product dimension accepted by [`integrate_master`].
pub const MAX_DENSE_DIMENSION: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub DMatrix<f64>);

impl DensityMatrix {
    pub fn from_populations(p: &[f64]) -> Self {
        DensityMatrix(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(p)))
    }

    /// `|psi><psi|`
    pub fn pure(psi: &[f64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi);
        DensityMatrix(&v * v.transpose())
    }

    pub fn dimension(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.diagonal().iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.0 + self.0.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.0 - self.0.transpose()).abs().max()
    }

    /// Largest off-diagonal magnitude.
    pub fn max_coherence(&self) -> f64 {
        let n = self.dimension();
        let mut max: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    max = max.max(self.0[(i, j)].abs());
                }
            }
        }
        max
    }

    /// `U rho U^T` for a real orthogonal change of basis.
    pub fn transformed(&self, u: &DMatrix<f64>) -> DensityMatrix {
        DensityMatrix(u * &self.0 * u.transpose())
    }
}

fn rhs_dense(rho: &DMatrix<f64>, jumps: &DenseJumps) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(rho.nrows(), rho.ncols());
    for (l, ldl) in &jumps.ops {
        let anti = ldl * rho + rho * ldl;
        d += l * rho * l.transpose() - anti * 0.5;
    }
    d
}

/// `d rho / dt = -1/2 sum (L^T L rho + rho L^T L - 2 L rho L^T)`.
pub fn lindblad_rhs(rho: &DensityMatrix, jumps: &JumpSet) -> Result<DMatrix<f64>> {
    if let Some(dim) = jumps.dimension() {
        if dim != rho.dimension() {
            return domain(format!("density matrix of dimension {} with jumps on dimension {dim}", rho.dimension()));
        }
    }
    Ok(rhs_dense(&rho.0, &jumps.dense()))
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Smallest eigenvalue at each checkpoint.
    pub min_eigenvalues: Vec<f64>,
    pub steps: usize,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn max_trace_drift(&self) -> f64 {
        let t0 = self.states[0].trace();
        self.states.iter().map(|s| (s.trace() - t0).abs()).fold(0.0, f64::max)
    }
}

// Dormand-Prince 5(4) tableau; the equation is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates the master equation from `t = 0` through the increasing
/// checkpoint `times`, with adaptive Dormand-Prince steps at relative and
/// absolute tolerance `tol`.
pub fn integrate_master(rho0: &DensityMatrix, jumps: &JumpSet, times: &[f64], tol: f64) -> Result<Trajectory> {
    let dim = rho0.dimension();
    if dim > MAX_DENSE_DIMENSION {
        return Err(Error::DimensionCap { dim, cap: MAX_DENSE_DIMENSION });
    }
    if let Some(d) = jumps.dimension() {
        if d != dim {
            return domain(format!("density matrix of dimension {dim} with jumps on dimension {d}"));
        }
    }
    if !(tol > 0.0) {
        return domain("tolerance must be positive");
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return domain("checkpoint times must be nonnegative and increasing");
    }
    let dense = jumps.dense();
    let stiffness: f64 = dense.ops.iter().map(|(_, ldl)| ldl.abs().max()).sum();

    let mut rho = rho0.0.clone();
    let mut t = 0.0;
    let mut h = if stiffness > 0.0 { 0.1 / stiffness } else { 1.0 };
    let mut steps = 0usize;
    let mut traj = Trajectory { times: vec![0.0], states: vec![rho0.clone()], min_eigenvalues: vec![rho0.min_eigenvalue()], steps: 0 };
    let mut k: Vec<DMatrix<f64>> = vec![DMatrix::zeros(dim, dim); 7];

    for &target in times {
        while t < target {
            let step = h.min(target - t);
            if step < 1e-14 * t.abs().max(1.0) && target - t > step {
                return Err(Error::StepUnderflow { t, step, steps });
            }
            k[0] = rhs_dense(&rho, &dense);
            for s in 1..7 {
                let mut y = rho.clone();
                for (r, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        y += &k[r] * (step * a);
                    }
                }
                k[s] = rhs_dense(&y, &dense);
            }
            let mut y5 = rho.clone();
            let mut err = DMatrix::zeros(dim, dim);
            for s in 0..7 {
                if B5[s] != 0.0 {
                    y5 += &k[s] * (step * B5[s]);
                }
                let e = B5[s] - B4[s];
                if e != 0.0 {
                    err += &k[s] * (step * e);
                }
            }
            let scale = tol * (1.0 + rho.abs().max().max(y5.abs().max()));
            let ratio = err.abs().max() / scale;
            if ratio <= 1.0 {
                t += step;
                rho = y5;
                steps += 1;
            }
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
            if !h.is_finite() || h < 1e-300 {
                return Err(Error::StepUnderflow { t, step: h, steps });
            }
        }
        if target == 0.0 {
            continue;
        }
        let state = DensityMatrix((&rho + rho.transpose()) * 0.5);
        traj.min_eigenvalues.push(state.min_eigenvalue());
        traj.states.push(state);
        traj.times.push(t);
    }
    traj.steps = steps;
    Ok(traj)
}

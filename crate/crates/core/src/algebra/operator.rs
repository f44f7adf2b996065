//! Collective ladder operators and their coordinate-list matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::CoupledBasis;
use super::system::{BlockSystem, Scheme};
use crate::error::{domain, Result};

/// Entries with magnitude at or below this are not stored.
pub const ZERO_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Raise,
    Lower,
}

impl Direction {
    fn twice_shift(self) -> i32 {
        match self {
            Direction::Raise => 2,
            Direction::Lower => -2,
        }
    }
}

/// Names the basis an operator's rows or columns are expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisRef {
    Product { dimension: usize },
    Coupled { scheme: Scheme, dimension: usize },
}

impl BasisRef {
    pub fn dimension(self) -> usize {
        match self {
            BasisRef::Product { dimension } | BasisRef::Coupled { dimension, .. } => dimension,
        }
    }

    pub fn of(basis: &CoupledBasis) -> Self {
        BasisRef::Coupled { scheme: basis.scheme(), dimension: basis.len() }
    }
}

/// Real sparse matrix in coordinate form, entries sorted by `(row, col)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseOperator {
    pub domain: BasisRef,
    pub codomain: BasisRef,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    /// Builds from unsorted triplets; duplicates are summed and small entries dropped.
    pub fn from_triplets(domain: BasisRef, codomain: BasisRef, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        entries.retain(|e| e.2.abs() > ZERO_THRESHOLD);
        SparseOperator { domain, codomain, entries }
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn nrows(&self) -> usize {
        self.codomain.dimension()
    }

    pub fn ncols(&self) -> usize {
        self.domain.dimension()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    pub fn transpose(&self) -> SparseOperator {
        let t = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        SparseOperator::from_triplets(self.codomain, self.domain, t)
    }

    pub fn scaled(&self, factor: f64) -> SparseOperator {
        let t = self.entries.iter().map(|&(r, c, v)| (r, c, v * factor)).collect();
        SparseOperator::from_triplets(self.domain, self.codomain, t)
    }

    /// `a * self + b * other`; both operators must map between the same bases.
    pub fn combine(&self, a: f64, other: &SparseOperator, b: f64) -> Result<SparseOperator> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return domain("cannot combine operators on different bases");
        }
        let t = self
            .entries
            .iter()
            .map(|&(r, c, v)| (r, c, a * v))
            .chain(other.entries.iter().map(|&(r, c, v)| (r, c, b * v)))
            .collect();
        Ok(SparseOperator::from_triplets(self.domain, self.codomain, t))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }
}

fn check_weights(system: &BlockSystem, weights: &[f64]) -> Result<()> {
    if weights.len() != system.len() {
        return domain(format!("{} weights supplied for {} blocks", weights.len(), system.len()));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return domain("weights must be finite");
    }
    Ok(())
}

/// `sum_n w_n I_n^±` on the product basis, as triplets `(to, from, value)`.
fn product_ladder_triplets(system: &BlockSystem, weights: &[f64], direction: Direction) -> Vec<(usize, usize, f64)> {
    let strides = system.strides();
    let dim = system.dimension().expect("dimension fits in usize");
    let shift = direction.twice_shift();
    let mut out = Vec::new();
    for p in 0..dim {
        let ms = system.product_projections(p);
        for (n, block) in system.blocks().iter().enumerate() {
            let w = weights[n];
            if w == 0.0 {
                continue;
            }
            let m = ms[n];
            let target = crate::HalfInt::from_twice(m.twice() + shift);
            if !block.spin.admits(target) {
                continue;
            }
            let s = block.spin.value();
            let amp = (s * (s + 1.0) - m.value() * target.value()).sqrt();
            let q = match direction {
                Direction::Raise => p + strides[n],
                Direction::Lower => p - strides[n],
            };
            out.push((q, p, w * amp));
        }
    }
    out
}

/// `sum_n w_n I_n^±` in the product basis.
pub fn product_ladder(system: &BlockSystem, weights: &[f64], direction: Direction) -> Result<SparseOperator> {
    check_weights(system, weights)?;
    let dim = system.dimension().unwrap_or(usize::MAX);
    let r = BasisRef::Product { dimension: dim };
    Ok(SparseOperator::from_triplets(r, r, product_ladder_triplets(system, weights, direction)))
}

/// Total `J_z` in the product basis.
pub fn product_jz(system: &BlockSystem) -> SparseOperator {
    let dim = system.dimension().expect("dimension fits in usize");
    let r = BasisRef::Product { dimension: dim };
    let t = (0..dim)
        .map(|p| {
            let m: f64 = system.product_projections(p).iter().map(|m| m.value()).sum();
            (p, p, m)
        })
        .collect();
    SparseOperator::from_triplets(r, r, t)
}

/// Every matrix element of `sum_n w_n I_n^±` between coupled states whose
/// projections differ by one, as `(row, col, value)`; computed one `M` block at
/// a time with no thresholding.
pub fn ladder_elements(basis: &CoupledBasis, weights: &[f64], direction: Direction) -> Result<Vec<(usize, usize, f64)>> {
    let system = basis.system();
    check_weights(system, weights)?;
    let blocks = basis.m_blocks();
    let shift = crate::HalfInt::from_twice(direction.twice_shift());
    let mut by_source: Vec<Vec<(usize, f64)>> = vec![Vec::new(); basis.product_dimension()];
    for (q, p, v) in product_ladder_triplets(system, weights, direction) {
        by_source[p].push((q, v));
    }
    let mut out = Vec::new();
    for (m, from) in &blocks {
        let Some(to) = blocks.get(&(*m + shift)) else { continue };
        if from.states.is_empty() || to.states.is_empty() {
            continue;
        }
        // image[q_local, i] = (O u_i)[q]
        let mut image = DMatrix::zeros(to.products.len(), from.states.len());
        for (p_local, &p) in from.products.iter().enumerate() {
            for &(q, v) in &by_source[p] {
                let q_local = to.local[&q];
                for c in 0..from.states.len() {
                    image[(q_local, c)] += v * from.amps[(p_local, c)];
                }
            }
        }
        let elements = to.amps.transpose() * image;
        for (c, &i) in from.states.iter().enumerate() {
            for (r, &f) in to.states.iter().enumerate() {
                out.push((f, i, elements[(r, c)]));
            }
        }
    }
    Ok(out)
}

/// Dense form of [`ladder_elements`], for small bases.
pub fn ladder_dense(basis: &CoupledBasis, weights: &[f64], direction: Direction) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(basis.len(), basis.len());
    for (r, c, v) in ladder_elements(basis, weights, direction)? {
        out[(r, c)] = v;
    }
    Ok(out)
}

/// Matrix of `sum_n w_n I_n^±` in `basis`.
///
/// With weights `+1` on A blocks and `-1` on B blocks and `Raise` this is
/// `j_A^+ - j_B^+`; with all weights `+1` and `Lower` it is `J^-`.
pub fn collective_ladder(basis: &CoupledBasis, weights: &[f64], direction: Direction) -> Result<SparseOperator> {
    let elements = ladder_elements(basis, weights, direction)?;
    Ok(SparseOperator::from_triplets(BasisRef::of(basis), BasisRef::of(basis), elements))
}

/// Total lowering operator `J^-` in `basis`.
pub fn total_lowering(basis: &CoupledBasis) -> SparseOperator {
    let w = vec![1.0; basis.system().len()];
    collective_ladder(basis, &w, Direction::Lower).expect("unit weights are valid")
}

/// `j_X^+ - j_Y^+` for the partition `scheme`, expressed in `basis`.
pub fn difference_raising(basis: &CoupledBasis, scheme: Scheme) -> SparseOperator {
    let w = scheme.difference_weights(basis.system());
    collective_ladder(basis, &w, Direction::Raise).expect("partition weights are valid")
}

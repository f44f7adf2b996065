//! Recoupling between the AB and CD coupled bases.

use std::collections::BTreeMap;

use super::basis::CoupledBasis;
use super::operator::{BasisRef, SparseOperator};
use crate::error::{domain, Result};
use crate::HalfInt;

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut k, mut acc) = (0, 0, 0.0);
    while i < a.len() && k < b.len() {
        match a[i].0.cmp(&b[k].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => k += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[k].1;
                i += 1;
                k += 1;
            }
        }
    }
    acc
}

/// Overlaps `<to_f | from_i>` as an operator from `from` to `to`.
///
/// Only pairs sharing `(J, M)` are evaluated; every other entry is a
/// structural zero.
pub fn overlap_transform(from: &CoupledBasis, to: &CoupledBasis) -> Result<SparseOperator> {
    if from.system() != to.system() {
        return domain("overlap between bases of different block systems");
    }
    let mut groups: BTreeMap<(HalfInt, HalfInt), Vec<usize>> = BTreeMap::new();
    for (f, s) in to.states().iter().enumerate() {
        groups.entry((s.j, s.m)).or_default().push(f);
    }
    let mut triplets = Vec::new();
    for (i, s) in from.states().iter().enumerate() {
        for &f in groups.get(&(s.j, s.m)).map(Vec::as_slice).unwrap_or(&[]) {
            let v = sparse_dot(&to.state(f).amplitudes, &s.amplitudes);
            triplets.push((f, i, v));
        }
    }
    Ok(SparseOperator::from_triplets(BasisRef::of(from), BasisRef::of(to), triplets))
}

/// Maps populations through squared overlaps, `p'_f = sum_i |U_fi|^2 p_i`.
pub fn map_populations(transform: &SparseOperator, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; transform.nrows()];
    for &(f, i, u) in transform.entries() {
        out[f] += u * u * p[i];
    }
    out
}

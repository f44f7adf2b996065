//! Population rate equations: generators, exact interval propagation and
//! steady states per connected component.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jumps::JumpSet;
use crate::algebra::{BasisRef, SparseOperator};
use crate::error::{domain, Error, Result};

/// Populations below this after propagation are an error, not roundoff.
pub const NEGATIVITY_FLOOR: f64 = -1e-10;

/// Diagonal populations over a coupled basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub basis: BasisRef,
    pub p: Vec<f64>,
}

impl PopulationState {
    pub fn new(basis: BasisRef, p: Vec<f64>) -> Result<Self> {
        if p.len() != basis.dimension() {
            return domain(format!("{} populations for a basis of dimension {}", p.len(), basis.dimension()));
        }
        if p.iter().any(|x| !x.is_finite() || *x < NEGATIVITY_FLOOR) {
            return domain("populations must be finite and nonnegative");
        }
        Ok(PopulationState { basis, p })
    }

    pub fn uniform(basis: BasisRef) -> Self {
        let n = basis.dimension();
        PopulationState { basis, p: vec![1.0 / n as f64; n] }
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Rate-equation generator `W`: `W[f][i]` is the rate `i -> f` and every
/// column sums to zero.
#[derive(Clone, Debug)]
pub struct Generator {
    matrix: SparseOperator,
    components: Vec<Vec<usize>>,
}

impl Generator {
    pub fn from_rates(basis: BasisRef, rates: Vec<(usize, usize, f64)>) -> Result<Self> {
        let n = basis.dimension();
        let mut diag = vec![0.0; n];
        let mut triplets = Vec::with_capacity(rates.len() + n);
        for (f, i, w) in rates {
            if f >= n || i >= n {
                return domain("rate index outside the basis");
            }
            if f == i || w == 0.0 {
                continue;
            }
            if !(w > 0.0) {
                return domain(format!("negative or invalid rate {w}"));
            }
            diag[i] -= w;
            triplets.push((f, i, w));
        }
        triplets.extend(diag.iter().enumerate().filter(|(_, d)| **d != 0.0).map(|(i, &d)| (i, i, d)));
        let matrix = SparseOperator::from_triplets(basis, basis, triplets);
        let components = connected_components(n, matrix.entries());
        Ok(Generator { matrix, components })
    }

    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.ncols()
    }

    /// Connected components of the rate graph, each sorted, ordered by first index.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    /// Largest `|sum_f W[f][i]|` over columns.
    pub fn max_column_sum(&self) -> f64 {
        let mut sums = vec![0.0; self.dimension()];
        for &(_, i, w) in self.matrix.entries() {
            sums[i] += w;
        }
        sums.iter().map(|s: &f64| s.abs()).fold(0.0, f64::max)
    }

    /// Dense restriction to the listed states.
    pub fn restricted(&self, states: &[usize]) -> DMatrix<f64> {
        let mut local = vec![usize::MAX; self.dimension()];
        for (k, &s) in states.iter().enumerate() {
            local[s] = k;
        }
        let mut w = DMatrix::zeros(states.len(), states.len());
        for &(f, i, v) in self.matrix.entries() {
            if local[f] != usize::MAX && local[i] != usize::MAX {
                w[(local[f], local[i])] = v;
            }
        }
        w
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }
}

fn connected_components(n: usize, entries: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(f, i, _) in entries {
        let (a, b) = (find(&mut parent, f), find(&mut parent, i));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let root = find(&mut parent, x);
        groups.entry(root).or_default().push(x);
    }
    groups.into_values().collect()
}

/// `W[f][i] = sum_m Lambda_m |<f|O_m|i>|^2` for the jump operators expressed in
/// the basis of the populations.
pub fn rate_matrix(jumps: &JumpSet) -> Result<Generator> {
    let Some(first) = jumps.jumps().first() else {
        return domain("empty jump set");
    };
    let basis = first.operator.domain;
    let rates = jumps
        .jumps()
        .iter()
        .flat_map(|j| j.operator.entries().iter().map(move |&(f, i, v)| (f, i, j.rate * v * v)))
        .collect();
    Generator::from_rates(basis, rates)
}

/// `exp(W t)` for a generator `W` by uniformization with scaling and squaring.
///
/// `P = I + W h / q` is column-stochastic for `q = max|W_ii| h`; the Poisson
/// series `e^{-q} sum q^k P^k / k!` uses only nonnegative terms, and the
/// result is squared back up to `t`. The output is elementwise nonnegative.
pub fn expm_generator(w: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = w.nrows();
    let q_full = (0..n).map(|i| w[(i, i)].abs()).fold(0.0, f64::max) * t;
    if q_full == 0.0 {
        return DMatrix::identity(n, n);
    }
    let mut squarings = 0u32;
    let mut q = q_full;
    while q > 1.0 {
        q /= 2.0;
        squarings += 1;
    }
    // P = I + W t / (2^s q) with the diagonal clamped at zero.
    let scale = t / (2f64.powi(squarings as i32) * q);
    let mut p = w * scale;
    for i in 0..n {
        p[(i, i)] = (1.0 + p[(i, i)]).max(0.0);
    }
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    let mut coeff = 1.0;
    for k in 1..64 {
        coeff *= q / k as f64;
        term = &p * &term;
        sum += &term * coeff;
        if coeff < 1e-18 {
            break;
        }
    }
    let mut e = sum * (-q).exp();
    normalize_columns(&mut e);
    for _ in 0..squarings {
        e = &e * &e;
        normalize_columns(&mut e);
    }
    e
}

// The exact propagator is column-stochastic; removing the rounding drift
// before each squaring keeps it from compounding.
fn normalize_columns(e: &mut DMatrix<f64>) {
    for mut col in e.column_iter_mut() {
        let s: f64 = col.sum();
        if s > 0.0 {
            col /= s;
        }
    }
}

/// Propagates populations for a time `tau`, one connected component at a time.
pub fn evolve_populations(p0: &PopulationState, generator: &Generator, tau: f64) -> Result<PopulationState> {
    if p0.p.len() != generator.dimension() {
        return domain("population vector and generator dimensions differ");
    }
    if !(tau >= 0.0) {
        return domain("evolution time must be nonnegative");
    }
    if tau == 0.0 {
        return Ok(p0.clone());
    }
    let pieces: Vec<(usize, Vec<f64>)> = generator
        .components()
        .par_iter()
        .enumerate()
        .filter(|(_, c)| c.len() > 1)
        .map(|(k, comp)| {
            let w = generator.restricted(comp);
            let e = expm_generator(&w, tau);
            let x = nalgebra::DVector::from_iterator(comp.len(), comp.iter().map(|&s| p0.p[s]));
            (k, (e * x).iter().copied().collect())
        })
        .collect();
    let mut p = p0.p.clone();
    for (k, values) in pieces {
        for (&s, v) in generator.components()[k].iter().zip(values) {
            p[s] = v;
        }
    }
    if let Some(bad) = p.iter().copied().find(|&x| x < NEGATIVITY_FLOOR) {
        return Err(Error::Numerical(format!("population {bad:.3e} below floor after propagation")));
    }
    Ok(PopulationState { basis: p0.basis, p })
}

/// Stationary distribution of a generator restricted to `states`, normalized to one.
///
/// Uses Grassmann-Taksar-Heyman elimination, which involves no subtractions;
/// falls back to an SVD null space when the elimination finds a state with
/// no path to the remaining ones.
pub fn stationary(w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = w.nrows();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // a[i][j] = rate i -> j
    let mut a = w.transpose();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if s <= 0.0 {
            return stationary_svd(w);
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                if j != i {
                    a[(i, j)] += aik * a[(k, j)];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    let z: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|x| x / z).collect())
}

fn stationary_svd(w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = w.nrows();
    let svd = w.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let scale = svd.singular_values.max().max(1.0);
    let null: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= 1e-12 * scale).collect();
    if null.len() != 1 {
        return Err(Error::Numerical(format!("stationary space of a component has dimension {}", null.len())));
    }
    let v: Vec<f64> = v_t.row(null[0]).iter().copied().collect();
    let z: f64 = v.iter().sum();
    Ok(v.into_iter().map(|x| (x / z).max(0.0)).collect())
}

/// Steady state of one connected component, carrying over the component's
/// total population from `p0`.
pub fn steady_state(p0: &PopulationState, generator: &Generator, component: &[usize]) -> Result<Vec<f64>> {
    let mass: f64 = component.iter().map(|&s| p0.p[s]).sum();
    let pi = stationary(&generator.restricted(component))?;
    Ok(pi.into_iter().map(|x| x * mass).collect())
}

/// Replaces every component's populations by its steady state.
pub fn relax_to_steady(p0: &PopulationState, generator: &Generator) -> Result<PopulationState> {
    if p0.p.len() != generator.dimension() {
        return domain("population vector and generator dimensions differ");
    }
    let pieces: Vec<Result<(usize, Vec<f64>)>> = generator
        .components()
        .par_iter()
        .enumerate()
        .filter(|(_, c)| c.len() > 1)
        .map(|(k, comp)| steady_state(p0, generator, comp).map(|v| (k, v)))
        .collect();
    let mut p = p0.p.clone();
    for piece in pieces {
        let (k, values) = piece?;
        for (&s, v) in generator.components()[k].iter().zip(values) {
            p[s] = v;
        }
    }
    Ok(PopulationState { basis: p0.basis, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product(n: usize) -> BasisRef {
        BasisRef::Product { dimension: n }
    }

    #[test]
    fn two_state_exponential() {
        let (a, b) = (2.0, 0.5);
        let g = Generator::from_rates(product(2), vec![(1, 0, a), (0, 1, b)]).unwrap();
        let p0 = PopulationState::new(product(2), vec![1.0, 0.0]).unwrap();
        for &t in &[0.0, 0.1, 1.0, 7.5] {
            let p = evolve_populations(&p0, &g, t).unwrap();
            let eq = b / (a + b);
            let expect = eq + (1.0 - eq) * (-(a + b) * t).exp();
            assert!((p.p[0] - expect).abs() < 1e-13, "t={t}");
            assert!((p.total() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stiff_chain_stays_nonnegative() {
        // birth-death chain with rates spanning six decades
        let n = 30;
        let mut rates = Vec::new();
        for i in 0..n - 1 {
            rates.push((i + 1, i, 1e-3 * (i + 1) as f64));
            rates.push((i, i + 1, 1e3 * (i + 1) as f64));
        }
        let g = Generator::from_rates(product(n), rates).unwrap();
        let p0 = PopulationState::uniform(product(n));
        let p = evolve_populations(&p0, &g, 50.0).unwrap();
        assert!(p.min() >= 0.0);
        assert!((p.total() - 1.0).abs() < 1e-12);
        let ss = relax_to_steady(&p0, &g).unwrap();
        for (x, y) in p.p.iter().zip(&ss.p) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gth_matches_detailed_balance() {
        let rates = vec![(1, 0, 3.0), (0, 1, 1.0), (2, 1, 2.0), (1, 2, 5.0)];
        let g = Generator::from_rates(product(3), rates).unwrap();
        let pi = stationary(&g.to_dense()).unwrap();
        // pi0*3 = pi1*1, pi1*2 = pi2*5
        assert!((pi[1] - 3.0 * pi[0]).abs() < 1e-14);
        assert!((pi[2] - 0.4 * pi[1]).abs() < 1e-14);
    }

    #[test]
    fn components_and_column_sums() {
        let g = Generator::from_rates(product(5), vec![(1, 0, 1.0), (3, 4, 2.0), (4, 3, 1.0)]).unwrap();
        assert_eq!(g.components(), &[vec![0, 1], vec![2], vec![3, 4]]);
        assert!(g.max_column_sum() < 1e-15);
    }

    #[test]
    fn absorbing_component_uses_null_space() {
        // 0 -> 1 only: stationary mass sits on 1
        let g = Generator::from_rates(product(2), vec![(1, 0, 1.0)]).unwrap();
        let pi = stationary(&g.to_dense()).unwrap();
        assert!(pi[0].abs() < 1e-14 && (pi[1] - 1.0).abs() < 1e-14);
        // two absorbing states fed by one transient: not unique
        let g = Generator::from_rates(product(3), vec![(1, 0, 1.0), (2, 0, 1.0)]).unwrap();
        assert!(stationary(&g.to_dense()).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Generator::from_rates(product(2), vec![(1, 0, -1.0)]).is_err());
        let g = Generator::from_rates(product(2), vec![(1, 0, 1.0)]).unwrap();
        let p0 = PopulationState::uniform(product(2));
        assert!(evolve_populations(&p0, &g, -1.0).is_err());
        assert!(PopulationState::new(product(2), vec![1.0]).is_err());
    }
}

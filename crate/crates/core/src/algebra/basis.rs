//! Coupled bases `|J, M, alpha>` built by Clebsch-Gordan coupling along a fixed tree.
//!
//! Blocks inside one intersection are chained left to right; the four
//! intersection spins are then paired according to the scheme
//! (`(AC ⊗ AD) -> j_A`, `(BC ⊗ BD) -> j_B` for AB, `(AC ⊗ BC) -> j_C`,
//! `(AD ⊗ BD) -> j_D` for CD) and finally coupled to the total `J`.
//!
//! `alpha` lists the intermediate spins of the intra-intersection chains
//! (intersections in AC, AD, BC, BD order, chains of one block contribute
//! nothing) followed by the scheme pair `(j_A, j_B)` or `(j_C, j_D)`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cg::clebsch_gordan_unchecked;
use super::system::{BlockSystem, Membership, Scheme};
use crate::error::{Error, Result};
use crate::HalfInt;

pub const DEFAULT_DIMENSION_CAP: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    #[serde(rename = "twice_j")]
    pub j: HalfInt,
    #[serde(rename = "twice_m")]
    pub m: HalfInt,
    pub alpha: Vec<HalfInt>,
    /// Sparse expansion over the product basis, sorted by product index.
    pub amplitudes: Vec<(usize, f64)>,
}

impl CoupledState {
    /// Scheme pair `(j_A, j_B)` or `(j_C, j_D)`.
    pub fn pair(&self) -> (HalfInt, HalfInt) {
        let n = self.alpha.len();
        (self.alpha[n - 2], self.alpha[n - 1])
    }
}

/// A complete orthonormal coupled basis in canonical order (J descending, M ascending, alpha).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "RawBasis")]
pub struct CoupledBasis {
    scheme: Scheme,
    system: BlockSystem,
    states: Vec<CoupledState>,
    #[serde(skip)]
    lookup: HashMap<(HalfInt, HalfInt, Vec<HalfInt>), usize>,
}

#[derive(Deserialize)]
struct RawBasis {
    scheme: Scheme,
    system: BlockSystem,
    states: Vec<CoupledState>,
}

impl From<RawBasis> for CoupledBasis {
    fn from(raw: RawBasis) -> Self {
        CoupledBasis::from_parts(raw.scheme, raw.system, raw.states)
    }
}

/// A multiplet of a partially coupled subtree: one sparse vector per projection.
#[derive(Clone)]
struct Multiplet {
    j: HalfInt,
    labels: BTreeMap<Membership, Vec<HalfInt>>,
    /// `components[k]` is the state with `m = -j + k`; indices are partial product indices.
    components: Vec<Vec<(usize, f64)>>,
}

fn couple(left: &[Multiplet], right: &[Multiplet], mut label: impl FnMut(&mut Multiplet)) -> Vec<Multiplet> {
    let mut out = Vec::new();
    for l in left {
        for r in right {
            let mut labels = l.labels.clone();
            for (k, v) in &r.labels {
                labels.entry(*k).or_default().extend(v.iter().copied());
            }
            for j in HalfInt::coupled_range(l.j, r.j) {
                let components = j
                    .projections()
                    .map(|m| {
                        let mut amps = Vec::new();
                        for (i1, m1) in l.j.projections().enumerate() {
                            let m2 = m - m1;
                            if !r.j.admits(m2) {
                                continue;
                            }
                            let c = clebsch_gordan_unchecked(l.j, m1, r.j, m2, j, m);
                            if c == 0.0 {
                                continue;
                            }
                            let i2 = ((m2.twice() + r.j.twice()) / 2) as usize;
                            for &(p1, a1) in &l.components[i1] {
                                for &(p2, a2) in &r.components[i2] {
                                    amps.push((p1 + p2, c * a1 * a2));
                                }
                            }
                        }
                        amps.sort_unstable_by_key(|e| e.0);
                        amps
                    })
                    .collect();
                let mut mult = Multiplet { j, labels: labels.clone(), components };
                label(&mut mult);
                out.push(mult);
            }
        }
    }
    out
}

fn single_block(spin: HalfInt, stride: usize) -> Multiplet {
    Multiplet {
        j: spin,
        labels: BTreeMap::new(),
        components: (0..spin.multiplicity()).map(|k| vec![(k * stride, 1.0)]).collect(),
    }
}

fn trivial() -> Multiplet {
    Multiplet { j: HalfInt::ZERO, labels: BTreeMap::new(), components: vec![vec![(0, 1.0)]] }
}

fn intersection_node(system: &BlockSystem, strides: &[usize], which: Membership) -> Vec<Multiplet> {
    let idx = system.indices_of(which);
    let mut iter = idx.iter();
    let Some(&first) = iter.next() else {
        return vec![trivial()];
    };
    let mut node = vec![single_block(system.blocks()[first].spin, strides[first])];
    for &b in iter {
        let block = vec![single_block(system.blocks()[b].spin, strides[b])];
        node = couple(&node, &block, |m| m.labels.entry(which).or_default().push(m.j));
    }
    node
}

/// Builds the coupled basis of `system` for `scheme` with the default dimension cap.
pub fn couple_chain(system: &BlockSystem, scheme: Scheme) -> Result<CoupledBasis> {
    couple_chain_capped(system, scheme, DEFAULT_DIMENSION_CAP)
}

pub fn couple_chain_capped(system: &BlockSystem, scheme: Scheme, cap: usize) -> Result<CoupledBasis> {
    let dim = system.dimension().unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let strides = system.strides();
    let nodes: HashMap<Membership, Vec<Multiplet>> = Membership::ALL
        .iter()
        .map(|&w| (w, intersection_node(system, &strides, w)))
        .collect();

    let [g1, g2] = scheme.groups();
    let first = couple(&nodes[&g1[0]], &nodes[&g1[1]], |_| {});
    let second = couple(&nodes[&g2[0]], &nodes[&g2[1]], |_| {});

    let mut states = Vec::with_capacity(dim);
    for l in &first {
        for r in &second {
            let top = couple(std::slice::from_ref(l), std::slice::from_ref(r), |_| {});
            for mult in top {
                let mut alpha: Vec<HalfInt> = Membership::ALL
                    .iter()
                    .flat_map(|w| mult.labels.get(w).into_iter().flatten().copied())
                    .collect();
                alpha.push(l.j);
                alpha.push(r.j);
                for (m, amplitudes) in mult.j.projections().zip(mult.components) {
                    states.push(CoupledState { j: mult.j, m, alpha: alpha.clone(), amplitudes });
                }
            }
        }
    }
    debug_assert_eq!(states.len(), dim);
    Ok(CoupledBasis::from_parts(scheme, system.clone(), states))
}

impl CoupledBasis {
    fn from_parts(scheme: Scheme, system: BlockSystem, mut states: Vec<CoupledState>) -> Self {
        states.sort_by(|a, b| b.j.cmp(&a.j).then(a.m.cmp(&b.m)).then_with(|| a.alpha.cmp(&b.alpha)));
        let lookup = states
            .iter()
            .enumerate()
            .map(|(i, s)| ((s.j, s.m, s.alpha.clone()), i))
            .collect();
        CoupledBasis { scheme, system, states, lookup }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn system(&self) -> &BlockSystem {
        &self.system
    }

    pub fn states(&self) -> &[CoupledState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &CoupledState {
        &self.states[i]
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn product_dimension(&self) -> usize {
        self.system.dimension().expect("dimension checked at construction")
    }

    pub fn find(&self, j: HalfInt, m: HalfInt, alpha: &[HalfInt]) -> Option<usize> {
        self.lookup.get(&(j, m, alpha.to_vec())).copied()
    }

    /// Number of multiplets for each total spin `J`.
    pub fn multiplet_counts(&self) -> BTreeMap<HalfInt, usize> {
        let mut counts = BTreeMap::new();
        for s in self.states.iter().filter(|s| s.m == s.j) {
            *counts.entry(s.j).or_insert(0) += 1;
        }
        counts
    }

    /// Distinct `alpha` labels, each naming one sector conserved by the
    /// scheme's own difference operator and by `J^-`.
    pub fn sectors(&self) -> BTreeMap<Vec<HalfInt>, Vec<usize>> {
        let mut map: BTreeMap<Vec<HalfInt>, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.states.iter().enumerate() {
            map.entry(s.alpha.clone()).or_default().push(i);
        }
        map
    }

    /// Dense `product_dim x len` matrix whose columns are the basis states.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.product_dimension(), self.len());
        for (col, s) in self.states.iter().enumerate() {
            for &(row, a) in &s.amplitudes {
                u[(row, col)] = a;
            }
        }
        u
    }

    /// Basis states grouped by `M`, each group with a dense amplitude matrix
    /// restricted to the product states of that `M`.
    pub(crate) fn m_blocks(&self) -> BTreeMap<HalfInt, MBlock> {
        let mut product_groups: BTreeMap<HalfInt, Vec<usize>> = BTreeMap::new();
        for p in 0..self.product_dimension() {
            let m = self.system.product_projections(p).into_iter().fold(HalfInt::ZERO, |a, b| a + b);
            product_groups.entry(m).or_default().push(p);
        }
        let mut state_groups: BTreeMap<HalfInt, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.states.iter().enumerate() {
            state_groups.entry(s.m).or_default().push(i);
        }
        product_groups
            .into_iter()
            .map(|(m, products)| {
                let states = state_groups.remove(&m).unwrap_or_default();
                let local: HashMap<usize, usize> = products.iter().enumerate().map(|(k, &p)| (p, k)).collect();
                let mut amps = DMatrix::zeros(products.len(), states.len());
                for (col, &i) in states.iter().enumerate() {
                    for &(p, a) in &self.states[i].amplitudes {
                        amps[(local[&p], col)] = a;
                    }
                }
                (m, MBlock { products, local, states, amps })
            })
            .collect()
    }
}

pub(crate) struct MBlock {
    pub products: Vec<usize>,
    pub local: HashMap<usize, usize>,
    pub states: Vec<usize>,
    pub amps: DMatrix<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::system::Block;

    fn h(t: i32) -> HalfInt {
        HalfInt::from_twice(t)
    }

    #[test]
    fn single_block_is_one_multiplet() {
        let sys = BlockSystem::new(vec![Block { spin: h(3), membership: Membership::BD }]).unwrap();
        let basis = couple_chain(&sys, Scheme::AB).unwrap();
        assert_eq!(basis.len(), 4);
        assert_eq!(basis.multiplet_counts(), BTreeMap::from([(h(3), 1)]));
        assert!(basis.states().iter().all(|s| s.amplitudes.len() == 1 && (s.amplitudes[0].1 - 1.0).abs() < 1e-15));
    }

    #[test]
    fn four_half_multiplicities() {
        let sys = BlockSystem::uniform_quartet(HalfInt::HALF);
        for scheme in [Scheme::AB, Scheme::CD] {
            let basis = couple_chain(&sys, scheme).unwrap();
            assert_eq!(basis.len(), 16);
            assert_eq!(basis.multiplet_counts(), BTreeMap::from([(h(0), 2), (h(2), 3), (h(4), 1)]));
        }
    }

    #[test]
    fn canonical_order() {
        let sys = BlockSystem::uniform_quartet(HalfInt::HALF);
        let basis = couple_chain(&sys, Scheme::AB).unwrap();
        for w in basis.states().windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(a.j > b.j || (a.j == b.j && (a.m < b.m || (a.m == b.m && a.alpha < b.alpha))));
        }
        assert_eq!(basis.state(0).j, h(4));
        assert_eq!(basis.state(0).m, h(-4));
    }

    #[test]
    fn fig2_pairs_span_zero_to_seven() {
        let sys = BlockSystem::uniform_quartet(h(7));
        let basis = couple_chain(&sys, Scheme::AB).unwrap();
        assert_eq!(basis.len(), 4096);
        let pairs: std::collections::BTreeSet<(i32, i32)> =
            basis.states().iter().map(|s| (s.pair().0.twice(), s.pair().1.twice())).collect();
        assert_eq!(pairs.len(), 64);
        assert_eq!(pairs.first(), Some(&(0, 0)));
        assert_eq!(pairs.last(), Some(&(14, 14)));
        assert_eq!(basis.multiplet_counts()[&h(0)], 8);
    }

    #[test]
    fn dimension_cap_enforced() {
        let sys = BlockSystem::uniform_quartet(h(7));
        assert!(matches!(couple_chain_capped(&sys, Scheme::AB, 1000), Err(Error::DimensionCap { dim: 4096, cap: 1000 })));
    }

    #[test]
    fn multi_block_intersections_carry_chain_labels() {
        use Membership::*;
        let blocks = [AC, AC, BD].iter().map(|&membership| Block { spin: h(1), membership }).collect();
        let sys = BlockSystem::new(blocks).unwrap();
        let basis = couple_chain(&sys, Scheme::AB).unwrap();
        assert_eq!(basis.len(), 8);
        // alpha = (k_AC, j_A, j_B) with j_A = k_AC
        assert!(basis.states().iter().all(|s| s.alpha.len() == 3 && s.alpha[0] == s.alpha[1]));
        assert_eq!(basis.multiplet_counts(), BTreeMap::from([(h(1), 2), (h(3), 1)]));
    }

    #[test]
    fn json_layout_round_trips() {
        let sys = BlockSystem::uniform_quartet(HalfInt::HALF);
        let basis = couple_chain(&sys, Scheme::CD).unwrap();
        let doc = serde_json::to_value(&basis).unwrap();
        assert_eq!(doc["scheme"], "CD");
        assert_eq!(doc["states"][0]["twice_j"], 4);
        let back: CoupledBasis = serde_json::from_value(doc).unwrap();
        assert_eq!(back.states(), basis.states());
        let s = &basis.states()[5];
        assert_eq!(back.find(s.j, s.m, &s.alpha), Some(5));
    }
}

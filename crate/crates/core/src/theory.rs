//! Closed-form results for population transfer between multiplets and checks
//! of them against explicit matrix elements.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::algebra::{ladder_elements, BasisRef, BlockSystem, CoupledBasis, Direction, Scheme, SparseOperator};
use crate::error::{domain, Result};
use crate::HalfInt;

/// Denominators below this are treated as vanishing when forming ratios.
pub const DENOMINATOR_FLOOR: f64 = 1e-9;

/// Default truncation of the `g` series.
pub const G_SERIES_JMAX: usize = 12;

/// `-[(J+1)(2J+1)]^{-1/2}`
pub fn ratio_reference(j: HalfInt) -> f64 {
    let j = j.value();
    -1.0 / ((j + 1.0) * (2.0 * j + 1.0)).sqrt()
}

/// `(J+1)(2J+1)`
pub fn asymmetry_factor(j: HalfInt) -> f64 {
    let j = j.value();
    (j + 1.0) * (2.0 * j + 1.0)
}

/// How coherent states of neighbouring multiplets are paired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// Same `alpha` labels in the coupling tree.
    Tree,
    /// Every `(alpha_{J+1}, alpha_J)` combination.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    #[serde(rename = "twice_j")]
    pub j: HalfInt,
    pub alpha_upper: Vec<HalfInt>,
    pub alpha_lower: Vec<HalfInt>,
    pub measured: f64,
    pub reference: f64,
}

impl RatioSample {
    pub fn deviation(&self) -> f64 {
        (self.measured - self.reference).abs()
    }
}

/// Coherent-state pairs `(|J+1,-J+1,a>, |J,-J,b>, |J+1,-J-1,a>)` as state indices.
fn coherent_pairs(basis: &CoupledBasis, j: HalfInt, pairing: Pairing) -> Vec<(usize, usize, usize)> {
    let upper_j = j + HalfInt::ONE;
    let lowers: Vec<usize> = (0..basis.len())
        .filter(|&i| {
            let s = basis.state(i);
            s.j == j && s.m == -j
        })
        .collect();
    let uppers: Vec<usize> = (0..basis.len())
        .filter(|&i| {
            let s = basis.state(i);
            s.j == upper_j && s.m == -j - HalfInt::ONE
        })
        .collect();
    let mut out = Vec::new();
    for &u in &uppers {
        let alpha_u = &basis.state(u).alpha;
        let Some(raised) = basis.find(upper_j, -j + HalfInt::ONE, alpha_u) else { continue };
        for &l in &lowers {
            if pairing == Pairing::Tree && basis.state(l).alpha != *alpha_u {
                continue;
            }
            out.push((raised, l, u));
        }
    }
    out
}

/// Measured ratio
/// `<J+1,-J+1,a|X|J,-J,b> / <J,-J,b|X|J+1,-J-1,a>*` for every pair whose
/// denominator does not vanish, next to `-[(J+1)(2J+1)]^{-1/2}`.
///
/// An empty result means no adjacent multiplets couple; it is not an error.
pub fn ratio_identity_check(basis: &CoupledBasis, op: &SparseOperator, j: HalfInt, pairing: Pairing) -> Vec<RatioSample> {
    let reference = ratio_reference(j);
    coherent_pairs(basis, j, pairing)
        .into_iter()
        .filter_map(|(raised, lower, upper)| {
            let num = op.get(raised, lower);
            let den = op.get(lower, upper);
            if den.abs() < DENOMINATOR_FLOOR {
                return None;
            }
            Some(RatioSample {
                j,
                alpha_upper: basis.state(upper).alpha.clone(),
                alpha_lower: basis.state(lower).alpha.clone(),
                measured: num / den,
                reference,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryReport {
    #[serde(rename = "twice_j")]
    pub j: HalfInt,
    /// Forward over backward squared element for each tree-paired coherent state.
    pub per_pair: Vec<f64>,
    /// Ratio of the summed squared elements.
    pub total: f64,
    pub reference: f64,
}

/// Downward (`J+1 -> J`) over upward (`J -> J+1`) squared matrix elements
/// between coherent states, expected to be `(J+1)(2J+1)`.
pub fn transfer_rate_asymmetry(basis: &CoupledBasis, op: &SparseOperator, j: HalfInt) -> AsymmetryReport {
    let mut per_pair = Vec::new();
    let (mut down_sum, mut up_sum) = (0.0, 0.0);
    for (raised, lower, upper) in coherent_pairs(basis, j, Pairing::Tree) {
        let up = op.get(raised, lower).powi(2);
        let down = op.get(lower, upper).powi(2);
        if up < DENOMINATOR_FLOOR.powi(2) {
            continue;
        }
        per_pair.push(down / up);
        down_sum += down;
        up_sum += up;
    }
    let total = if up_sum > 0.0 { down_sum / up_sum } else { f64::NAN };
    AsymmetryReport { j, per_pair, total, reference: asymmetry_factor(j) }
}

/// Largest element of `raw` (unthresholded `(row, col, value)` triplets of a
/// raising operator) from a coherent state `|J,-J>` to any state violating
/// `|J'-J| <= 1` and `M' = -J+1`.
pub fn selection_rule_scan(basis: &CoupledBasis, raw: &[(usize, usize, f64)]) -> f64 {
    raw.iter()
        .filter(|&&(f, i, _)| {
            let (sf, si) = (basis.state(f), basis.state(i));
            si.m == -si.j && ((sf.j.twice() - si.j.twice()).abs() > 2 || sf.m != -si.j + HalfInt::ONE)
        })
        .map(|e| e.2.abs())
        .fold(0.0, f64::max)
}

/// Relative steady-state weight per multiplet, `f(J) = (J+1)(2J+1) f(J+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyDistribution {
    pub f: BTreeMap<HalfInt, f64>,
    pub j_max: HalfInt,
}

impl SteadyDistribution {
    pub fn weight(&self, j: HalfInt) -> Option<f64> {
        self.f.get(&j).copied()
    }
}

/// Weights from `j_min` (normalized to one) up to `j_max` in integer steps.
pub fn steady_distribution(j_max: HalfInt, j_min: HalfInt) -> Result<SteadyDistribution> {
    if !j_min.is_nonneg() || j_max < j_min || (j_max.twice() - j_min.twice()) % 2 != 0 {
        return domain(format!("invalid ladder {j_min}..{j_max}"));
    }
    let mut f = BTreeMap::new();
    let mut j = j_min;
    let mut w = 1.0;
    loop {
        f.insert(j, w);
        if j == j_max {
            break;
        }
        w /= asymmetry_factor(j);
        j = j + HalfInt::ONE;
    }
    Ok(SteadyDistribution { f, j_max })
}

/// `g(J) = (2J+1) / prod_{i<J} (i+1)(2i+1)` for integer `J`, with partial sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GSeries {
    pub g: Vec<f64>,
    pub partial: Vec<f64>,
}

impl GSeries {
    pub fn sum(&self) -> f64 {
        *self.partial.last().expect("series has at least g(0)")
    }

    /// `sum_J J(J+1) g(J)`
    pub fn casimir_sum(&self) -> f64 {
        self.g.iter().enumerate().map(|(j, g)| (j * (j + 1)) as f64 * g).sum()
    }
}

pub fn g_series(j_max: usize) -> GSeries {
    let mut g = Vec::with_capacity(j_max + 1);
    let mut partial = Vec::with_capacity(j_max + 1);
    let mut product = 1.0;
    let mut acc = 0.0;
    for j in 0..=j_max {
        if j > 0 {
            let i = (j - 1) as f64;
            product *= (i + 1.0) * (2.0 * i + 1.0);
        }
        let term = (2 * j + 1) as f64 / product;
        acc += term;
        g.push(term);
        partial.push(acc);
    }
    GSeries { g, partial }
}

/// Lower bound on the singlet population, `[sum_J g(J)]^{-1}`.
pub fn mbs_floor() -> f64 {
    1.0 / g_series(G_SERIES_JMAX).sum()
}

/// Upper bound on `<J^2>`, `sum_J J(J+1) g(J) / sum_J g(J)`.
pub fn variance_bound() -> f64 {
    let s = g_series(G_SERIES_JMAX);
    s.casimir_sum() / s.sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipletReport {
    /// `n(J)` keyed by `J`.
    pub counts: BTreeMap<HalfInt, usize>,
    /// Whether `n(J) <= n(0)(2J+1)` for every `J`; false whenever `n(0) = 0`.
    pub bound_holds: bool,
    /// `sum_J n(J)(2J+1)`, equal to the dimension for a complete basis.
    pub states_covered: usize,
}

impl MultipletReport {
    pub fn singlets(&self) -> usize {
        self.counts.get(&HalfInt::ZERO).copied().unwrap_or(0)
    }

    /// Steady-state populations `P(J) = n(J) f(J) / sum n f`.
    pub fn predicted_populations(&self) -> BTreeMap<HalfInt, f64> {
        let (Some(&j_min), Some(&j_max)) = (self.counts.keys().next(), self.counts.keys().next_back()) else {
            return BTreeMap::new();
        };
        let f = steady_distribution(j_max, j_min).expect("counts come from one ladder");
        let z: f64 = self.counts.iter().map(|(j, &n)| n as f64 * f.f[j]).sum();
        self.counts.iter().map(|(j, &n)| (*j, n as f64 * f.f[j] / z)).collect()
    }

    pub fn predicted_singlet_population(&self) -> f64 {
        self.predicted_populations().get(&HalfInt::ZERO).copied().unwrap_or(0.0)
    }

    pub fn predicted_casimir(&self) -> f64 {
        self.predicted_populations().iter().map(|(j, p)| j.casimir() * p).sum()
    }
}

pub fn multiplet_count(basis: &CoupledBasis) -> MultipletReport {
    let counts = basis.multiplet_counts();
    let n0 = counts.get(&HalfInt::ZERO).copied().unwrap_or(0);
    let bound_holds = n0 > 0 && counts.iter().all(|(j, &n)| n <= n0 * j.multiplicity());
    let states_covered = counts.iter().map(|(j, &n)| n * j.multiplicity()).sum();
    MultipletReport { counts, bound_holds, states_covered }
}

/// Minimum `Lambda_h / Lambda_o`: the squared sum of the block spins.
pub fn rate_condition(system: &BlockSystem) -> f64 {
    system.total_block_spin().value().powi(2)
}

/// Upper bound on the number of spins unentangled with the rest, `<J^2> / s_bar`.
pub fn unentangled_bound(variance: f64, s_bar: f64) -> Result<f64> {
    if !(s_bar > 0.0) {
        return domain(format!("average spin must be positive, got {s_bar}"));
    }
    if !(variance >= 0.0) {
        return domain(format!("variance must be nonnegative, got {variance}"));
    }
    Ok(variance / s_bar)
}

/// Rates entering the low-loss condition, all in s^-1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    pub lambda_h: f64,
    pub lambda_o: f64,
    pub gamma_n: f64,
    /// Number of spins.
    pub n: usize,
    #[serde(rename = "twice_s")]
    pub s: HalfInt,
}

impl RateBudget {
    pub fn validate(&self) -> Result<()> {
        if [self.lambda_h, self.lambda_o, self.gamma_n].iter().any(|r| !(*r >= 0.0)) {
            return domain("rates must be nonnegative");
        }
        Ok(())
    }
}

/// Raising operator checked by [`identity_suite`]: per-block weights plus a label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOperator {
    pub label: String,
    pub weights: Vec<f64>,
}

impl ProbeOperator {
    /// `a1 (j_A^+ - j_B^+) + a2 (j_C^+ - j_D^+)`.
    pub fn superposition(system: &BlockSystem, a1: f64, a2: f64) -> Self {
        let ab = Scheme::AB.difference_weights(system);
        let cd = Scheme::CD.difference_weights(system);
        ProbeOperator {
            label: format!("{a1:.6}*AB{a2:+.6}*CD"),
            weights: ab.iter().zip(&cd).map(|(x, y)| a1 * x + a2 * y).collect(),
        }
    }

    pub fn partition(system: &BlockSystem, scheme: Scheme) -> Self {
        ProbeOperator { label: format!("{scheme:?}"), weights: scheme.difference_weights(system) }
    }
}

/// Worst cases of one operator in one basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub basis: Scheme,
    pub label: String,
    pub ratio_samples: usize,
    pub ratio_max_deviation: f64,
    pub selection_max: f64,
    pub asymmetry_samples: usize,
    /// Largest `|measured / (J+1)(2J+1) - 1|`.
    pub asymmetry_max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub probes: Vec<ProbeSummary>,
    pub ratio_max_deviation: f64,
    pub selection_max: f64,
    pub asymmetry_max_deviation: f64,
}

impl IdentityReport {
    pub fn ratio_samples(&self) -> usize {
        self.probes.iter().map(|p| p.ratio_samples).sum()
    }

    pub fn asymmetry_samples(&self) -> usize {
        self.probes.iter().map(|p| p.asymmetry_samples).sum()
    }
}

/// Runs the transfer-ratio identity (all alpha pairings), the selection-rule
/// scan and the transfer asymmetry for `J <= asymmetry_j_max` on every probe
/// operator, in both coupled bases.
pub fn identity_suite(bases: &[&CoupledBasis], probes: &[ProbeOperator], asymmetry_j_max: HalfInt) -> Result<IdentityReport> {
    let jobs: Vec<(&CoupledBasis, &ProbeOperator)> =
        bases.iter().flat_map(|b| probes.iter().map(move |p| (*b, p))).collect();
    let summaries: Vec<Result<ProbeSummary>> = jobs
        .par_iter()
        .map(|&(basis, probe)| {
            let raw = ladder_elements(basis, &probe.weights, Direction::Raise)?;
            let selection_max = selection_rule_scan(basis, &raw);
            let op = SparseOperator::from_triplets(BasisRef::of(basis), BasisRef::of(basis), raw);
            let js: BTreeSet<HalfInt> = basis.states().iter().map(|s| s.j).collect();
            let (mut ratio_samples, mut ratio_max_deviation) = (0, 0.0f64);
            let (mut asymmetry_samples, mut asymmetry_max_deviation) = (0, 0.0f64);
            for &j in &js {
                for s in ratio_identity_check(basis, &op, j, Pairing::All) {
                    ratio_samples += 1;
                    ratio_max_deviation = ratio_max_deviation.max(s.deviation());
                }
                if j <= asymmetry_j_max {
                    let a = transfer_rate_asymmetry(basis, &op, j);
                    for x in a.per_pair.iter().chain(std::iter::once(&a.total).filter(|t| t.is_finite())) {
                        asymmetry_samples += 1;
                        asymmetry_max_deviation = asymmetry_max_deviation.max((x / a.reference - 1.0).abs());
                    }
                }
            }
            Ok(ProbeSummary {
                basis: basis.scheme(),
                label: probe.label.clone(),
                ratio_samples,
                ratio_max_deviation,
                selection_max,
                asymmetry_samples,
                asymmetry_max_deviation,
            })
        })
        .collect();
    let probes = summaries.into_iter().collect::<Result<Vec<_>>>()?;
    let fold = |f: fn(&ProbeSummary) -> f64| probes.iter().map(f).fold(0.0, f64::max);
    Ok(IdentityReport {
        ratio_max_deviation: fold(|p| p.ratio_max_deviation),
        selection_max: fold(|p| p.selection_max),
        asymmetry_max_deviation: fold(|p| p.asymmetry_max_deviation),
        probes,
    })
}

//! Hyperfine couplings of nuclear spins under a confined electron.
//!
//! The dc coupling of site `n` is proportional to the electron density
//! `|psi(r_n)|^2`; an ac field along `mu` displaces the electron and couples
//! through the gradient `d/dmu |psi(r_n)|^2`. Sites of equal density form
//! coordination shells, and on each shell the ac couplings split into terms of
//! the form `a (j_X^+ - j_Y^+)`.

use serde::{Deserialize, Serialize};

use crate::algebra::{Block, BlockSystem, Membership};
use crate::error::{domain, Error, Result};
use crate::theory::RateBudget;
use crate::HalfInt;

/// Default relative tolerance for grouping equal couplings.
pub const SHELL_TOLERANCE: f64 = 1e-9;

/// Electron density over the plane, with its gradient.
pub trait Envelope {
    fn density(&self, r: [f64; 2]) -> f64;
    fn gradient(&self, r: [f64; 2]) -> [f64; 2];
}

/// `|psi(r)|^2 = exp(-|r - center|^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianEnvelope {
    pub center: [f64; 2],
    pub sigma: f64,
}

impl Default for GaussianEnvelope {
    fn default() -> Self {
        GaussianEnvelope { center: [0.0, 0.0], sigma: 1.0 }
    }
}

impl Envelope for GaussianEnvelope {
    fn density(&self, r: [f64; 2]) -> f64 {
        let (dx, dy) = (r[0] - self.center[0], r[1] - self.center[1]);
        (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn gradient(&self, r: [f64; 2]) -> [f64; 2] {
        let rho = self.density(r);
        let s2 = self.sigma * self.sigma;
        [-(r[0] - self.center[0]) / s2 * rho, -(r[1] - self.center[1]) / s2 * rho]
    }
}

/// Central-difference gradient, used to check analytic envelopes.
pub fn finite_difference_gradient(envelope: &dyn Envelope, r: [f64; 2], step: f64) -> [f64; 2] {
    let d = |axis: usize| {
        let (mut hi, mut lo) = (r, r);
        hi[axis] += step;
        lo[axis] -= step;
        (envelope.density(hi) - envelope.density(lo)) / (2.0 * step)
    };
    [d(0), d(1)]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Site {
    /// In units of the envelope width.
    pub position: [f64; 2],
    #[serde(rename = "twice_spin")]
    pub spin: HalfInt,
}

fn default_displacement() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeModel {
    pub sites: Vec<Site>,
    #[serde(default)]
    pub envelope: GaussianEnvelope,
    /// Hyperfine constant: the dc coupling at unit density.
    pub coupling_scale: f64,
    /// Electron displacement by the ac field, in envelope-width units.
    #[serde(default = "default_displacement")]
    pub ac_displacement: f64,
}

impl LatticeModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: LatticeModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.envelope.sigma > 0.0 && self.envelope.sigma.is_finite()) {
            return domain("envelope width must be positive");
        }
        if !self.coupling_scale.is_finite() || !self.ac_displacement.is_finite() {
            return domain("coupling scale and displacement must be finite");
        }
        for (n, site) in self.sites.iter().enumerate() {
            if !site.spin.is_nonneg() || site.spin == HalfInt::ZERO {
                return domain(format!("site {n} has spin {}", site.spin));
            }
            if !(self.envelope.density(site.position) > 0.0) {
                return domain(format!("electron density vanishes at site {n}"));
            }
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<[f64; 2]> {
        self.sites.iter().map(|s| s.position).collect()
    }
}

/// `a_n = scale |psi(r_n)|^2` for any envelope.
pub fn dc_couplings_with(envelope: &dyn Envelope, positions: &[[f64; 2]], scale: f64) -> Vec<f64> {
    positions.iter().map(|&r| scale * envelope.density(r)).collect()
}

/// `c_n = scale * d * mu . grad |psi(r_n)|^2` for any envelope; `mu` must be a unit vector.
pub fn ac_couplings_with(envelope: &dyn Envelope, positions: &[[f64; 2]], scale: f64, mu: [f64; 2]) -> Result<Vec<f64>> {
    let norm = mu[0].hypot(mu[1]);
    if (norm - 1.0).abs() > 1e-12 {
        return domain(format!("ac field direction must be a unit vector, got norm {norm}"));
    }
    Ok(positions
        .iter()
        .map(|&r| {
            let g = envelope.gradient(r);
            scale * (mu[0] * g[0] + mu[1] * g[1])
        })
        .collect())
}

pub fn dc_couplings(model: &LatticeModel) -> Vec<f64> {
    dc_couplings_with(&model.envelope, &model.positions(), model.coupling_scale)
}

pub fn ac_couplings(model: &LatticeModel, mu: [f64; 2]) -> Result<Vec<f64>> {
    let scale = model.coupling_scale * model.ac_displacement * model.envelope.sigma;
    ac_couplings_with(&model.envelope, &model.positions(), scale, mu)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    /// dc coupling of the shell's first (largest) member.
    pub coupling: f64,
    pub sites: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellPartition {
    pub shells: Vec<Shell>,
    pub tolerance: f64,
}

impl ShellPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.shells.iter().map(|s| s.sites.len()).collect()
    }
}

/// Clusters sites by dc coupling, strongest shell first.
pub fn group_shells(dc: &[f64], rel_tol: f64) -> ShellPartition {
    let mut order: Vec<usize> = (0..dc.len()).collect();
    order.sort_by(|&a, &b| dc[b].total_cmp(&dc[a]).then(a.cmp(&b)));
    let mut shells: Vec<Shell> = Vec::new();
    for n in order {
        match shells.last_mut() {
            Some(shell) if (dc[n] - shell.coupling).abs() <= rel_tol * shell.coupling.abs().max(dc[n].abs()) => {
                shell.sites.push(n)
            }
            _ => shells.push(Shell { coupling: dc[n], sites: vec![n] }),
        }
    }
    for shell in &mut shells {
        shell.sites.sort_unstable();
    }
    ShellPartition { shells, tolerance: rel_tol }
}

/// One term `a (j_X^+ - j_Y^+)`: `signs[k]` is +1 on X, -1 on Y and 0 elsewhere,
/// indexed like the shell's sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcTerm {
    pub a_tilde: f64,
    pub signs: Vec<i8>,
}

impl AcTerm {
    pub fn is_balanced(&self) -> bool {
        self.signs.iter().map(|&s| s as i32).sum::<i32>() == 0
    }

    pub fn covers_all(&self) -> bool {
        self.signs.iter().all(|&s| s != 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcDecomposition {
    pub direction: [f64; 2],
    pub sites: Vec<usize>,
    pub terms: Vec<AcTerm>,
}

impl AcDecomposition {
    /// `sum_k a_k signs_k`, indexed like `sites`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.sites.len()];
        for term in &self.terms {
            for (o, &s) in out.iter_mut().zip(&term.signs) {
                *o += term.a_tilde * s as f64;
            }
        }
        out
    }

    /// Largest reconstruction error relative to the largest coupling.
    pub fn residual(&self, c: &[f64]) -> f64 {
        let target: Vec<f64> = self.sites.iter().map(|&n| c[n]).collect();
        let scale = target.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = self.reconstruct().iter().zip(&target).fold(0.0f64, |m, (r, t)| m.max((r - t).abs()));
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }

    /// Rewrites a decomposition of at most two terms with disjoint supports
    /// covering the shell as terms whose subsets each split the whole shell
    /// in two: `a u + b v = (a+b)/2 (u+v) + (a-b)/2 (u-v)`.
    pub fn bipartition(&self) -> Option<AcDecomposition> {
        let covering = |signs: &[i8]| signs.iter().all(|&s| s != 0);
        let terms = match self.terms.as_slice() {
            [t] if covering(&t.signs) => vec![t.clone()],
            [u, v] => {
                let disjoint = u.signs.iter().zip(&v.signs).all(|(&x, &y)| x == 0 || y == 0);
                let sum: Vec<i8> = u.signs.iter().zip(&v.signs).map(|(&x, &y)| x + y).collect();
                if !disjoint || !covering(&sum) {
                    return None;
                }
                let diff = u.signs.iter().zip(&v.signs).map(|(&x, &y)| x - y).collect();
                vec![
                    AcTerm { a_tilde: (u.a_tilde + v.a_tilde) / 2.0, signs: sum },
                    AcTerm { a_tilde: (u.a_tilde - v.a_tilde) / 2.0, signs: diff },
                ]
            }
            _ => return None,
        };
        Some(AcDecomposition { direction: self.direction, sites: self.sites.clone(), terms })
    }
}

/// Splits a shell's ac couplings into magnitude classes, each with equally
/// many positive and negative members.
pub fn decompose_ac(sites: &[usize], c: &[f64], direction: [f64; 2], rel_tol: f64) -> Result<AcDecomposition> {
    if let Some(&n) = sites.iter().find(|&&n| n >= c.len()) {
        return domain(format!("site {n} has no ac coupling"));
    }
    let values: Vec<f64> = sites.iter().map(|&n| c[n]).collect();
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut terms: Vec<AcTerm> = Vec::new();
    if scale > 0.0 {
        let mut order: Vec<usize> = (0..values.len()).filter(|&k| values[k].abs() > rel_tol * scale).collect();
        order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
        let mut classes: Vec<(f64, Vec<usize>)> = Vec::new();
        for k in order {
            let m = values[k].abs();
            match classes.last_mut() {
                Some((first, members)) if (*first - m).abs() <= rel_tol * *first => members.push(k),
                _ => classes.push((m, vec![k])),
            }
        }
        for (_, members) in classes {
            let mut signs = vec![0i8; values.len()];
            for &k in &members {
                signs[k] = if values[k] > 0.0 { 1 } else { -1 };
            }
            let a_tilde = members.iter().map(|&k| values[k].abs()).sum::<f64>() / members.len() as f64;
            let term = AcTerm { a_tilde, signs };
            if !term.is_balanced() {
                let net: f64 = members.iter().map(|&k| values[k]).sum();
                return Err(Error::Decomposition {
                    reason: format!("magnitude class {a_tilde:.6e} has unequal positive and negative members"),
                    residual: net.abs() / scale,
                });
            }
            terms.push(term);
        }
    }
    Ok(AcDecomposition { direction, sites: sites.to_vec(), terms })
}

/// Assigns shell sites to the four intersections from two covering,
/// balanced terms: `first` separates A (+1) from B, `second` C from D.
pub fn memberships(first: &AcTerm, second: &AcTerm) -> Result<Vec<Membership>> {
    if first.signs.len() != second.signs.len() {
        return domain("terms index different shells");
    }
    if !(first.covers_all() && second.covers_all()) {
        return domain("both terms must act on every site of the shell");
    }
    Ok(first
        .signs
        .iter()
        .zip(&second.signs)
        .map(|(&x, &y)| match (x > 0, y > 0) {
            (true, true) => Membership::AC,
            (true, false) => Membership::AD,
            (false, true) => Membership::BC,
            (false, false) => Membership::BD,
        })
        .collect())
}

/// Block system with one block per shell site, for feeding a shell into the
/// dynamics.
pub fn shell_block_system(model: &LatticeModel, sites: &[usize], first: &AcTerm, second: &AcTerm) -> Result<BlockSystem> {
    let labels = memberships(first, second)?;
    if labels.len() != sites.len() {
        return domain("terms do not match the shell");
    }
    BlockSystem::new(
        sites.iter().zip(labels).map(|(&n, membership)| Block { spin: model.sites[n].spin, membership }).collect(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiliconShell {
    pub label: char,
    pub coupling_mhz: f64,
    pub sites: usize,
}

/// Hyperfine shells around a phosphorus donor in silicon.
pub fn silicon_shells() -> Vec<SiliconShell> {
    [('A', 6.0, 6), ('B', 4.5, 12), ('C', 3.3, 4), ('D', 2.2, 12), ('F', 1.7, 12)]
        .into_iter()
        .map(|(label, coupling_mhz, sites)| SiliconShell { label, coupling_mhz, sites })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnspParameters {
    /// dc hyperfine coupling of the shell.
    pub a: f64,
    /// Optical Rabi frequency.
    pub omega: f64,
    /// Electron Zeeman splitting.
    pub omega_e: f64,
    /// Broadening of the optical transition.
    pub gamma_t: f64,
    /// ac hyperfine coupling.
    pub a_tilde: f64,
    /// Broadening of the electron spin resonance.
    pub gamma_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DnspRates {
    pub lambda_h: f64,
    pub lambda_o: f64,
}

/// `Lambda_h = a^2 Omega^2 / (omega_e^2 gamma_t)` and `Lambda_o = a~^2 / gamma_s`,
/// in whatever common frequency unit the inputs use.
pub fn dnsp_rates(p: &DnspParameters) -> Result<DnspRates> {
    let all = [p.a, p.omega, p.omega_e, p.gamma_t, p.a_tilde, p.gamma_s];
    if all.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return domain("dnsp parameters must be positive");
    }
    Ok(DnspRates {
        lambda_h: p.a * p.a * p.omega * p.omega / (p.omega_e * p.omega_e * p.gamma_t),
        lambda_o: p.a_tilde * p.a_tilde / p.gamma_s,
    })
}

/// Default reading of "much greater than" in the low-loss condition.
pub const LOW_LOSS_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowLossReport {
    /// `Lambda_h / (4 N s^2) > Lambda_o`.
    pub lowering: Inequality,
    /// `Lambda_o >= factor * gamma_n`.
    pub decoherence: Inequality,
    pub factor: f64,
}

impl LowLossReport {
    pub fn pass(&self) -> bool {
        self.lowering.pass && self.decoherence.pass
    }
}

pub fn low_loss_check(budget: &RateBudget, factor: f64) -> Result<LowLossReport> {
    budget.validate()?;
    if budget.n == 0 || budget.s == HalfInt::ZERO {
        return domain("the budget needs at least one spin of nonzero size");
    }
    let s = budget.s.value();
    let lhs = budget.lambda_h / (4.0 * budget.n as f64 * s * s);
    let lowering = Inequality { lhs, rhs: budget.lambda_o, margin: lhs / budget.lambda_o, pass: lhs > budget.lambda_o };
    let rhs = factor * budget.gamma_n;
    let decoherence = Inequality { lhs: budget.lambda_o, rhs, margin: budget.lambda_o / rhs, pass: budget.lambda_o >= rhs };
    Ok(LowLossReport { lowering, decoherence, factor })
}

/// The twelve-site, two-shell model of an electron with a Gaussian envelope:
/// four sites at `(+-1, +-1)` and eight at `(+-1, +-3)`, `(+-3, +-1)`.
pub fn two_shell_model(spin: HalfInt) -> LatticeModel {
    let mut positions: Vec<[f64; 2]> = Vec::new();
    for &(x, y) in &[(1.0, 1.0), (1.0, 3.0), (3.0, 1.0)] {
        for &(sx, sy) in &[(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            positions.push([sx * x, sy * y]);
        }
    }
    LatticeModel {
        sites: positions.into_iter().map(|position| Site { position, spin }).collect(),
        envelope: GaussianEnvelope::default(),
        coupling_scale: 1.0,
        ac_displacement: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: [f64; 2] = [1.0, 0.0];

    #[test]
    fn symmetric_sites_share_dc_coupling() {
        let model = two_shell_model(HalfInt::HALF);
        let dc = dc_couplings(&model);
        for k in 1..4 {
            assert_eq!(dc[k], dc[0]);
        }
        let centered = dc_couplings_with(&model.envelope, &[[0.0, 0.0], [0.5, 0.0]], 2.0);
        assert_eq!(centered[0], 2.0);
        assert!(centered[1] < centered[0]);
    }

    #[test]
    fn shells_by_coupling() {
        let model = two_shell_model(HalfInt::HALF);
        let part = group_shells(&dc_couplings(&model), SHELL_TOLERANCE);
        assert_eq!(part.sizes(), vec![4, 8]);
        assert!(part.shells[0].coupling > part.shells[1].coupling);
        assert_eq!(group_shells(&[1.0; 5], SHELL_TOLERANCE).sizes(), vec![5]);
        assert_eq!(group_shells(&[1.0, 1.0 + 1e-6, 1.0 - 1e-6], SHELL_TOLERANCE).sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn inner_shell_single_term() {
        let model = two_shell_model(HalfInt::HALF);
        let c = ac_couplings(&model, X).unwrap();
        let d = decompose_ac(&[0, 1, 2, 3], &c, X, SHELL_TOLERANCE).unwrap();
        assert_eq!(d.terms.len(), 1);
        // sites ordered (1,1), (1,-1), (-1,1), (-1,-1); gradient points inward
        assert_eq!(d.terms[0].signs, vec![-1, -1, 1, 1]);
        assert!(d.residual(&c) < 1e-12);
        assert_eq!(d.bipartition().unwrap(), d);
    }

    #[test]
    fn outer_shell_two_terms() {
        let model = two_shell_model(HalfInt::HALF);
        let c = ac_couplings(&model, X).unwrap();
        let outer: Vec<usize> = (4..12).collect();
        assert!(outer.iter().map(|&n| c[n]).sum::<f64>().abs() < 1e-12);
        let d = decompose_ac(&outer, &c, X, SHELL_TOLERANCE).unwrap();
        assert_eq!(d.terms.len(), 2);
        assert!((d.terms[0].a_tilde - 3.0 * d.terms[1].a_tilde).abs() < 1e-12);
        let b = d.bipartition().unwrap();
        assert!(b.residual(&c) < 1e-12);
        assert!(b.terms.iter().all(|t| t.covers_all() && t.is_balanced()));
        let labels = memberships(&b.terms[0], &b.terms[1]).unwrap();
        for m in Membership::ALL {
            assert_eq!(labels.iter().filter(|&&l| l == m).count(), 2);
        }
    }

    #[test]
    fn orthogonal_field_gives_empty_decomposition() {
        let model = LatticeModel {
            sites: vec![Site { position: [0.0, 0.0], spin: HalfInt::HALF }],
            ..two_shell_model(HalfInt::HALF)
        };
        let c = ac_couplings(&model, X).unwrap();
        assert_eq!(c[0], 0.0);
        assert!(decompose_ac(&[0], &c, X, SHELL_TOLERANCE).unwrap().terms.is_empty());
    }

    #[test]
    fn unbalanced_class_is_reported() {
        let err = decompose_ac(&[0, 1, 2], &[1.0, 1.0, -1.0], X, SHELL_TOLERANCE).unwrap_err();
        assert!(matches!(err, Error::Decomposition { residual, .. } if (residual - 1.0).abs() < 1e-15));
    }

    #[test]
    fn direction_must_be_unit() {
        let model = two_shell_model(HalfInt::HALF);
        assert!(ac_couplings(&model, [1.0, 1.0]).is_err());
    }

    #[test]
    fn rates_from_paper_parameters() {
        let p = DnspParameters { a: 3e6, omega: 3e9, omega_e: 0.2e9, gamma_t: 0.2e9, a_tilde: 1e6, gamma_s: 0.1e9 };
        let r = dnsp_rates(&p).unwrap();
        assert!((r.lambda_h / 1e7 - 1.0).abs() < 0.05);
        assert!((r.lambda_o / 1e4 - 1.0).abs() < 0.05);
        assert!(dnsp_rates(&DnspParameters { gamma_s: 0.0, ..p }).is_err());
    }

    #[test]
    fn low_loss_budget() {
        let budget = RateBudget { lambda_h: 1e7, lambda_o: 1e4, gamma_n: 100.0, n: 4, s: HalfInt::from_twice(7) };
        let r = low_loss_check(&budget, LOW_LOSS_FACTOR).unwrap();
        assert!(r.pass());
        assert!((r.lowering.lhs - 1e7 / 196.0).abs() < 1e-6);
        assert!((r.decoherence.margin - 1.0).abs() < 1e-12);
        assert!(!low_loss_check(&RateBudget { gamma_n: 1e4, ..budget }, LOW_LOSS_FACTOR).unwrap().pass());
        assert!(!low_loss_check(&RateBudget { lambda_o: 6e4, ..budget }, LOW_LOSS_FACTOR).unwrap().lowering.pass);
    }

    #[test]
    fn model_json() {
        let text = r#"{"sites":[{"position":[1.0,1.0],"twice_spin":1}],"coupling_scale":2.5}"#;
        let model = LatticeModel::from_json(text).unwrap();
        assert_eq!(model.envelope.sigma, 1.0);
        assert!(LatticeModel::from_json(r#"{"sites":[],"coupling_scale":1,"envelope":{"center":[0,0],"sigma":0}}"#).is_err());
    }
}

//! The alternating squeezing protocol: intervals of `{J^-, j_A^+ - j_B^+}` in
//! the AB basis interleaved with `{J^-, j_C^+ - j_D^+}` in the CD basis, with
//! populations carried across switches through squared overlaps.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::jumps::{Jump, JumpSet};
use super::lindblad::{integrate_master, DensityMatrix, MAX_DENSE_DIMENSION};
use super::rates::{evolve_populations, rate_matrix, relax_to_steady, Generator, PopulationState};
use crate::algebra::{
    collective_ladder, couple_chain, difference_raising, map_populations, overlap_transform, total_lowering, BasisRef,
    BlockSystem, CoupledBasis, Direction, Scheme, SparseOperator,
};
use crate::error::{domain, Error, Result};
use crate::theory::rate_condition;
use crate::HalfInt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Integrate each interval for its duration.
    Kinetic,
    /// Replace each interval by the steady state of every sector.
    SteadyShortcut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitPopulation {
    pub twice_j: i32,
    pub twice_m: i32,
    pub alpha: Vec<HalfInt>,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// Uniform populations over every coupled state.
    CompletelyMixed,
    /// Populations on named AB-basis states; the rest are zero.
    Explicit { states: Vec<ExplicitPopulation> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Lowering rate, any frequency unit shared with `lambda_o`.
    pub lambda_h: f64,
    pub lambda_o: f64,
    /// Interval duration in units of `1/lambda_o`.
    pub tau: f64,
    pub n_intervals: usize,
    pub mode: Mode,
    pub initial: InitialState,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_o > 0.0 && self.lambda_o.is_finite()) {
            return domain("lambda_o must be positive");
        }
        if !(self.lambda_h >= 0.0 && self.lambda_h.is_finite()) {
            return domain("lambda_h must be nonnegative");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return domain("tau must be nonnegative");
        }
        Ok(())
    }

    /// `lambda_h / lambda_o`, the only rate parameter of the dimensionless problem.
    pub fn rate_ratio(&self) -> f64 {
        self.lambda_h / self.lambda_o
    }

    /// Scheme driving interval `k` (1-based): odd intervals use AB.
    pub fn scheme_of_interval(k: usize) -> Scheme {
        if k % 2 == 1 {
            Scheme::AB
        } else {
            Scheme::CD
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipletPopulation {
    pub twice_j: i32,
    /// `(2 j_A, 2 j_B)`.
    pub twice_pair: (i32, i32),
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub interval: usize,
    /// In units of `1/lambda_o`.
    pub time: f64,
    /// Basis the populations were evolved in during the interval just finished.
    pub scheme: Scheme,
    /// `P(J)` keyed by `J`.
    pub p_j: BTreeMap<HalfInt, f64>,
    /// `<J^2> = sum_J J(J+1) P(J)`.
    pub casimir: f64,
    /// `p(J, j_A, j_B)`, always in AB labels.
    pub multiplets: Vec<MultipletPopulation>,
    pub total: f64,
    pub min_population: f64,
}

impl Checkpoint {
    pub fn singlet_population(&self) -> f64 {
        self.p_j.get(&HalfInt::ZERO).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub checkpoints: Vec<Checkpoint>,
}

impl ObservableSeries {
    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("series starts with the initial checkpoint")
    }

    /// `max |p(J,j_A,j_B)|` difference between two checkpoints.
    pub fn multiplet_change(&self, a: usize, b: usize) -> f64 {
        let key = |m: &MultipletPopulation| (m.twice_j, m.twice_pair);
        let pa: BTreeMap<_, _> = self.checkpoints[a].multiplets.iter().map(|m| (key(m), m.p)).collect();
        let pb: BTreeMap<_, _> = self.checkpoints[b].multiplets.iter().map(|m| (key(m), m.p)).collect();
        pa.keys()
            .chain(pb.keys())
            .map(|k| (pa.get(k).unwrap_or(&0.0) - pb.get(k).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max)
    }
}

/// Bases, transforms and generators shared by every interval of a run.
pub struct ProtocolContext {
    pub ab: CoupledBasis,
    pub cd: CoupledBasis,
    /// AB -> CD overlaps.
    pub to_cd: SparseOperator,
    /// CD -> AB overlaps.
    pub to_ab: SparseOperator,
    pub generator_ab: Generator,
    pub generator_cd: Generator,
}

impl ProtocolContext {
    /// Rates in units of `lambda_o`.
    pub fn new(system: &BlockSystem, rate_ratio: f64) -> Result<Self> {
        let ab = couple_chain(system, Scheme::AB)?;
        let cd = couple_chain(system, Scheme::CD)?;
        let to_cd = overlap_transform(&ab, &cd)?;
        let to_ab = to_cd.transpose();
        let generator_ab = rate_matrix(&JumpSet::squeezing(&ab, rate_ratio, 1.0, Scheme::AB)?)?;
        let generator_cd = rate_matrix(&JumpSet::squeezing(&cd, rate_ratio, 1.0, Scheme::CD)?)?;
        Ok(ProtocolContext { ab, cd, to_cd, to_ab, generator_ab, generator_cd })
    }

    pub fn basis(&self, scheme: Scheme) -> &CoupledBasis {
        match scheme {
            Scheme::AB => &self.ab,
            Scheme::CD => &self.cd,
        }
    }

    pub fn generator(&self, scheme: Scheme) -> &Generator {
        match scheme {
            Scheme::AB => &self.generator_ab,
            Scheme::CD => &self.generator_cd,
        }
    }

    /// Populations carried into `scheme` from whichever basis they are in.
    pub fn into_scheme(&self, p: &PopulationState, scheme: Scheme) -> PopulationState {
        let target = BasisRef::of(self.basis(scheme));
        if p.basis == target {
            return p.clone();
        }
        let transform = match scheme {
            Scheme::AB => &self.to_ab,
            Scheme::CD => &self.to_cd,
        };
        PopulationState { basis: target, p: map_populations(transform, &p.p) }
    }

    pub fn initial_state(&self, initial: &InitialState) -> Result<PopulationState> {
        let basis = BasisRef::of(&self.ab);
        match initial {
            InitialState::CompletelyMixed => Ok(PopulationState::uniform(basis)),
            InitialState::Explicit { states } => {
                let mut p = vec![0.0; self.ab.len()];
                for s in states {
                    let j = HalfInt::from_twice(s.twice_j);
                    let m = HalfInt::from_twice(s.twice_m);
                    let Some(i) = self.ab.find(j, m, &s.alpha) else {
                        return domain(format!("no AB state with J={j}, M={m}, alpha={:?}", s.alpha));
                    };
                    p[i] += s.p;
                }
                let total: f64 = p.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return domain(format!("initial populations sum to {total}"));
                }
                PopulationState::new(basis, p)
            }
        }
    }

    pub fn checkpoint(&self, interval: usize, time: f64, scheme: Scheme, p: &PopulationState) -> Checkpoint {
        let basis = self.basis(scheme);
        let mut p_j: BTreeMap<HalfInt, f64> = BTreeMap::new();
        for (s, &x) in basis.states().iter().zip(&p.p) {
            *p_j.entry(s.j).or_insert(0.0) += x;
        }
        let casimir = p_j.iter().map(|(j, x)| j.casimir() * x).sum();
        let in_ab = self.into_scheme(p, Scheme::AB);
        let mut mult: BTreeMap<(i32, (i32, i32)), f64> = BTreeMap::new();
        for (s, &x) in self.ab.states().iter().zip(&in_ab.p) {
            let (a, b) = s.pair();
            *mult.entry((s.j.twice(), (a.twice(), b.twice()))).or_insert(0.0) += x;
        }
        let multiplets = mult
            .into_iter()
            .map(|((twice_j, twice_pair), p)| MultipletPopulation { twice_j, twice_pair, p })
            .collect();
        Checkpoint { interval, time, scheme, p_j, casimir, multiplets, total: p.total(), min_population: p.min() }
    }
}

#[derive(Clone, Debug)]
pub struct ProtocolRun {
    pub series: ObservableSeries,
    pub final_state: PopulationState,
    pub warnings: Vec<String>,
}

/// Runs the alternating protocol, recording observables at `t = 0` and after every interval.
pub fn protocol_run(system: &BlockSystem, config: &ProtocolConfig) -> Result<ProtocolRun> {
    config.validate()?;
    let ctx = ProtocolContext::new(system, config.rate_ratio())?;
    run_with_context(&ctx, system, config)
}

pub fn run_with_context(ctx: &ProtocolContext, system: &BlockSystem, config: &ProtocolConfig) -> Result<ProtocolRun> {
    config.validate()?;
    let mut warnings = Vec::new();
    let needed = rate_condition(system);
    if config.rate_ratio() <= needed {
        warnings.push(format!(
            "lambda_h/lambda_o = {} does not exceed the required {} for this system",
            config.rate_ratio(),
            needed
        ));
    }
    let mut p = ctx.initial_state(&config.initial)?;
    let mut checkpoints = vec![ctx.checkpoint(0, 0.0, Scheme::AB, &p)];
    for k in 1..=config.n_intervals {
        let scheme = ProtocolConfig::scheme_of_interval(k);
        let entering = ctx.into_scheme(&p, scheme);
        p = match config.mode {
            Mode::Kinetic => evolve_populations(&entering, ctx.generator(scheme), config.tau)?,
            Mode::SteadyShortcut => relax_to_steady(&entering, ctx.generator(scheme))?,
        };
        checkpoints.push(ctx.checkpoint(k, k as f64 * config.tau, scheme, &p));
    }
    Ok(ProtocolRun { series: ObservableSeries { checkpoints }, final_state: p, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditBoundary {
    pub interval: usize,
    /// Largest off-diagonal element of the full density matrix in the
    /// coupled basis of the interval just finished.
    pub max_coherence: f64,
    /// `max_J |P_full(J) - P_diagonal(J)|`.
    pub p_j_deviation: f64,
    pub trace_drift: f64,
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub boundaries: Vec<AuditBoundary>,
}

impl AuditReport {
    pub fn max_deviation(&self) -> f64 {
        self.boundaries.iter().map(|b| b.p_j_deviation).fold(0.0, f64::max)
    }

    pub fn max_coherence(&self) -> f64 {
        self.boundaries.iter().map(|b| b.max_coherence).fold(0.0, f64::max)
    }
}

/// Runs the protocol once with full master-equation integration and once in
/// the diagonal approximation (kinetic mode) and compares them at every
/// interval boundary.
pub fn coherence_audit(system: &BlockSystem, config: &ProtocolConfig) -> Result<AuditReport> {
    config.validate()?;
    let dim = system.dimension().unwrap_or(usize::MAX);
    if dim > MAX_DENSE_DIMENSION {
        return Err(Error::DimensionCap { dim, cap: MAX_DENSE_DIMENSION });
    }
    let ctx = ProtocolContext::new(system, config.rate_ratio())?;
    let diagonal = run_with_context(&ctx, system, &ProtocolConfig { mode: Mode::Kinetic, ..config.clone() })?;

    // Full dynamics expressed in the AB basis throughout.
    let ab = &ctx.ab;
    let lowering = total_lowering(ab);
    let raise_ab = difference_raising(ab, Scheme::AB);
    let raise_cd = collective_ladder(ab, &Scheme::CD.difference_weights(system), Direction::Raise)?;
    let jumps_for = |scheme: Scheme| -> Result<JumpSet> {
        let raise = match scheme {
            Scheme::AB => raise_ab.clone(),
            Scheme::CD => raise_cd.clone(),
        };
        JumpSet::new(vec![
            Jump { operator: lowering.clone(), rate: config.rate_ratio() },
            Jump { operator: raise, rate: 1.0 },
        ])
    };
    let u_cd: DMatrix<f64> = ctx.to_cd.to_dense();

    let mut rho = DensityMatrix::from_populations(&ctx.initial_state(&config.initial)?.p);
    let trace0 = rho.trace();
    let mut boundaries = Vec::new();
    for k in 1..=config.n_intervals {
        let scheme = ProtocolConfig::scheme_of_interval(k);
        let traj = integrate_master(&rho, &jumps_for(scheme)?, &[config.tau], 1e-10)?;
        rho = traj.last().clone();
        let native = match scheme {
            Scheme::AB => rho.clone(),
            Scheme::CD => rho.transformed(&u_cd),
        };
        let pops = PopulationState { basis: BasisRef::of(ab), p: rho.populations() };
        let full = ctx.checkpoint(k, k as f64 * config.tau, Scheme::AB, &pops);
        let diag = &diagonal.series.checkpoints[k];
        let p_j_deviation = full
            .p_j
            .iter()
            .map(|(j, x)| (x - diag.p_j.get(j).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        boundaries.push(AuditBoundary {
            interval: k,
            max_coherence: native.max_coherence(),
            p_j_deviation,
            trace_drift: (rho.trace() - trace0).abs(),
            min_eigenvalue: *traj.min_eigenvalues.last().expect("checkpoint recorded"),
        });
    }
    Ok(AuditReport { boundaries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Block, Membership};

    fn four_half() -> BlockSystem {
        BlockSystem::uniform_quartet(HalfInt::HALF)
    }

    fn config(mode: Mode, n: usize) -> ProtocolConfig {
        ProtocolConfig { lambda_h: 1000.0, lambda_o: 1.0, tau: 2.0, n_intervals: n, mode, initial: InitialState::CompletelyMixed }
    }

    #[test]
    fn zero_intervals_is_initial_state() {
        let run = protocol_run(&four_half(), &config(Mode::Kinetic, 0)).unwrap();
        assert_eq!(run.series.checkpoints.len(), 1);
        let c = run.series.last();
        // completely mixed: P(J) = n(J)(2J+1)/16
        assert!((c.singlet_population() - 2.0 / 16.0).abs() < 1e-15);
        assert!((c.p_j[&HalfInt::ONE] - 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn alternates_schemes_and_conserves() {
        let run = protocol_run(&four_half(), &config(Mode::Kinetic, 4)).unwrap();
        let schemes: Vec<Scheme> = run.series.checkpoints.iter().map(|c| c.scheme).collect();
        assert_eq!(schemes, vec![Scheme::AB, Scheme::AB, Scheme::CD, Scheme::AB, Scheme::CD]);
        for c in &run.series.checkpoints {
            assert!((c.total - 1.0).abs() < 1e-9);
            assert!(c.min_population >= -1e-10);
            let sum: f64 = c.p_j.values().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            let cas: f64 = c.p_j.iter().map(|(j, p)| j.casimir() * p).sum();
            assert!((cas - c.casimir).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_initial_state_validated() {
        let z = HalfInt::ZERO;
        let mut cfg = config(Mode::SteadyShortcut, 1);
        cfg.initial = InitialState::Explicit {
            states: vec![ExplicitPopulation { twice_j: 0, twice_m: 0, alpha: vec![z, z], p: 0.5 }],
        };
        assert!(protocol_run(&four_half(), &cfg).is_err());
        cfg.initial = InitialState::Explicit {
            states: vec![ExplicitPopulation { twice_j: 2, twice_m: 0, alpha: vec![z, z], p: 1.0 }],
        };
        assert!(protocol_run(&four_half(), &cfg).is_err());
    }

    #[test]
    fn weak_lowering_warns() {
        let mut cfg = config(Mode::SteadyShortcut, 1);
        cfg.lambda_h = 2.0;
        let run = protocol_run(&four_half(), &cfg).unwrap();
        assert_eq!(run.warnings.len(), 1);
    }

    #[test]
    fn audit_rejects_large_systems() {
        let sys = BlockSystem::new(vec![
            Block { spin: HalfInt::from_twice(3), membership: Membership::AC },
            Block { spin: HalfInt::from_twice(3), membership: Membership::AD },
            Block { spin: HalfInt::from_twice(3), membership: Membership::BC },
            Block { spin: HalfInt::ONE, membership: Membership::BD },
        ])
        .unwrap();
        assert!(matches!(coherence_audit(&sys, &config(Mode::Kinetic, 1)), Err(Error::DimensionCap { .. })));
    }

    #[test]
    fn zero_duration_audit_has_no_deviation() {
        let mut cfg = config(Mode::Kinetic, 1);
        cfg.tau = 0.0;
        let report = coherence_audit(&four_half(), &cfg).unwrap();
        assert_eq!(report.max_deviation(), 0.0);
        assert_eq!(report.max_coherence(), 0.0);
    }
}

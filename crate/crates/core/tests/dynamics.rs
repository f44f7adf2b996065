use mbs::algebra::{couple_chain, BasisRef, Block, BlockSystem, Membership, Scheme};
use mbs::dynamics::{
    evolve_populations, integrate_master, protocol_run, rate_matrix, relax_to_steady, stationary, DensityMatrix,
    ExplicitPopulation, InitialState, Jump, JumpSet, Mode, PopulationState, ProtocolConfig,
};
use mbs::HalfInt;
use nalgebra::{DMatrix, DVector};

fn h(t: i32) -> HalfInt {
    HalfInt::from_twice(t)
}

fn two_half() -> BlockSystem {
    BlockSystem::new(vec![
        Block { spin: h(1), membership: Membership::AC },
        Block { spin: h(1), membership: Membership::BD },
    ])
    .unwrap()
}

fn singlet_population(basis: &mbs::algebra::CoupledBasis, p: &[f64]) -> f64 {
    basis.states().iter().zip(p).filter(|(s, _)| s.j == HalfInt::ZERO).map(|(_, x)| x).sum()
}

#[test]
fn two_spins_balance_singlet_and_triplet() {
    // |0,0> and |1,-1> exchange population at equal rates 2 Lambda_o; lowering
    // empties the rest of the triplet, so P(J=0) -> 1/2.
    let basis = couple_chain(&two_half(), Scheme::AB).unwrap();
    let jumps = JumpSet::squeezing(&basis, 1e3, 1.0, Scheme::AB).unwrap();
    let rho0 = DensityMatrix::from_populations(&[0.25; 4]);
    let traj = integrate_master(&rho0, &jumps, &[5.0], 1e-10).unwrap();
    let full = singlet_population(&basis, &traj.last().populations());
    assert!((full - 0.5).abs() < 1e-3, "{full}");

    let g = rate_matrix(&jumps).unwrap();
    let p0 = PopulationState::uniform(BasisRef::of(&basis));
    let kinetic = evolve_populations(&p0, &g, 5.0).unwrap();
    let steady = relax_to_steady(&p0, &g).unwrap();
    assert!((singlet_population(&basis, &kinetic.p) - full).abs() < 1e-6);
    assert!((singlet_population(&basis, &steady.p) - 0.5).abs() < 1e-3);
}

#[test]
fn raising_rate_into_singlet() {
    let basis = couple_chain(&two_half(), Scheme::AB).unwrap();
    let lambda_o = 0.37;
    let g = rate_matrix(&JumpSet::squeezing(&basis, 5.0, lambda_o, Scheme::AB).unwrap()).unwrap();
    let from = basis.find(h(2), h(-2), &[h(1), h(1)]).unwrap();
    let to = basis.find(h(0), h(0), &[h(1), h(1)]).unwrap();
    assert!((g.matrix().get(to, from) - 2.0 * lambda_o).abs() < 1e-14);
}

#[test]
fn generator_columns_sum_to_zero() {
    for spin in [1, 3] {
        let basis = couple_chain(&BlockSystem::uniform_quartet(h(spin)), Scheme::CD).unwrap();
        let g = rate_matrix(&JumpSet::squeezing(&basis, 250.0, 1.0, Scheme::CD).unwrap()).unwrap();
        assert!(g.max_column_sum() < 1e-12);
    }
}

#[test]
fn propagator_matches_dense_exponential() {
    let basis = couple_chain(&BlockSystem::uniform_quartet(h(2)), Scheme::AB).unwrap();
    let g = rate_matrix(&JumpSet::squeezing(&basis, 40.0, 1.0, Scheme::AB).unwrap()).unwrap();
    let w = g.to_dense();
    let p0: Vec<f64> = (0..basis.len()).map(|k| (1 + k % 7) as f64).collect();
    let z: f64 = p0.iter().sum();
    let p0 = PopulationState::new(BasisRef::of(&basis), p0.iter().map(|x| x / z).collect()).unwrap();
    for &t in &[0.0, 0.05, 0.7, 3.0] {
        let expect = (&w * t).exp() * DVector::from_column_slice(&p0.p);
        let got = evolve_populations(&p0, &g, t).unwrap();
        for (a, b) in got.p.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-10, "t={t}");
        }
        assert!(got.min() >= 0.0);
        assert!((got.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn stationary_vector_is_null_vector() {
    let basis = couple_chain(&BlockSystem::uniform_quartet(h(3)), Scheme::AB).unwrap();
    let g = rate_matrix(&JumpSet::squeezing(&basis, 1e3, 1.0, Scheme::AB).unwrap()).unwrap();
    for comp in g.components().iter().filter(|c| c.len() > 1) {
        let w = g.restricted(comp);
        let pi = stationary(&w).unwrap();
        let residual = &w * DVector::from_column_slice(&pi);
        let scale = w.abs().max();
        assert!(residual.amax() < 1e-12 * scale);
        assert!(pi.iter().all(|&x| x >= 0.0));
        // null space from an SVD, independent of the elimination
        let svd = w.clone().svd(false, true);
        let k = svd.singular_values.imin();
        let v: Vec<f64> = svd.v_t.unwrap().row(k).iter().copied().collect();
        let s: f64 = v.iter().sum();
        for (a, b) in pi.iter().zip(&v) {
            assert!((a - b / s).abs() < 1e-9);
        }
    }
}

#[test]
fn lowering_only_cascades_to_bottom() {
    let basis = couple_chain(&BlockSystem::uniform_quartet(h(1)), Scheme::AB).unwrap();
    let lowering = JumpSet::squeezing(&basis, 1.0, 0.0, Scheme::AB).unwrap();
    let g = rate_matrix(&lowering).unwrap();
    let p = relax_to_steady(&PopulationState::uniform(BasisRef::of(&basis)), &g).unwrap();
    for (s, x) in basis.states().iter().zip(&p.p) {
        if s.m != -s.j {
            assert!(x.abs() < 1e-14);
        }
    }
    // coherences stay zero for a diagonal start
    let only = JumpSet::new(vec![lowering.jumps()[0].clone()]).unwrap();
    let traj = integrate_master(&DensityMatrix::from_populations(&[1.0 / 16.0; 16]), &only, &[0.5, 2.0], 1e-10).unwrap();
    for s in &traj.states {
        assert!(s.max_coherence() <= 1e-10);
    }
}

#[test]
fn master_equation_conserves_trace_and_positivity() {
    let system = BlockSystem::uniform_quartet(h(1));
    let basis = couple_chain(&system, Scheme::AB).unwrap();
    let cd_in_ab =
        mbs::algebra::collective_ladder(&basis, &Scheme::CD.difference_weights(&system), mbs::algebra::Direction::Raise)
            .unwrap();
    let mut jumps = JumpSet::squeezing(&basis, 30.0, 1.0, Scheme::AB).unwrap().jumps().to_vec();
    jumps.push(Jump { operator: cd_in_ab, rate: 0.5 });
    let jumps = JumpSet::new(jumps).unwrap();
    let psi: Vec<f64> = (0..16).map(|k| ((k * 5 % 7) as f64 - 3.0) / 10.0).collect();
    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let psi: Vec<f64> = psi.iter().map(|x| x / norm).collect();
    let rho0 = DensityMatrix(DensityMatrix::pure(&psi).0 * 0.5 + DMatrix::identity(16, 16) / 32.0);
    let times: Vec<f64> = (1..=10).map(|k| k as f64 * 0.3).collect();
    let traj = integrate_master(&rho0, &jumps, &times, 1e-9).unwrap();
    assert!(traj.max_trace_drift() < 1e-9);
    assert!(traj.min_eigenvalues.iter().all(|&e| e >= -1e-8));
    assert!(traj.states.iter().all(|s| s.asymmetry() < 1e-12));
}

#[test]
fn steady_singlet_population_from_recursion() {
    // n = (2, 3, 1), f = (1, 1, 1/6): P(J=0) = 2 / (2 + 3 + 1/6)
    let z = HalfInt::ZERO;
    let config = ProtocolConfig {
        lambda_h: 1e9,
        lambda_o: 1.0,
        tau: 1.0,
        n_intervals: 80,
        mode: Mode::SteadyShortcut,
        initial: InitialState::Explicit {
            states: vec![ExplicitPopulation { twice_j: 0, twice_m: 0, alpha: vec![z, z], p: 1.0 }],
        },
    };
    let run = protocol_run(&BlockSystem::uniform_quartet(h(1)), &config).unwrap();
    let p0 = run.series.last().singlet_population();
    assert!((p0 - 2.0 / (5.0 + 1.0 / 6.0)).abs() < 1e-6, "{p0}");
}

#[test]
fn kinetic_and_shortcut_agree_when_intervals_are_long() {
    let system = BlockSystem::uniform_quartet(h(3));
    let mut config = ProtocolConfig {
        lambda_h: 500.0,
        lambda_o: 1.0,
        tau: 40.0,
        n_intervals: 3,
        mode: Mode::Kinetic,
        initial: InitialState::CompletelyMixed,
    };
    let kinetic = protocol_run(&system, &config).unwrap();
    config.mode = Mode::SteadyShortcut;
    let shortcut = protocol_run(&system, &config).unwrap();
    for (a, b) in kinetic.series.checkpoints.iter().zip(&shortcut.series.checkpoints) {
        for (j, p) in &a.p_j {
            assert!((p - b.p_j[j]).abs() < 1e-8);
        }
    }
}

#[test]
fn protocol_series_invariants() {
    let run = protocol_run(
        &BlockSystem::uniform_quartet(h(3)),
        &ProtocolConfig {
            lambda_h: 100.0,
            lambda_o: 1.0,
            tau: 2.0,
            n_intervals: 6,
            mode: Mode::Kinetic,
            initial: InitialState::CompletelyMixed,
        },
    )
    .unwrap();
    for (k, c) in run.series.checkpoints.iter().enumerate() {
        assert_eq!(c.interval, k);
        assert!((c.time - 2.0 * k as f64).abs() < 1e-12);
        assert!((c.p_j.values().sum::<f64>() - 1.0).abs() < 1e-9);
        let cas: f64 = c.p_j.iter().map(|(j, p)| j.value() * (j.value() + 1.0) * p).sum();
        assert!((cas - c.casimir).abs() < 1e-12);
        let from_multiplets: f64 = c.multiplets.iter().map(|m| m.p).sum();
        assert!((from_multiplets - 1.0).abs() < 1e-9);
        assert!(c.min_population >= -1e-10);
    }
    // the singlet population grows from its completely mixed value
    assert!(run.series.last().singlet_population() > run.series.checkpoints[0].singlet_population());
}

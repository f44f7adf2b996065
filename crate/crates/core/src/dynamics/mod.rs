//! Dissipative evolution: dense master equation for small systems, population
//! rate equations and sector steady states for large ones, and the
//! alternating squeezing protocol built on them.

pub mod jumps;
pub mod lindblad;
pub mod protocol;
pub mod rates;

pub use jumps::{Jump, JumpSet};
pub use lindblad::{integrate_master, lindblad_rhs, DensityMatrix, Trajectory, MAX_DENSE_DIMENSION};
pub use protocol::{
    coherence_audit, protocol_run, run_with_context, AuditBoundary, AuditReport, Checkpoint, ExplicitPopulation,
    InitialState, Mode, MultipletPopulation, ObservableSeries, ProtocolConfig, ProtocolContext, ProtocolRun,
};
pub use rates::{
    evolve_populations, expm_generator, rate_matrix, relax_to_steady, stationary, steady_state, Generator,
    PopulationState, NEGATIVITY_FLOOR,
};

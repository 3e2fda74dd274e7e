//! Simulation of quantum-jump-based feedback control on two coupled qubits.
//!
//! Qubit 2 decays into a monitored channel; every detected photon triggers an
//! instantaneous unitary `exp(i A·σ)` on qubit 2. The crate integrates the
//! resulting Markovian feedback master equation, unravels it into quantum-jump
//! trajectories, and measures coherence, Bloch vector and concurrence.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod parallel;
pub mod trajectories;

pub use error::{Error, Result};
pub use integrator::{evolve, evolve_master, rk4_step, IntegrationConfig, TimeSeries};
pub use linalg::{CMatrix, C64};
pub use model::{
    build_hamiltonian, feedback_rhs, lindblad_rhs, rotation_to_amplitudes, DensityMatrix, FeedbackVector,
    MasterEquation, RotationForm, SystemParams,
};
pub use observables::{concurrence, ObservableRecord};
pub use parallel::Execution;
pub use trajectories::{run_ensemble, EnsembleConfig, EnsembleResult, PureState4};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

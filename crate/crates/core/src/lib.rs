//! Finite-volume drift-diffusion solver with classical and generalized
//! Scharfetter-Gummel fluxes.
//!
//! The pipeline is: build a [`Mesh`], discretize a [`ProblemSpec`] into a
//! [`Problem`], compute the thermal equilibrium with [`solve_equilibrium`],
//! then march in time with [`run`] while [`DiagnosticsRecord`]s track the
//! relative entropy and its production.

pub mod constitutive;
pub mod diagnostics;
pub mod equilibrium;
pub mod flux;
pub mod mesh;
pub mod problem;
pub mod sparse;
pub mod transient;
pub mod vtk;

pub use constitutive::PressureLaw;
pub use diagnostics::{check_entropy_chain, fit_decay_rate, DecayFit, DiagnosticsRecord, EntropyChainReport};
pub use equilibrium::{solve_equilibrium, EquilibriumError, EquilibriumState};
pub use mesh::{DiscreteFunction, Mesh, MeshError, Point};
pub use problem::{
    pn_junction_preset, DopingProfile, HypothesisError, PnCase, Problem, ProblemSpec, RecombinationModel, State,
};
pub use sparse::{check_m_matrix, CsrMatrix, SolverKind};
pub use transient::{run, run_from, MuPolicy, RunOutput, Stepper, StepperConfig, TransientError};

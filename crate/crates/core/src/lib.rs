//! Numerical laboratory for closed-time-path (CTP) actions.
//!
//! Every degree of freedom is doubled into legs `(x₊, x₋)` joined at the
//! final time, and the action
//!
//! ```text
//! S[x₊, x₋] = S₁[x₊] - S₁*[x₋] + S₂[x₊, x₋],   S[x₊, x₋] = -S*[x₋, x₊],
//! ```
//!
//! turns an initial-value problem into a variational one. The crate provides
//! the discretized actions ([`action`]), CTP Green functions with an
//! `ε`-prescription ([`green`]), variational and tree-graph solvers
//! ([`solver`]), elimination of harmonic environments ([`open`]) and
//! momentum and energy balance audits ([`noether`]).

pub mod error;
pub mod grid;
pub mod linalg;
pub mod action;
pub mod green;
pub mod report;
pub mod solver;
pub mod open;
pub mod noether;

pub use action::{
    ancilla_action, ctp_action, hamiltonian_action, hamiltonian_gradient, open_lagrangian_action,
    shoot_hamiltonian, stp_action, stp_gradient, variational_residuals, AncillaModel, DampedResidual,
    FreeHamiltonian, Hamiltonian, HarmonicHamiltonian, OpenQuadraticModel, QuarticModel,
    RelativisticHamiltonian, ResidualFunctional,
};
pub use error::{CtpError, Result};
pub use green::{
    appendix_grid, build_d0_inverse, decompose_blocks, eliminate_endpoint, harmonic_ctp_matrix,
    open_kernels, BoundarySource, ComplexKernel, CtpGreenFunction, D0Kernel, D0Method, GreenBlocks,
    HarmonicBlocks, Leg, OpenKernels, TimeDomainBlocks,
};
pub use grid::{
    make_grid, roundtrip_join, roundtrip_split, roundtrip_split_hamiltonian, CtpTrajectory,
    PhaseTrajectory, TimeGrid, Trajectory,
};
pub use noether::{
    balance_report, energy_balance, momentum_balance, renormalized_momentum, semi_holonomic_force,
    BalanceReport, DoubledLagrangian,
};
pub use open::{
    bath_memory_kernel, effective_equation_solve, full_bipartite_solve, influence_action, BathMode,
    BathSpec, MemoryKernel, TimeArrow,
};
pub use solver::{
    ancilla_stationary, causality_probe, equation_count_audit, integrate_open_doublet, rk4_solve,
    shoot_variational, tree_graph_solve, Assembly, InitialData,
};

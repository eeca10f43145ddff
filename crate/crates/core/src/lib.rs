//! Diffusion in the half-plane with a dynamic double-well boundary reaction.

pub mod analysis;
pub mod dynamics;
pub mod grid;
pub mod interp;
pub mod linalg;
pub mod potential;
pub mod steady;
mod spline;

pub use grid::{BoundaryTrace, GridError, HalfPlaneGrid, ScalarField};
pub use potential::{estimate_constants, DoubleWellPotential, PotentialConstants, PotentialError};
pub use analysis::{
    envelope_check, fit_decay, inverse_kernel, linear_decay_experiment, propagate_trace, q2_boundary_flux,
    q2_solution, AnalysisError, DecayFit, EnvelopeParams, EnvelopeReport,
};
pub use dynamics::{
    evolve, evolve_linear, initial_data, step, step_linear, sup_distance_to_profile, DynamicsError, InitialKind,
    Scheme, SchemeConfig, Trajectory,
};
pub use steady::{solve_profile, SteadyError, SteadyProfile, Transition};

//! Hover simulation and stability analysis for flapping-wing fliers.
//!
//! The toolkit models a two-degree-of-freedom flapping flier (vertical
//! velocity `w`, flapping angle `phi`) closed around an extremum-seeking
//! torque loop. It derives plant coefficients from wing morphology,
//! simulates the closed-loop hover response, and certifies stability of
//! the vibrationally averaged system through Lie-bracket averaging and
//! eigenvalue analysis of the reduced (w, phidot, tauhat) dynamics.
//!
//! Modules:
//! - [`species`]: morphology records, coefficient derivation, bundled data
//! - [`dynamics`]: the open-loop plant in exact and smoothed form
//! - [`esc`]: objective functions, modulation, the assembled closed loop
//! - [`sim`]: fixed-step integration, hover experiments, metrics, sweeps
//! - [`stability`]: averaged-system equilibria, Jacobians, eigenvalues
//! - [`reproduce`]: the consolidated verification driver used by the CLI

pub mod cli;
pub mod dynamics;
pub mod eigen;
pub mod esc;
pub mod output;
pub mod quadrature;
pub mod reproduce;
pub mod sim;
pub mod species;
pub mod stability;

pub use dynamics::{abs_smooth, plant_rhs, plant_rhs_smooth, PlantState, SmoothingOrder};
pub use esc::{
    affine_decomposition, closed_loop_rhs, lift_value, modulation, objective_value, EsState,
    EscConfig, LiftModel, Objective, TauHatLaw,
};
pub use sim::{integrate, measure_phi_amplitude, run_hover, run_open_loop, HoverMetrics, HoverRun, SimOptions, Trajectory};
pub use species::{chord_at, chord_moment, ModelCoefficients, Morphology, Species, SpeciesError};
pub use stability::{analyze, averaged_field, find_equilibrium, lie_bracket, APlacement, StabilityReport};

/// Tool version embedded into every output metadata block.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

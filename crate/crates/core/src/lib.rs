//! Finite-volume solver for the dimensionless Poisson–Nernst–Planck–Bikermann
//! model: ions and water drifting in a correlated electrostatic potential
//! given by a Green's function convolution, with a Bikermann steric
//! potential built from the void fraction.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the `*64` aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convolve;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod fields;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod num;
pub mod presets;
pub mod quadrature;
pub mod scheme;
pub mod system;

pub use convolve::{convolve, convolve_direct, Convolver};
pub use diagnostics::{
    discrete_dissipation, discrete_energy, steady_state_residual, DiagnosticsRecord,
};
pub use equilibrium::{fermi_map, solve_equilibrium, EquilibriumReport};
pub use error::{PnpbError, Result};
pub use fields::{compute_fields, slotboom, FieldSet, SlotboomVars};
pub use kernel::{build_tensor, eval_kernel, load_or_build, KernelFamily, KernelSpec, KernelTable};
pub use model::{
    saturation_events, Event, ExternalField, GammaGuard, Grid, MassWeighting, ModelParams,
    SpeciesSet, State,
};
pub use num::Real;
pub use presets::{preset, InitialCondition, Preset, Scenario};
pub use scheme::{
    face_flux, run_dynamics, run_dynamics_with, step, Face, StepReport, StepStats, Trajectory,
};
pub use system::{validate, System};

pub type Grid64 = Grid<f64>;
pub type State64 = State<f64>;
pub type SpeciesSet64 = SpeciesSet<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type System64 = System<f64>;
pub type FieldSet64 = FieldSet<f64>;
pub type KernelTable64 = KernelTable<f64>;
pub type Scenario64 = Scenario<f64>;

pub type Grid32 = Grid<f32>;
pub type State32 = State<f32>;
pub type System32 = System<f32>;

//! Pseudospectral simulation of 2D anisotropic poroelastic waves.
//!
//! Fields live on a staggered periodic grid. Spatial derivatives are exact
//! Fourier multipliers with two-thirds dealiasing. Time stepping splits the
//! system into a reversible, energy-conserving part (integrated with RK4) and
//! the Darcy drag (solved exactly), composed symmetrically.

pub mod dynamics;
pub mod error;
pub mod excitation;
pub mod fft;
pub mod harness;
pub mod grid;
pub mod integrator;
pub mod material;
pub mod par;
pub mod state;

pub use dynamics::{dissipative_flow, reversible_rhs, DragFlowTables, ReversibleOperator};
pub use error::{Error, Result};
pub use excitation::{
    ricker, Channel, PlacedReceiver, PlacedSource, ReceiverSpec, SourceKind, SourceSpec, TraceSet,
    Wavelet,
};
pub use grid::{Axis, ScalarField, SpectralGrid, Stagger};
pub use integrator::{stable_dt, Propagator, Scheme, StepPlan};
pub use material::{build_material, Layer, MaterialError, MaterialParams, PoroelasticMaterial};
pub use state::{energy, energy_inner, state_axpy, WaveState};

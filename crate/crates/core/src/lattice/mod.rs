//! Gauge-covariant discretization: the box grid, sampled vector potentials with
//! Peierls link phases, covariant differences, the magnetic kinetic operator and
//! magnetic Sobolev norms.

mod gauge;
mod grid;
pub mod inequalities;
mod ops;
mod wavefunction;

pub use gauge::{FieldTensor, GaugeField, GaugePreset, VectorPotentialFn};
pub use grid::Grid;
pub use inequalities::{commutator_residual, diamagnetic_residual, hardy_residual};
pub use ops::{CovariantStencil, FaultInjection, LatticeOperators, MagneticKinetic};
pub use wavefunction::WaveFunction;

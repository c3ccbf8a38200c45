//! Numerical laboratory for bosonic mean-field dynamics in a magnetic field.
//!
//! The crate propagates the exact N-boson lattice dynamics generated by
//! `sum_j (-i grad_j + A(x_j))^2 + (1/N) sum_{i<j} lambda / (|x_i - x_j| + alpha)`,
//! the corresponding magnetic Hartree equation, and measures how the reduced
//! one- and two-body density matrices approach the Hartree projector.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod dense;
pub mod error;
pub mod hartree;
pub mod krylov;
pub mod lab;
pub mod lattice;
pub mod manybody;
pub mod marginals;
pub mod potentials;
pub mod sparse;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use hartree::{HartreeSolver, HartreeState, Observables, Trajectory};
pub use krylov::{KrylovConfig, KrylovStats};
pub use lattice::{GaugeField, GaugePreset, Grid, LatticeOperators, WaveFunction};
pub use manybody::{FockState, ManyBodyHamiltonian, MemoryBudget};
pub use marginals::DensityMatrix;
pub use potentials::{InteractionParams, SampledKernel};

//! Spectral Galerkin simulation of a kinetic Fokker-Planck equation on
//! the torus, forced by a spatially colored Wiener process, with
//! diagnostics for dissipation, hypocoercive decay, regularization and
//! invariant-measure statistics, and an independent Langevin particle
//! oracle driven by the same Brownian increments.

pub mod basis;
pub mod dense;
pub mod diagnostics;
pub mod ensemble;
pub mod noise;
pub mod operators;
pub mod particle;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod sparse;
pub mod validate;

pub use basis::{Basis, MultiIndex, SpectralState, TruncationSpec};
pub use diagnostics::{DecayFit, DiagnosticsParams, EnergyReport};
pub use noise::{BrownianPath, FieldSpec, NoiseSpec};
pub use operators::OperatorBundle;
pub use solver::{Scheme, SolverConfig, Trajectory};

//! The three elliptic examples: Robin, quasilinear and Dirichlet energy.

pub mod dirichlet_energy;
pub mod quasilinear;
pub mod robin;

pub use dirichlet_energy::{DirichletEnergyData, DirichletEnergyProblem};
pub use quasilinear::{QuasilinearData, QuasilinearProblem};
pub use robin::{RobinData, RobinProblem};

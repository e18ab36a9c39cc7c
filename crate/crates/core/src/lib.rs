//! Pilot-wave dynamics as a constrained Hamiltonian system.
//!
//! The Schrödinger field and its canonical momenta live on a lattice
//! ([`grid`], [`constraints`]); the total Hamiltonian generates their flow
//! ([`flow`]), checked against independent solvers ([`solver`]). Particles are
//! guided by the probability current ([`guidance`]) and ensembles test that
//! `|psi|^2` is carried along ([`ensemble`]). The same construction is carried
//! to Dirac spinors ([`dirac`]) and to the Fourier modes of a real scalar
//! field ([`scalar_field`]).

pub mod constraints;
pub mod dirac;
pub mod ensemble;
pub mod error;
pub mod flow;
pub mod grid;
pub mod guidance;
pub mod output;
pub mod rk4;
pub mod runs;
pub mod scenario;
pub mod scalar_field;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Boundary, ComplexLatticeField, DerivativeMethod, GridSpec, Units};

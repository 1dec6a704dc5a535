//! Covariant De Donder–Weyl Hamiltonian field theory on multimomentum phase space.
//!
//! The crate is organised bottom-up: [`expr`] scalar expressions, [`exterior`]
//! forms and multivectors, [`phase`] the phase-space chart with its canonical
//! forms, [`legendre`] the Legendre correspondence, [`brackets`] the p-bracket
//! algebra, [`dynamics`] a leapfrog integrator for the Hamilton equations and
//! [`systems`] the scalar field, string and Maxwell examples.

pub mod brackets;
pub mod systems;
pub mod verify;
pub mod chart;
pub mod dynamics;
pub mod expr;
pub mod legendre;
pub mod exterior;
pub mod phase;
pub mod probe;

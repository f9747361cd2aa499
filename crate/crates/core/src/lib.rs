//! # eraserlab
//!
//! Simulation and verification of the thermodynamic cost of erasing information.
//!
//! The crate is organised by physical setting:
//!
//! - [`maxent`]: maximum-entropy reservoir states for commuting conserved observables,
//!   generalized work/heat bookkeeping and the multi-quantity erasure bound.
//! - [`energy`]: erasure of a two-level memory by slowly raising an energy gap in
//!   contact with a heat bath, with exact and sampled work/heat statistics.
//! - [`spin`]: the discrete angular-momentum analogue against a spin reservoir
//!   (spinlabor and spintherm), its exponential-average identity and tail bounds.
//! - [`central_spin`]: state-vector simulation of erasure by a central spin exchanging
//!   angular momentum with a bath of spins, with dark-state magnetic pulses.
//! - [`engine`]: ledger-level spin-heat engine that turns heat wholly into work and
//!   pays for erasure in spintherm.
//!
//! Natural units are used throughout: `k_B = 1`, `ħ = 1` unless a reservoir carries an
//! explicit `hbar`, and entropies are in nats.

#![forbid(unsafe_code)]

pub mod central_spin;
pub mod dist;
pub mod energy;
pub mod engine;
pub mod maxent;
pub mod seeding;
pub mod spin;

pub use dist::DiscreteDistribution;

/// ln 2, the entropy of one bit in nats.
pub const LN_2: f64 = std::f64::consts::LN_2;

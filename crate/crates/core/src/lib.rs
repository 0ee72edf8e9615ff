//! Simulation and estimation toolkit for contagion and infectiousness
//! components of the indirect effect of vaccination.
//!
//! The pipeline runs network generation ([`netgraph`]), vaccination and
//! epidemic simulation ([`epidemic`]), per-group analysis variables
//! ([`extract`]), GLM fitting ([`glm`]), effect estimation ([`effects`]) and
//! bootstrap inference with the Monte Carlo harness ([`inference`]).

pub mod config;
pub mod effects;
pub mod epidemic;
pub mod extract;
pub mod glm;
pub mod inference;
pub mod netgraph;
pub mod par;
pub mod rng;

//! Transferability scoring, rank-correlation benchmarking of scorers, and
//! combination of several scorers through a three-level hierarchical
//! Bayesian regression sampled with Hamiltonian Monte Carlo.

pub mod btb;
pub mod data;
pub mod rank;
pub mod scorers;

//! Cloning attacks on BB84 and six-state quantum key distribution for
//! sequences of qubits encoded in the same basis.
//!
//! The library implements the generalized Pauli-cloning ansatz for N-qubit
//! sequences:
//! amplitude matrices and their sign-kernel Fourier duals, generalized Bell
//! states, Pauli-channel clone outputs, single-qubit and full-dimension
//! fidelities, the Csiszar-Korner key-rate bound, a constrained optimizer
//! over cloner weights, and a Monte-Carlo protocol simulator.

pub mod cloner;
pub mod infotheory;
pub mod optimizer;
pub mod output;
pub mod qkit;
pub mod simulator;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

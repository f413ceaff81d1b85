//! Chain description, disorder sampling and Hamiltonian construction in the
//! single-excitation sector and in a truncated Fock space.

mod chain;
mod fock;
mod hamiltonian;
pub mod rng;
pub mod sparse;

use thiserror::Error;

pub use chain::{sample_disorder, uniform_realization, Boundary, ChainSpec, ChainWarning, DisorderRealization, Frame};
pub use fock::{
    build_fock_basis, build_fock_basis_with_budget, fock_dimension, FockBasis, FockCutoffs, LadderEntry, LadderOp,
    DEFAULT_MAX_DIMENSION,
};
pub use hamiltonian::{
    build_fock_hamiltonian, build_single_excitation_h, fock_hamiltonian_with_hopping, links, SiteHamiltonian,
};
pub use rng::SeedRecord;
pub use sparse::CsrMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("Fock basis dimension {dimension} exceeds the configured limit {limit}")]
    Resource { dimension: u128, limit: usize },
    #[error("malformed realization file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

//! Pair and volumetric potentials and the discrete Hamiltonian.

pub mod deformation;
pub mod growth;
pub mod hamiltonian;
pub mod kuhn_grun;
pub mod norms;
pub mod potential;

pub use deformation::{apply_linear, Deformation, Role};
pub use growth::{growth_check, GrowthGrid, GrowthReport};
pub use hamiltonian::{hamiltonian, hamiltonian_gradient, Assembly};
pub use kuhn_grun::{inverse_langevin, kuhn_grun, langevin, KgMode, P10_COEFFS};
pub use norms::{discrete_norms, DiscreteNorms};
pub use potential::{pair_energy, EdgeMultiplier, EdgeTerm, PairKind, PairPotential, VolumetricKind, VolumetricPotential};

#[cfg(test)]
mod tests;

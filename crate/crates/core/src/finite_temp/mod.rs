//! Finite-temperature free energies: exact Gaussian values, MCMC sampling and thermodynamic integration.

mod gaussian;
mod mcmc;
mod studies;
mod ti;

pub use gaussian::{gaussian_free_energy, QuadEdge, QuadraticModel};
pub use mcmc::{metropolis_accept, run_chain, sample_gibbs, ChainOutput, ChainParams, Kernel};
pub use studies::{
    concentration_diagnostic, two_temperature_study, zero_temp_gap, ConcentrationSummary, GapPoint, GapReport,
    GapSetup, TwoTempReport, scaled_problem,
};
pub use ti::{free_energy_ti, gauss_legendre, ti_integrate, ReferenceKind, TiParams};

use serde::{Deserialize, Serialize};

use crate::energy::Assembly;
use crate::error::Result;

/// Energies the samplers can evaluate.
pub trait Hamiltonian: Sync {
    fn energy(&self, u: &[f64]) -> Result<f64>;
    /// Energy and its gradient with respect to every vertex value.
    fn energy_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64>;
    /// Part of the energy that depends on vertex `v`.
    fn local_energy(&self, u: &[f64], v: usize) -> Result<f64>;
}

impl Hamiltonian for Assembly {
    fn energy(&self, u: &[f64]) -> Result<f64> {
        Assembly::energy(self, u)
    }

    fn energy_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        Assembly::energy_grad(self, u, grad)
    }

    fn local_energy(&self, u: &[f64], v: usize) -> Result<f64> {
        Assembly::local_energy(self, u, v)
    }
}

/// `H_λ = H_ref + λ (H - H_ref)`.
pub struct Path<'a> {
    pub reference: &'a dyn Hamiltonian,
    pub target: &'a dyn Hamiltonian,
    pub lambda: f64,
}

impl Hamiltonian for Path<'_> {
    fn energy(&self, u: &[f64]) -> Result<f64> {
        let (a, b) = (self.reference.energy(u)?, self.target.energy(u)?);
        Ok(a + self.lambda * (b - a))
    }

    fn energy_grad(&self, u: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut gb = vec![0.0; grad.len()];
        let a = self.reference.energy_grad(u, grad)?;
        let b = self.target.energy_grad(u, &mut gb)?;
        for (g, h) in grad.iter_mut().zip(&gb) {
            *g += self.lambda * (h - *g);
        }
        Ok(a + self.lambda * (b - a))
    }

    fn local_energy(&self, u: &[f64], v: usize) -> Result<f64> {
        let (a, b) = (self.reference.local_energy(u, v)?, self.target.local_energy(u, v)?);
        Ok(a + self.lambda * (b - a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactGaussian,
    TiMcmc,
    Minimization,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub beta: f64,
    pub domain_volume: f64,
    pub dofs: usize,
    pub seed: Option<u64>,
    /// Per λ node for TI.
    pub acceptance: Vec<f64>,
    pub ess: Vec<f64>,
    /// `Var(β (H - H_ref))` per λ node.
    pub overlap_variance: Vec<f64>,
    /// Reference actually used (after any re-fit).
    pub reference: Option<ReferenceKind>,
}

/// `E^β_ε = -(1/(β|D_ε|)) log Z^β` with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
    pub meta: EstimateMeta,
}

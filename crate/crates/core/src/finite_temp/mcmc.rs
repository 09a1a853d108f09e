use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Hamiltonian;
use crate::energy::{Deformation, Role};
use crate::error::{Error, Result};
use crate::zero_temp::CellProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// Single-site random-walk Metropolis, one proposal per movable vertex per sweep.
    #[default]
    Metropolis,
    /// Metropolis-adjusted Langevin on all movable values at once.
    Mala,
}

impl Kernel {
    pub fn default_acceptance(self) -> f64 {
        match self {
            Kernel::Metropolis => 0.234,
            Kernel::Mala => 0.574,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainParams {
    pub kernel: Kernel,
    /// Sweeps with step adaptation, discarded.
    pub burn_in: usize,
    /// Recorded sweeps.
    pub sweeps: usize,
    /// Keep every `thin`-th recorded state; 0 keeps none.
    pub thin: usize,
    /// Initial proposal scale.
    pub step: f64,
    pub target_acceptance: Option<f64>,
    pub batches: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            kernel: Kernel::Metropolis,
            burn_in: 2_000,
            sweeps: 20_000,
            thin: 0,
            step: 0.1,
            target_acceptance: None,
            batches: 50,
            seed: 0,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// One observation per recorded sweep.
    pub observations: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    /// Acceptance rate over the recorded sweeps.
    pub acceptance: f64,
    /// Frozen proposal scale.
    pub step: f64,
    pub final_state: Vec<f64>,
}

/// Metropolis rule for an energy change `delta` at inverse temperature `beta` and a uniform draw.
pub fn metropolis_accept(delta: f64, beta: f64, uniform: f64) -> bool {
    delta <= 0.0 || uniform < (-beta * delta).exp()
}

struct State<'a> {
    h: &'a dyn Hamiltonian,
    beta: f64,
    n: usize,
    u: Vec<f64>,
    movable: &'a [usize],
    soft: Vec<bool>,
    reference: Vec<f64>,
    energy: f64,
    guard: f64,
}

impl State<'_> {
    fn inside(&self, k: usize, v: &[f64]) -> bool {
        !self.soft[k]
            || v.iter().zip(&self.reference[k * self.n..(k + 1) * self.n]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < 1.0
    }

    fn metropolis_sweep(&mut self, step: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let n = self.n;
        let mut accepted = 0usize;
        let mut old = vec![0.0; n];
        for (k, &v) in self.movable.iter().enumerate() {
            old.copy_from_slice(&self.u[v * n..(v + 1) * n]);
            let before = self.h.local_energy(&self.u, v)?;
            for c in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                self.u[v * n + c] = old[c] + step * z;
            }
            let prop = self.u[v * n..(v + 1) * n].to_vec();
            let uniform: f64 = rng.random();
            let ok = self.inside(k, &prop) && {
                match self.h.local_energy(&self.u, v) {
                    Ok(after) if after.is_finite() => {
                        let delta = after - before;
                        self.energy + delta <= self.guard && metropolis_accept(delta, self.beta, uniform) && {
                            self.energy += delta;
                            true
                        }
                    }
                    _ => false,
                }
            };
            if ok {
                accepted += 1;
            } else {
                self.u[v * n..(v + 1) * n].copy_from_slice(&old);
            }
        }
        Ok(accepted as f64 / self.movable.len().max(1) as f64)
    }

    fn pack(&self, full: &[f64]) -> Vec<f64> {
        let n = self.n;
        self.movable.iter().flat_map(|&v| full[v * n..(v + 1) * n].iter().copied()).collect()
    }

    fn mala_step(&mut self, h_step: f64, grad: &mut Vec<f64>, rng: &mut ChaCha8Rng) -> Result<f64> {
        let n = self.n;
        let beta = self.beta;
        let x = self.pack(&self.u);
        let gx = self.pack(grad);
        let noise = (2.0 * h_step).sqrt();
        let y: Vec<f64> = x
            .iter()
            .zip(&gx)
            .map(|(xi, gi)| {
                let z: f64 = StandardNormal.sample(rng);
                xi - h_step * beta * gi + noise * z
            })
            .collect();
        let uniform: f64 = rng.random();
        if (0..self.movable.len()).any(|k| !self.inside(k, &y[k * n..(k + 1) * n])) {
            return Ok(0.0);
        }
        let mut trial = self.u.clone();
        for (k, &v) in self.movable.iter().enumerate() {
            trial[v * n..(v + 1) * n].copy_from_slice(&y[k * n..(k + 1) * n]);
        }
        let mut gfull = vec![0.0; trial.len()];
        let hy = match self.h.energy_grad(&trial, &mut gfull) {
            Ok(e) if e.is_finite() && e <= self.guard => e,
            _ => return Ok(0.0),
        };
        let gy = self.pack(&gfull);
        // log q(x | y) - log q(y | x)
        let fwd: f64 = y.iter().zip(&x).zip(&gx).map(|((yi, xi), gi)| (yi - xi + h_step * beta * gi).powi(2)).sum();
        let bwd: f64 = x.iter().zip(&y).zip(&gy).map(|((xi, yi), gi)| (xi - yi + h_step * beta * gi).powi(2)).sum();
        let log_alpha = -beta * (hy - self.energy) - (bwd - fwd) / (4.0 * h_step);
        if log_alpha >= 0.0 || uniform < log_alpha.exp() {
            self.u = trial;
            self.energy = hy;
            *grad = gfull;
            Ok(1.0)
        } else {
            Ok(0.0)
        }
    }
}

/// Runs one chain for `exp(-β H)` over the `movable` vertices of `start`, calling `observe` after every recorded sweep.
pub fn run_chain(
    h: &dyn Hamiltonian,
    beta: f64,
    start: &Deformation,
    movable: &[usize],
    params: &ChainParams,
    mut observe: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<ChainOutput> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParams(format!("beta = {beta} must be positive")));
    }
    let n = start.n;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(params.stream);
    let e0 = h.energy(&start.values)?;
    let guard = 1e3 * (e0.abs() + 1.0);
    let mut st = State {
        h,
        beta,
        n,
        u: start.values.clone(),
        movable,
        soft: movable.iter().map(|&v| start.roles[v] == Role::Soft).collect(),
        reference: movable.iter().flat_map(|&v| start.reference_value(v).to_vec()).collect(),
        energy: e0,
        guard,
    };
    let target = params.target_acceptance.unwrap_or(params.kernel.default_acceptance());
    let mut log_step = match params.kernel {
        Kernel::Metropolis => params.step.ln(),
        // Langevin time step h; the proposal scale is sqrt(2h)
        Kernel::Mala => (params.step * params.step / 2.0).ln(),
    };
    let mut grad = vec![0.0; st.u.len()];
    if params.kernel == Kernel::Mala {
        st.energy = h.energy_grad(&st.u, &mut grad)?;
    }
    let mut out = ChainOutput { observations: Vec::with_capacity(params.sweeps), samples: vec![], acceptance: 0.0, step: 0.0, final_state: vec![] };
    let mut acc_sum = 0.0;
    for k in 0..params.burn_in + params.sweeps {
        let a = match params.kernel {
            Kernel::Metropolis => st.metropolis_sweep(log_step.exp(), &mut rng)?,
            Kernel::Mala => st.mala_step(log_step.exp(), &mut grad, &mut rng)?,
        };
        if k < params.burn_in {
            log_step += (a - target) * 0.5 / (1.0 + k as f64).powf(0.6);
            continue;
        }
        acc_sum += a;
        if params.kernel == Kernel::Metropolis {
            st.energy = h.energy(&st.u)?;
        }
        if !st.energy.is_finite() || st.energy > guard {
            return Err(Error::ChainDiverged { energy: st.energy, guard });
        }
        out.observations.push(observe(&st.u)?);
        let r = k - params.burn_in;
        if params.thin > 0 && r % params.thin == 0 {
            out.samples.push(st.u.clone());
        }
    }
    out.acceptance = acc_sum / params.sweeps.max(1) as f64;
    out.step = match params.kernel {
        Kernel::Metropolis => log_step.exp(),
        Kernel::Mala => (2.0 * log_step.exp()).sqrt(),
    };
    out.final_state = st.u;
    Ok(out)
}

/// Samples the Gibbs measure of a cell problem; observations are the energies.
pub fn sample_gibbs(problem: &CellProblem, beta: f64, params: &ChainParams) -> Result<ChainOutput> {
    let asm = problem.assembly()?;
    let start = problem.affine_state();
    let movable: Vec<usize> = asm.vertices.iter().copied().filter(|&v| start.roles[v] != Role::Clamped).collect();
    run_chain(&asm, beta, &start, &movable, params, |u| asm.energy(u))
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{minimize_assembled, CellSetup};
use crate::energy::{Assembly, Deformation};
use crate::error::{Error, Result};
use crate::graph::{ExtendedGraph, Window};
use crate::stats::mean_stderr;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub sigma_whole: f64,
    pub sigma_parts: Vec<f64>,
    /// `Σ_i H^{d-1}(∂I_i \ ∂I)`.
    pub surface: f64,
    /// `C_Λ` so that `C_Λ · surface` is the interface energy of the affine datum.
    pub c_lambda: f64,
    /// `C_Λ / (1 + |Λ|^p)`.
    pub c: f64,
    /// Energy on `I` of the sub-minimizers glued together.
    pub stitched_energy: f64,
    /// `Σ σ(I_i) + C_Λ · surface - σ(I)`.
    pub slack: f64,
}

fn check_partition(whole: &Window, parts: &[Window]) -> Result<()> {
    if parts.len() < 2 {
        return Err(Error::PartitionInvalid("a partition needs at least two boxes".into()));
    }
    let d = whole.dim();
    for (k, p) in parts.iter().enumerate() {
        if p.dim() != d || !p.is_subset_of(whole) {
            return Err(Error::PartitionInvalid(format!("box {k} is not inside the whole box")));
        }
        for q in &parts[k + 1..] {
            let overlap: f64 = (0..d).map(|c| (p.hi[c].min(q.hi[c]) - p.lo[c].max(q.lo[c])).max(0.0)).product();
            if overlap > 1e-12 * whole.volume() {
                return Err(Error::PartitionInvalid(format!("box {k} overlaps another box")));
            }
        }
    }
    let total: f64 = parts.iter().map(|p| p.volume()).sum();
    if (total - whole.volume()).abs() > 1e-12 * whole.volume() {
        return Err(Error::PartitionInvalid(format!("boxes cover {total} of {}", whole.volume())));
    }
    Ok(())
}

fn interior_surface(whole: &Window, p: &Window) -> f64 {
    let d = whole.dim();
    let mut s = 0.0;
    for c in 0..d {
        let face: f64 = (0..d).filter(|&k| k != c).map(|k| p.side(k)).product();
        if p.lo[c] > whole.lo[c] {
            s += face;
        }
        if p.hi[c] < whole.hi[c] {
            s += face;
        }
    }
    s
}

/// Checks `σ(I) ≤ Σ σ(I_i) + C_Λ Σ H^{d-1}(∂I_i \ ∂I)` by direct minimizations.
pub fn subadditivity_check(
    g: &ExtendedGraph,
    lambda: &[f64],
    whole: &Window,
    parts: &[Window],
    setup: &CellSetup,
) -> Result<SubadditivityReport> {
    check_partition(whole, parts)?;
    let problem = setup.problem(g, whole.clone(), lambda)?;
    let asm = problem.assembly()?;
    let whole_min = minimize_assembled(&problem, &asm, &setup.solver)?;
    let subs: Vec<Result<(Assembly, crate::zero_temp::MinimizationResult)>> = parts
        .par_iter()
        .map(|p| {
            let sp = setup.problem(g, p.clone(), lambda)?;
            let a = sp.assembly()?;
            let r = minimize_assembled(&sp, &a, &setup.solver)?;
            Ok((a, r))
        })
        .collect();
    let mut sub_asm = vec![];
    let mut sigma_parts = vec![];
    let mut stitched: Deformation = problem.affine_state();
    let n = problem.n();
    for (p, r) in parts.iter().zip(subs) {
        let (a, r) = r?;
        for &v in &a.vertices {
            debug_assert!(p.contains(g.position(v)));
            stitched.values[v * n..(v + 1) * n].copy_from_slice(r.deformation.value(v));
        }
        sigma_parts.push(r.energy);
        sub_asm.push(a);
    }
    let stitched_energy = asm.energy(&stitched.values)?;

    // interface energy of the affine datum: edges between boxes and cells owned by no box
    let owner: Vec<Option<usize>> =
        (0..g.len()).map(|v| parts.iter().position(|p| p.contains(g.position(v)))).collect();
    let affine = problem.affine_state();
    let mut xi = vec![0.0; n];
    let mut interface = 0.0;
    for e in &asm.edges {
        if owner[e.i] != owner[e.j] {
            for c in 0..n {
                xi[c] = affine.values[e.i * n + c] - affine.values[e.j * n + c];
            }
            interface += asm.pair.eval(&e.term, &xi)?;
        }
    }
    if !asm.cells.is_empty() {
        let owned: std::collections::HashSet<usize> =
            sub_asm.iter().flat_map(|a| a.cells.iter().map(|c| c.vertex)).collect();
        let dets = asm.cell_dets(&affine.values);
        for (c, t) in asm.cells.iter().zip(dets) {
            if !owned.contains(&c.vertex) {
                interface += c.volume * asm.vol.eval(t);
            }
        }
    }
    let surface: f64 = parts.iter().map(|p| interior_surface(whole, p)).sum();
    let c_lambda = if surface > 0.0 { interface / surface } else { 0.0 };
    let norm = problem.datum.norm();
    let c = c_lambda / (1.0 + norm.powf(setup.pair.growth_exponent()));
    let sum_parts: f64 = sigma_parts.iter().sum();
    Ok(SubadditivityReport {
        sigma_whole: whole_min.energy,
        slack: sum_parts + c_lambda * surface - whole_min.energy,
        sigma_parts,
        surface,
        c_lambda,
        c,
        stitched_energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneDefect {
    pub t: [f64; 3],
    /// `g(t₂) - (g(t₁) + g(t₃)) / 2`; convexity makes it nonpositive.
    pub defect: f64,
    pub stderr: f64,
    /// `defect ≤ 2 stderr + tolerance`.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneReport {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub g_stderr: Vec<f64>,
    pub defects: Vec<RankOneDefect>,
}

/// `Λ + t a⊗n` for a row-major `n x d` matrix.
pub fn rank_one_line(lambda: &[f64], a: &[f64], normal: &[f64], t: f64) -> Vec<f64> {
    let d = normal.len();
    let mut m = lambda.to_vec();
    for (r, ar) in a.iter().enumerate() {
        for (c, nc) in normal.iter().enumerate() {
            m[r * d + c] += t * ar * nc;
        }
    }
    m
}

/// Samples `g(t) = W̄(Λ + t a⊗n)` and its midpoint convexity defects.
///
/// `estimator` returns one value per seed; equal-length outputs are paired seed by seed.
pub fn rank_one_probe<F>(
    lambda: &[f64],
    a: &[f64],
    normal: &[f64],
    ts: &[f64],
    tolerance: f64,
    estimator: F,
) -> Result<RankOneReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let nz = |v: &[f64]| v.iter().any(|x| *x != 0.0);
    if !nz(a) || !nz(normal) {
        return Err(Error::InvalidParams("rank-one direction needs nonzero a and n".into()));
    }
    if a.len() * normal.len() != lambda.len() {
        return Err(Error::DimensionMismatch(format!(
            "a ⊗ n is {}x{}, Λ has {} entries",
            a.len(),
            normal.len(),
            lambda.len()
        )));
    }
    let samples: Vec<Result<Vec<f64>>> =
        ts.par_iter().map(|&t| estimator(&rank_one_line(lambda, a, normal, t))).collect();
    let mut vals = vec![];
    for s in samples {
        let s = s?;
        if s.is_empty() {
            return Err(Error::InvalidParams("estimator returned no values".into()));
        }
        vals.push(s);
    }
    let summary: Vec<(f64, f64)> = vals.iter().map(|v| mean_stderr(v)).collect();
    let paired = vals.iter().all(|v| v.len() == vals[0].len()) && vals[0].len() > 1;
    let mut defects = vec![];
    for i in 0..ts.len() {
        for k in i + 1..ts.len() {
            let mid = 0.5 * (ts[i] + ts[k]);
            let Some(j) = ts.iter().position(|&t| (t - mid).abs() <= 1e-12 * (1.0 + mid.abs())) else {
                continue;
            };
            let (defect, stderr) = if paired {
                let per: Vec<f64> = (0..vals[0].len()).map(|s| vals[j][s] - 0.5 * (vals[i][s] + vals[k][s])).collect();
                mean_stderr(&per)
            } else {
                let d = summary[j].0 - 0.5 * (summary[i].0 + summary[k].0);
                let se = (summary[j].1.powi(2) + 0.25 * (summary[i].1.powi(2) + summary[k].1.powi(2))).sqrt();
                (d, se)
            };
            defects.push(RankOneDefect {
                t: [ts[i], ts[j], ts[k]],
                defect,
                stderr,
                within_tolerance: defect <= 2.0 * stderr + tolerance,
            });
        }
    }
    Ok(RankOneReport {
        t: ts.to_vec(),
        g: summary.iter().map(|s| s.0).collect(),
        g_stderr: summary.iter().map(|s| s.1).collect(),
        defects,
    })
}

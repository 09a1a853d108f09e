use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{StudyConfig, StudyKind};
use super::fit::{fit_scaling, ScalingModel};
use super::poincare::{poincare_point, summarize, PoincareParams, PoincarePoint};
use crate::error::{Error, Result};
use crate::finite_temp::{
    concentration_diagnostic, gaussian_free_energy, sample_gibbs, two_temperature_study, zero_temp_gap, GapReport,
    GapSetup, QuadraticModel, TiParams,
};
use crate::graph::{ExtendedGraph, GraphParams, Window};
use crate::stats::mean_stderr;
use crate::zero_temp::{
    growth_sandwich, minimize_cell, rank_one_line, rank_one_probe, subadditivity_check, w_inf_from_points, CellProblem,
    CellSetup, Datum, GraphSource, WindowPoint,
};
use crate::CODE_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Ok,
    Failed,
}

/// One sweep point as persisted in the checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub config_hash: String,
    pub code_version: String,
    pub index: usize,
    pub inputs: Value,
    pub status: PointStatus,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub outputs: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config_hash: String,
    pub code_version: String,
    pub kind: StudyKind,
    pub config: StudyConfig,
    pub records: Vec<PointRecord>,
    /// Fits and per-group verdicts.
    pub summary: Value,
    pub verdict: bool,
    pub failed: usize,
    /// Points taken from an existing checkpoint.
    pub resumed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "job", rename_all = "kebab-case")]
enum Job {
    Minimize { lambda: usize, region: usize, seed: u64 },
    /// `lambda` is `None` for the zero matrix.
    Phantom { lambda: Option<usize>, region: usize, beta: f64 },
    Gap { lambda: usize, seed: u64 },
    TwoTemp { seed: u64 },
    RankOne { t: f64, seed: u64 },
    Concentration { lambda: usize, beta_index: usize, beta: f64, seed: u64 },
    Poincare { side: f64, seed: u64 },
    Subadditivity { lambda: usize, partition: usize, seed: u64 },
}

/// SHA-256 of the canonical config JSON, output path excluded.
pub fn config_hash(config: &StudyConfig) -> Result<String> {
    let canonical = crate::json::to_string(&StudyConfig { output: None, ..config.clone() })?;
    Ok(Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// Work pool capped by `POLYHOM_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("POLYHOM_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("POLYHOM_THREADS = {v:?} is not a count")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidConfig(e.to_string()))
}

struct Context<'c> {
    cfg: &'c StudyConfig,
    source: GraphSource,
    regions: Vec<Window>,
    d: usize,
}

impl Context<'_> {
    fn graph(&self, region: &Window, seed: u64) -> Result<Arc<ExtendedGraph>> {
        self.source.graph(region, seed)
    }

    fn problem<'g>(&self, g: &'g ExtendedGraph, region: &Window, lambda: &[f64]) -> Result<CellProblem<'g>> {
        let mut p = CellProblem::on_region(
            g,
            region.clone(),
            Datum::linear(lambda.to_vec()),
            self.cfg.pair.clone(),
            self.cfg.volumetric.clone(),
        )?
        .with_mode(self.cfg.mode);
        if let Some(b) = self.cfg.band {
            p = p.with_band(b);
        }
        Ok(p)
    }

    fn main_region(&self) -> Result<Window> {
        self.cfg.main_region()
    }

    fn cell_setup(&self, seed: u64) -> CellSetup {
        CellSetup {
            source: self.source.clone(),
            origin: self.cfg.origin,
            pair: self.cfg.pair.clone(),
            vol: self.cfg.volumetric.clone(),
            mode: self.cfg.mode,
            band: self.cfg.band,
            solver: self.cfg.solver.for_seed(seed),
        }
    }

    fn ti_for(&self, seed: u64) -> TiParams {
        let mut ti = self.cfg.ti;
        ti.chain.seed ^= seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        ti.solver = ti.solver.for_seed(seed);
        ti
    }

    fn identity(&self) -> Vec<f64> {
        (0..self.d * self.d).map(|k| if k / self.d == k % self.d { 1.0 } else { 0.0 }).collect()
    }

    fn rank_one_matrix(&self, t: f64) -> Vec<f64> {
        let r = self.cfg.rank_one.as_ref().expect("validated");
        let base = if r.base.is_empty() { self.identity() } else { r.base.clone() };
        rank_one_line(&base, &r.a, &r.normal, t)
    }

    fn poincare_params(&self) -> PoincareParams {
        let graph = match &self.cfg.graph {
            super::GraphSpec::Generate(p) => p.clone(),
            _ => GraphParams::default(),
        };
        let mut p = PoincareParams { graph, windows: self.cfg.windows.clone(), seeds: self.cfg.seeds.clone(), ..Default::default() };
        if let Some(v) = self.cfg.p {
            p.p = v;
        }
        if let Some(v) = self.cfg.bumps {
            p.bumps = v;
        }
        if let Some(v) = self.cfg.delta {
            p.delta = v;
        }
        p.factor = self.cfg.thresholds.poincare_factor;
        p
    }

    fn jobs(&self) -> Vec<Job> {
        let c = self.cfg;
        let mut jobs = vec![];
        let main = self.regions.len().saturating_sub(1);
        let main = (0..self.regions.len())
            .max_by(|&a, &b| self.regions[a].volume().total_cmp(&self.regions[b].volume()))
            .unwrap_or(main);
        match c.kind {
            StudyKind::WInfConvergence => {
                for lambda in 0..c.lambdas.len() {
                    for region in 0..self.regions.len() {
                        for &seed in &c.seeds {
                            jobs.push(Job::Minimize { lambda, region, seed });
                        }
                    }
                }
            }
            StudyKind::GrowthSandwich => {
                for lambda in 0..c.lambdas.len() {
                    for &seed in &c.seeds {
                        jobs.push(Job::Minimize { lambda, region: main, seed });
                    }
                }
            }
            StudyKind::Phantom => {
                for region in 0..self.regions.len() {
                    for &beta in &c.betas {
                        jobs.push(Job::Phantom { lambda: None, region, beta });
                        for lambda in 0..c.lambdas.len() {
                            jobs.push(Job::Phantom { lambda: Some(lambda), region, beta });
                        }
                    }
                }
            }
            StudyKind::BetaGap => {
                for lambda in 0..c.lambdas.len() {
                    for &seed in &c.seeds {
                        jobs.push(Job::Gap { lambda, seed });
                    }
                }
            }
            StudyKind::TwoTemp => jobs.extend(c.seeds.iter().map(|&seed| Job::TwoTemp { seed })),
            StudyKind::RankOne => {
                for &t in &c.rank_one.as_ref().expect("validated").ts {
                    for &seed in &c.seeds {
                        jobs.push(Job::RankOne { t, seed });
                    }
                }
            }
            StudyKind::Concentration => {
                for lambda in 0..c.lambdas.len() {
                    for &seed in &c.seeds {
                        for (beta_index, &beta) in c.betas.iter().enumerate() {
                            jobs.push(Job::Concentration { lambda, beta_index, beta, seed });
                        }
                    }
                }
            }
            StudyKind::Poincare => {
                for &side in &c.windows {
                    for &seed in &c.seeds {
                        jobs.push(Job::Poincare { side, seed });
                    }
                }
            }
            StudyKind::Subadditivity => {
                for lambda in 0..c.lambdas.len() {
                    for partition in 0..c.partitions.len() {
                        for &seed in &c.seeds {
                            jobs.push(Job::Subadditivity { lambda, partition, seed });
                        }
                    }
                }
            }
        }
        jobs
    }

    fn execute(&self, job: &Job) -> Result<Value> {
        let c = self.cfg;
        let to_value = |v: &dyn erased::Ser| v.value();
        match *job {
            Job::Minimize { lambda, region, seed } => {
                let r = &self.regions[region];
                let g = self.graph(r, seed)?;
                let p = self.problem(&g, r, &c.lambdas[lambda])?;
                let m = minimize_cell(&p, &c.solver.for_seed(seed))?;
                Ok(json!({
                    "side": r.max_side(),
                    "density": m.density,
                    "energy": m.energy,
                    "affine_energy": m.affine_energy,
                    "restart_spread": m.restart_spread,
                    "grad_norm": m.grad_norm,
                    "tol_grad": m.tol_grad,
                    "iterations": m.iterations.iter().sum::<usize>(),
                    "free_dofs": m.free_dofs,
                }))
            }
            Job::Phantom { lambda, region, beta } => {
                let r = &self.regions[region];
                let g = self.graph(r, c.seeds[0])?;
                let lam = match lambda {
                    Some(k) => c.lambdas[k].clone(),
                    None => vec![0.0; c.lambdas[0].len()],
                };
                let model = QuadraticModel::from_problem(&self.problem(&g, r, &lam)?)?;
                let f = gaussian_free_energy(&model, beta)?;
                let h = model.h_min / model.domain_volume;
                Ok(json!({
                    "value": f.value,
                    "min_density": h,
                    "entropy_term": f.value - h,
                    "dofs": model.dofs(),
                    "domain_volume": model.domain_volume,
                }))
            }
            Job::Gap { lambda, seed } => {
                let r = self.main_region()?;
                let g = self.graph(&r, seed)?;
                let setup = GapSetup { problem: self.problem(&g, &r, &c.lambdas[lambda])?, ti: self.ti_for(seed), solver: c.solver.for_seed(seed) };
                to_value(&zero_temp_gap(&setup, &c.betas)?)
            }
            Job::TwoTemp { seed } => {
                let r = self.main_region()?;
                let g = self.graph(&r, seed)?;
                let setup = GapSetup { problem: self.problem(&g, &r, &c.lambdas[0])?, ti: self.ti_for(seed), solver: c.solver.for_seed(seed) };
                let report = two_temperature_study(&setup, c.beta_circ.expect("validated"), c.n_circ.expect("validated"), &c.n_grid)?;
                to_value(&report)
            }
            Job::RankOne { t, seed } => {
                let r = self.main_region()?;
                let g = self.graph(&r, seed)?;
                let p = self.problem(&g, &r, &self.rank_one_matrix(t))?;
                let m = minimize_cell(&p, &c.solver.for_seed(seed))?;
                Ok(json!({ "density": m.density, "restart_spread": m.restart_spread }))
            }
            Job::Concentration { lambda, beta_index, beta, seed } => {
                let r = self.main_region()?;
                let g = self.graph(&r, seed)?;
                let p = self.problem(&g, &r, &c.lambdas[lambda])?;
                let m = minimize_cell(&p, &c.solver.for_seed(seed))?;
                let mut chain = c.chain;
                chain.seed ^= seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
                chain.stream = beta_index as u64;
                if chain.thin == 0 {
                    chain.thin = 10;
                }
                let out = sample_gibbs(&p, beta, &chain)?;
                let vertices = p.assembly()?.vertices;
                let s = concentration_diagnostic(&out.samples, &m.deformation, &vertices, p.eps, self.d, c.p.unwrap_or(2.0));
                Ok(json!({
                    "median": s.median,
                    "p95": s.p95,
                    "p95_stderr": s.p95_stderr,
                    "samples": s.distances.len(),
                    "acceptance": out.acceptance,
                    "min_density": m.density,
                }))
            }
            Job::Poincare { side, seed } => to_value(&poincare_point(&self.poincare_params(), side, seed)?),
            Job::Subadditivity { lambda, partition, seed } => {
                let whole = self.main_region()?;
                let g = self.graph(&whole, seed)?;
                let parts = c.partitions[partition].boxes(&whole);
                let rep = subadditivity_check(&g, &c.lambdas[lambda], &whole, &parts, &self.cell_setup(seed))?;
                let scale = rep.sigma_whole.abs().max(rep.sigma_parts.iter().sum::<f64>().abs()).max(1.0);
                let mut v = serde_json::to_value(&rep).map_err(|e| Error::Parse(e.to_string()))?;
                v["scale"] = json!(scale);
                v["partition"] = json!(c.partitions[partition]);
                Ok(v)
            }
        }
    }
}

mod erased {
    use serde::Serialize;
    use serde_json::Value;

    use crate::error::{Error, Result};

    pub trait Ser {
        fn value(&self) -> Result<Value>;
    }

    impl<T: Serialize> Ser for T {
        fn value(&self) -> Result<Value> {
            serde_json::to_value(self).map_err(|e| Error::Parse(e.to_string()))
        }
    }
}

fn num(v: &Value, key: &str) -> Option<f64> {
    v.get(key).and_then(Value::as_f64)
}

fn summarize_study(ctx: &Context, jobs: &[Job], records: &[PointRecord]) -> (Value, bool) {
    let c = ctx.cfg;
    let th = c.thresholds;
    let ok: Vec<(&Job, &Value)> =
        jobs.iter().zip(records).filter(|(_, r)| r.status == PointStatus::Ok).map(|(j, r)| (j, &r.outputs)).collect();
    match c.kind {
        StudyKind::WInfConvergence => {
            let mut groups = vec![];
            let mut verdict = true;
            for (k, lam) in c.lambdas.iter().enumerate() {
                let mut points = vec![];
                for (ri, r) in ctx.regions.iter().enumerate() {
                    let outs: Vec<&Value> = ok
                        .iter()
                        .filter(|(j, _)| matches!(j, Job::Minimize { lambda, region, .. } if *lambda == k && *region == ri))
                        .map(|(_, v)| *v)
                        .collect();
                    if outs.is_empty() {
                        continue;
                    }
                    let densities: Vec<f64> = outs.iter().filter_map(|v| num(v, "density")).collect();
                    let (mean, stderr) = mean_stderr(&densities);
                    points.push(WindowPoint {
                        side: r.max_side(),
                        mean,
                        stderr,
                        restart_spread: outs.iter().filter_map(|v| num(v, "restart_spread")).fold(0.0, f64::max),
                        iterations: outs.iter().filter_map(|v| v["iterations"].as_u64()).sum::<u64>() as usize,
                        densities,
                    });
                }
                match w_inf_from_points(lam, points) {
                    Ok(est) => {
                        let spread = est.points.iter().map(|p| p.restart_spread).fold(0.0, f64::max);
                        let pass = est.cauchy_gap <= th.cauchy_gap && spread <= th.restart_spread;
                        verdict &= pass;
                        groups.push(json!({ "lambda": lam, "estimate": est, "max_restart_spread": spread, "pass": pass }));
                    }
                    Err(e) => {
                        verdict = false;
                        groups.push(json!({ "lambda": lam, "error": e.to_string(), "pass": false }));
                    }
                }
            }
            (json!({ "groups": groups }), verdict)
        }
        StudyKind::GrowthSandwich => {
            let mut pts = vec![];
            let mut spread = 0.0f64;
            for (k, lam) in c.lambdas.iter().enumerate() {
                let outs: Vec<&Value> =
                    ok.iter().filter(|(j, _)| matches!(j, Job::Minimize { lambda, .. } if *lambda == k)).map(|(_, v)| *v).collect();
                if outs.is_empty() {
                    continue;
                }
                let ds: Vec<f64> = outs.iter().filter_map(|v| num(v, "density")).collect();
                spread = outs.iter().filter_map(|v| num(v, "restart_spread")).fold(spread, f64::max);
                pts.push((Datum::linear(lam.clone()).norm(), mean_stderr(&ds).0));
            }
            let p = c.p.unwrap_or_else(|| c.pair.growth_exponent());
            match growth_sandwich(&pts, p) {
                Ok(f) => {
                    let pass = f.holds;
                    (json!({ "points": pts, "fit": f, "max_restart_spread": spread }), pass)
                }
                Err(e) => (json!({ "points": pts, "error": e.to_string() }), false),
            }
        }
        StudyKind::Phantom => {
            let mut rows = vec![];
            let mut worst = 0.0f64;
            let mut complete = true;
            for ri in 0..ctx.regions.len() {
                for &beta in &c.betas {
                    let find = |l: Option<usize>| {
                        ok.iter()
                            .find(|(j, _)| matches!(j, Job::Phantom { lambda, region, beta: b } if *lambda == l && *region == ri && *b == beta))
                            .map(|(_, v)| *v)
                    };
                    let Some(zero) = find(None) else {
                        complete = false;
                        continue;
                    };
                    let (v0, h0) = (num(zero, "value").unwrap_or(f64::NAN), num(zero, "min_density").unwrap_or(f64::NAN));
                    let mut errs = vec![];
                    for k in 0..c.lambdas.len() {
                        let Some(o) = find(Some(k)) else {
                            complete = false;
                            continue;
                        };
                        let (v, h) = (num(o, "value").unwrap_or(f64::NAN), num(o, "min_density").unwrap_or(f64::NAN));
                        let rhs = h - h0;
                        let err = ((v - v0) - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
                        let err = if rhs == 0.0 && v == v0 { 0.0 } else { err };
                        worst = if err.is_nan() { f64::INFINITY } else { worst.max(err) };
                        errs.push(err);
                    }
                    rows.push(json!({
                        "region": ri,
                        "side": ctx.regions[ri].max_side(),
                        "beta": beta,
                        "gap": v0 - h0,
                        "max_relative_error": errs.iter().copied().fold(0.0, f64::max),
                    }));
                }
            }
            let pass = complete && worst <= th.identity_relative;
            (json!({ "rows": rows, "max_relative_error": worst, "threshold": th.identity_relative }), pass)
        }
        StudyKind::BetaGap => {
            let mut groups = vec![];
            let mut verdict = !ok.is_empty();
            for (j, v) in &ok {
                let Job::Gap { lambda, seed } = j else { continue };
                let Ok(rep) = serde_json::from_value::<GapReport>((*v).clone()) else { continue };
                let x: Vec<f64> = rep.points.iter().map(|p| p.beta).collect();
                let y: Vec<f64> = rep.points.iter().map(|p| p.gap).collect();
                let s: Vec<f64> = rep.points.iter().map(|p| p.gap_stderr).collect();
                let sigma = s.iter().all(|v| *v > 0.0).then_some(&s[..]);
                let fit = fit_scaling(&x, &y, sigma, ScalingModel::PowerLog, th.ratio_factor);
                let pass = rep.decreasing && rep.ratio_factor <= th.ratio_factor;
                verdict &= pass;
                groups.push(json!({
                    "lambda": lambda,
                    "seed": seed,
                    "ratio_factor": rep.ratio_factor,
                    "decreasing": rep.decreasing,
                    "monotone_coupling": rep.monotone_coupling,
                    "fit": fit.ok(),
                    "pass": pass,
                }));
            }
            (json!({ "groups": groups }), verdict)
        }
        StudyKind::TwoTemp => {
            let mut verdict = !ok.is_empty();
            let mut groups = vec![];
            for (j, v) in &ok {
                let holds = v["identity_holds"].as_bool().unwrap_or(false);
                let factor = num(v, "ratio_factor").unwrap_or(f64::INFINITY);
                let pass = holds && factor <= th.ratio_factor;
                verdict &= pass;
                groups.push(json!({ "job": j, "identity_holds": holds, "identity_relative": v["identity_relative"], "ratio_factor": factor, "pass": pass }));
            }
            (json!({ "groups": groups }), verdict)
        }
        StudyKind::RankOne => {
            let spec = c.rank_one.as_ref().expect("validated");
            let mut by_t: HashMap<u64, Vec<f64>> = HashMap::new();
            for (j, v) in &ok {
                if let Job::RankOne { t, .. } = j {
                    if let Some(dn) = num(v, "density") {
                        by_t.entry(t.to_bits()).or_default().push(dn);
                    }
                }
            }
            let ts: Vec<f64> = spec.ts.iter().copied().filter(|t| by_t.contains_key(&t.to_bits())).collect();
            let lines: Vec<(Vec<f64>, u64)> = ts.iter().map(|&t| (ctx.rank_one_matrix(t), t.to_bits())).collect();
            let estimator = |m: &[f64]| -> Result<Vec<f64>> {
                let key = lines.iter().find(|(l, _)| l == m).map(|(_, k)| *k).ok_or_else(|| Error::GridTooSmall("missing point".into()))?;
                Ok(by_t[&key].clone())
            };
            let base = if spec.base.is_empty() { ctx.identity() } else { spec.base.clone() };
            match rank_one_probe(&base, &spec.a, &spec.normal, &ts, spec.tolerance, estimator) {
                Ok(rep) => {
                    let pass = ts.len() == spec.ts.len() && rep.defects.iter().all(|d| d.within_tolerance);
                    (json!({ "report": rep }), pass)
                }
                Err(e) => (json!({ "error": e.to_string() }), false),
            }
        }
        StudyKind::Concentration => {
            let mut groups = vec![];
            let mut verdict = !ok.is_empty();
            for (k, _) in c.lambdas.iter().enumerate() {
                for &seed in &c.seeds {
                    let mut rows: Vec<(f64, f64, f64, f64)> = ok
                        .iter()
                        .filter_map(|(j, v)| match j {
                            Job::Concentration { lambda, beta, seed: s, .. } if *lambda == k && *s == seed => Some((
                                *beta,
                                num(v, "p95").unwrap_or(f64::NAN),
                                num(v, "p95_stderr").unwrap_or(0.0),
                                num(v, "median").unwrap_or(f64::NAN),
                            )),
                            _ => None,
                        })
                        .collect();
                    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let pass = rows.len() == c.betas.len()
                        && rows.windows(2).all(|w| w[1].1 <= w[0].1 + 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
                    verdict &= pass;
                    groups.push(json!({ "lambda": k, "seed": seed, "beta_p95_stderr_median": rows, "pass": pass }));
                }
            }
            (json!({ "groups": groups }), verdict)
        }
        StudyKind::Poincare => {
            let points: Vec<PoincarePoint> =
                ok.iter().filter_map(|(_, v)| serde_json::from_value((*v).clone()).ok()).collect();
            let complete = points.len() == jobs.len();
            let rep = summarize(&ctx.poincare_params(), points);
            let pass = complete && rep.bounded;
            (json!({ "max_ratio": rep.max_ratio, "spread": rep.spread, "bounded": rep.bounded }), pass)
        }
        StudyKind::Subadditivity => {
            let mut worst = f64::INFINITY;
            let mut verdict = ok.len() == jobs.len();
            for (_, v) in &ok {
                let slack = num(v, "slack").unwrap_or(f64::NEG_INFINITY);
                let scale = num(v, "scale").unwrap_or(1.0);
                worst = worst.min(slack / scale);
                verdict &= slack >= -th.slack * scale;
            }
            (json!({ "min_relative_slack": worst, "threshold": -th.slack }), verdict)
        }
    }
}

fn load_checkpoint(path: &Path, hash: &str) -> Result<HashMap<usize, PointRecord>> {
    let mut out = HashMap::new();
    let Ok(f) = File::open(path) else { return Ok(out) };
    for line in BufReader::new(f).lines() {
        let line = line?;
        // a torn last line from an interrupted run is skipped
        if let Ok(r) = serde_json::from_str::<PointRecord>(&line) {
            if r.config_hash == hash && r.code_version == CODE_VERSION {
                out.insert(r.index, r);
            }
        }
    }
    Ok(out)
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// One row per point; columns are `index,status,error`, then sorted input and output keys.
fn write_csv(path: &Path, records: &[PointRecord]) -> Result<()> {
    let keys = |f: &dyn Fn(&PointRecord) -> &Value| -> BTreeSet<String> {
        records
            .iter()
            .filter_map(|r| f(r).as_object())
            .flat_map(|o| o.iter().filter(|(_, v)| scalar(v).is_some()).map(|(k, _)| k.clone()))
            .collect()
    };
    let ins = keys(&|r| &r.inputs);
    let outs = keys(&|r| &r.outputs);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    let header: Vec<String> = ["index", "status", "error"]
        .iter()
        .map(|s| s.to_string())
        .chain(ins.iter().map(|k| format!("in.{k}")))
        .chain(outs.iter().map(|k| format!("out.{k}")))
        .collect();
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        let cell = |v: &Value, k: &str| v.get(k).and_then(scalar).unwrap_or_default();
        let status = match r.status {
            PointStatus::Ok => "ok",
            PointStatus::Failed => "failed",
        };
        let row: Vec<String> = [r.index.to_string(), status.to_string(), r.error.clone().unwrap_or_default()]
            .into_iter()
            .chain(ins.iter().map(|k| cell(&r.inputs, k)))
            .chain(outs.iter().map(|k| cell(&r.outputs, k)))
            .collect();
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every point of a study, resuming from `output/checkpoint.jsonl` when present.
///
/// Writes `results.csv` and `summary.json` to `output` (or `config.output`) when one is given.
pub fn run_study(config: &StudyConfig, output: Option<&Path>) -> Result<StudyResult> {
    config.validate()?;
    let hash = config_hash(config)?;
    let ctx = Context { cfg: config, source: config.source()?, regions: config.regions()?, d: config.dim()? };
    let jobs = ctx.jobs();
    let out_dir = output.map(Path::to_path_buf).or_else(|| config.output.clone());
    let checkpoint = out_dir.as_ref().map(|d| d.join("checkpoint.jsonl"));
    if let Some(d) = &out_dir {
        fs::create_dir_all(d)?;
    }
    let done = match &checkpoint {
        Some(p) => load_checkpoint(p, &hash)?,
        None => HashMap::new(),
    };
    let writer = match &checkpoint {
        Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p)?)),
        None => None,
    };
    let pending: Vec<usize> = (0..jobs.len())
        .filter(|i| done.get(i).is_none_or(|r| r.inputs != serde_json::to_value(&jobs[*i]).unwrap_or(Value::Null)))
        .collect();
    let resumed = jobs.len() - pending.len();
    let pool = thread_pool()?;
    let fresh: Vec<Result<PointRecord>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&i| {
                let inputs = serde_json::to_value(&jobs[i]).map_err(|e| Error::Parse(e.to_string()))?;
                let (status, error, outputs) = match ctx.execute(&jobs[i]) {
                    Ok(v) => (PointStatus::Ok, None, v),
                    Err(e) => (PointStatus::Failed, Some(e.to_string()), Value::Null),
                };
                let rec = PointRecord { config_hash: hash.clone(), code_version: CODE_VERSION.to_string(), index: i, inputs, status, error, outputs };
                if let Some(w) = &writer {
                    let line = crate::json::to_string(&rec)?;
                    let mut f = w.lock().expect("checkpoint writer");
                    writeln!(f, "{line}")?;
                    f.flush()?;
                }
                Ok(rec)
            })
            .collect()
    });
    let mut by_index: BTreeMap<usize, PointRecord> = done.into_iter().filter(|(i, _)| !pending.contains(i)).collect();
    for r in fresh {
        let r = r?;
        by_index.insert(r.index, r);
    }
    let records: Vec<PointRecord> = by_index.into_values().collect();
    let failed = records.iter().filter(|r| r.status == PointStatus::Failed).count();
    let (summary, verdict) = summarize_study(&ctx, &jobs, &records);
    let verdict = verdict && failed == 0;
    let result = StudyResult {
        config_hash: hash,
        code_version: CODE_VERSION.to_string(),
        kind: config.kind,
        config: config.clone(),
        records,
        summary,
        verdict,
        failed,
        resumed,
    };
    if let Some(d) = &out_dir {
        write_csv(&d.join("results.csv"), &result.records)?;
        fs::write(d.join("summary.json"), crate::json::to_string_pretty(&result)?)?;
    }
    Ok(result)
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use polyhom::energy::{Deformation, Role};
use polyhom::finite_temp::{free_energy_ti, gaussian_free_energy, QuadraticModel};
use polyhom::graph::{generate_graph, read_graph, validate_graph, write_graph, ExtendedGraph, GraphParams, Window};
use polyhom::studies::{config_hash, run_study, StudyConfig, StudyKind, StudyResult};
use polyhom::zero_temp::{minimize_cell, CellProblem, Datum};
use polyhom::{Error, Result};

/// Discrete polymer-network homogenization: graphs, energies, cell problems and free energies.
#[derive(Parser)]
#[command(name = "polyhom", version, about, propagate_version = true)]
struct Cli {
    /// Directory for every file the command writes.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Caps the work pool (same as POLYHOM_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    #[command(subcommand)]
    Graph(GraphCmd),
    #[command(subcommand)]
    Energy(EnergyCmd),
    #[command(subcommand)]
    ZeroTemp(ZeroTempCmd),
    #[command(subcommand)]
    FreeEnergy(FreeEnergyCmd),
    /// Checks the quadratic phantom identity on every Λ and β of the config.
    PhantomCheck(ConfigArg),
    /// Zero-temperature gap over a β grid.
    GapSweep(ConfigArg),
    /// Rescaled two-temperature study over an N° grid.
    TwoTemp(ConfigArg),
    #[command(subcommand)]
    Study(StudyCmd),
    /// Discrete Poincaré ratios over a window sweep.
    Poincare(ConfigArg),
    /// Midpoint convexity along a rank-one line.
    RankOne(ConfigArg),
}

#[derive(Subcommand)]
enum GraphCmd {
    /// Samples a graph on a cube window and writes it as JSON.
    Generate {
        /// Graph parameters as JSON; defaults to a jittered lattice.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long, default_value_t = 32.0)]
        side: f64,
        #[arg(long, default_value_t = 0.0)]
        origin: f64,
    },
    /// Checks a graph file against the admissibility conditions.
    Validate { path: PathBuf },
}

#[derive(Subcommand)]
enum EnergyCmd {
    /// Energy of the affine state, or of a stored deformation.
    Eval {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        deformation: Option<PathBuf>,
    },
    /// Analytic gradient against central differences at random states.
    GradCheck {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

#[derive(Subcommand)]
enum ZeroTempCmd {
    /// Minimizes the cell problem on the config's largest region.
    Minimize {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Extrapolated W̄^∞ over the config's windows.
    Sweep(ConfigArg),
}

#[derive(Subcommand)]
enum FreeEnergyCmd {
    /// Closed-form Gaussian free energy of a quadratic problem.
    Exact {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
    },
    /// Thermodynamic integration from a Gaussian reference.
    Ti {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum StudyCmd {
    /// Runs a study config, resuming from the output directory's checkpoint.
    Run(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    #[arg(short, long)]
    config: PathBuf,
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Row-major Λ; defaults to the config's first matrix.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
}

struct Ctx {
    output: Option<PathBuf>,
    seed: Option<u64>,
    verbose: u8,
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        std::env::set_var("POLYHOM_THREADS", n.to_string());
    }
    let ctx = Ctx { output: cli.output, seed: cli.seed, verbose: cli.verbose };
    let start = Instant::now();
    let res = dispatch(&ctx, cli.cmd);
    if ctx.verbose > 0 {
        eprintln!("elapsed {:.2?}", start.elapsed());
    }
    match res {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::GridTooSmall(_) => {
                    eprintln!("see the Configuration section of README.md for the config schema");
                    ExitCode::from(2)
                }
                Error::Io(_) | Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Graph(GraphCmd::Generate { params, dim, side, origin }) => graph_generate(ctx, params, dim, side, origin),
        Cmd::Graph(GraphCmd::Validate { path }) => graph_validate(&path),
        Cmd::Energy(EnergyCmd::Eval { problem, deformation }) => energy_eval(ctx, &problem, deformation),
        Cmd::Energy(EnergyCmd::GradCheck { problem, samples, noise, step, tolerance }) => {
            grad_check(ctx, &problem, samples, noise, step, tolerance)
        }
        Cmd::ZeroTemp(ZeroTempCmd::Minimize { problem }) => minimize(ctx, &problem),
        Cmd::ZeroTemp(ZeroTempCmd::Sweep(c)) => study(ctx, &c.config, Some(StudyKind::WInfConvergence)),
        Cmd::FreeEnergy(FreeEnergyCmd::Exact { problem, beta }) => free_energy(ctx, &problem, &beta, false),
        Cmd::FreeEnergy(FreeEnergyCmd::Ti { problem, beta }) => free_energy(ctx, &problem, &beta, true),
        Cmd::PhantomCheck(c) => study(ctx, &c.config, Some(StudyKind::Phantom)),
        Cmd::GapSweep(c) => study(ctx, &c.config, Some(StudyKind::BetaGap)),
        Cmd::TwoTemp(c) => study(ctx, &c.config, Some(StudyKind::TwoTemp)),
        Cmd::Study(StudyCmd::Run(c)) => study(ctx, &c.config, None),
        Cmd::Poincare(c) => study(ctx, &c.config, Some(StudyKind::Poincare)),
        Cmd::RankOne(c) => study(ctx, &c.config, Some(StudyKind::RankOne)),
    }
}

fn load_config(ctx: &Ctx, path: &Path) -> Result<StudyConfig> {
    let mut c = StudyConfig::read(path)?;
    if let Some(s) = ctx.seed {
        c.seeds = vec![s];
    }
    Ok(c)
}

fn out_dir(ctx: &Ctx, config: Option<&StudyConfig>, fallback: &str) -> Result<PathBuf> {
    let dir = ctx
        .output
        .clone()
        .or_else(|| config.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("polyhom-out").join(fallback));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    fs::write(path, polyhom::json::to_string_pretty(v)?)?;
    Ok(())
}

fn fmt(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut w: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (k, c) in r.iter().enumerate() {
            w[k] = w[k].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| cells.iter().enumerate().map(|(k, c)| format!("{c:>w$}", w = w[k])).collect::<Vec<_>>().join("  ");
    println!("{}", line(header.to_vec()));
    for r in rows {
        println!("{}", line(r.iter().map(String::as_str).collect()));
    }
}

fn graph_generate(ctx: &Ctx, params: Option<PathBuf>, dim: Option<usize>, side: f64, origin: f64) -> Result<Outcome> {
    let mut p: GraphParams = match params {
        Some(f) => {
            let text = fs::read_to_string(&f).map_err(|e| Error::Io(format!("{}: {e}", f.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", f.display())))?
        }
        None => GraphParams::default(),
    };
    if let Some(d) = dim {
        p.dim = d;
    }
    if let Some(s) = ctx.seed {
        p.seed = s;
    }
    let g = generate_graph(&p, &Window::cube(p.dim, origin, origin + side))?;
    let dir = out_dir(ctx, None, "graph")?;
    let path = dir.join("graph.json");
    write_graph(&g, &path)?;
    let report = validate_graph(&g);
    println!("vertices {}  edges {}  simplices {}  max degree {}", g.len(), g.edges.len(), g.simplices.len(), g.max_degree());
    println!("validation {}", if report.verdict { "pass" } else { "fail" });
    println!("wrote {}", path.display());
    Ok(if report.verdict { Outcome::Pass } else { Outcome::Fail })
}

fn graph_validate(path: &Path) -> Result<Outcome> {
    if !path.exists() {
        return Err(Error::Io(format!("{}: file not found", path.display())));
    }
    let g = read_graph(path)?;
    let r = validate_graph(&g);
    let rows: Vec<Vec<String>> = [
        ("covering", &r.covering),
        ("separation", &r.separation),
        ("edge range", &r.edge_range),
        ("corridor", &r.corridor),
        ("general position", &r.general_position),
    ]
    .iter()
    .map(|(name, c)| vec![name.to_string(), if c.passed { "pass" } else { "fail" }.into(), c.witness.to_string(), c.detail.clone()])
    .collect();
    print_table(&["condition", "status", "witness", "detail"], &rows);
    println!("components {}", r.components);
    println!("verdict {}", if r.verdict { "pass" } else { "fail" });
    Ok(if r.verdict { Outcome::Pass } else { Outcome::Fail })
}

/// The config's graph and largest region, with Λ from the flag or the config.
struct Problem {
    config: StudyConfig,
    graph: std::sync::Arc<ExtendedGraph>,
    region: Window,
    lambda: Vec<f64>,
}

impl Problem {
    fn load(ctx: &Ctx, args: &ProblemArgs) -> Result<Self> {
        let config = load_config(ctx, &args.config)?;
        let region = config.main_region()?;
        let lambda = match &args.lambda {
            Some(l) => l.clone(),
            None => config.lambdas.first().cloned().ok_or_else(|| Error::InvalidConfig("no --lambda and no lambdas in config".into()))?,
        };
        let graph = config.source()?.graph(&region, config.seeds[0])?;
        Ok(Problem { config, graph, region, lambda })
    }

    fn cell(&self) -> Result<CellProblem<'_>> {
        let c = &self.config;
        let mut p = CellProblem::on_region(&self.graph, self.region.clone(), Datum::linear(self.lambda.clone()), c.pair.clone(), c.volumetric.clone())?
            .with_mode(c.mode);
        if let Some(b) = c.band {
            p = p.with_band(b);
        }
        Ok(p)
    }
}

fn energy_eval(ctx: &Ctx, args: &ProblemArgs, deformation: Option<PathBuf>) -> Result<Outcome> {
    let pb = Problem::load(ctx, args)?;
    let cell = pb.cell()?;
    let asm = cell.assembly()?;
    let u = match deformation {
        Some(f) => Deformation::read(f)?,
        None => cell.affine_state(),
    };
    if u.values.len() != asm.n * pb.graph.len() {
        return Err(Error::DimensionMismatch(format!("deformation has {} values, problem needs {}", u.values.len(), asm.n * pb.graph.len())));
    }
    let pair = asm.pair_part(&u.values)?;
    let vol = asm.volumetric_part(&u.values)?;
    let volume = cell.region.volume() * cell.eps.powi(pb.graph.dim() as i32);
    let out = json!({ "energy": pair + vol, "pair": pair, "volumetric": vol, "density": (pair + vol) / volume, "domain_volume": volume });
    print_table(
        &["energy", "pair", "volumetric", "density"],
        &[vec![fmt(&out["energy"]), fmt(&out["pair"]), fmt(&out["volumetric"]), fmt(&out["density"])]],
    );
    write_json(&out_dir(ctx, Some(&pb.config), "energy")?.join("energy.json"), &out)?;
    Ok(Outcome::Pass)
}

fn grad_check(ctx: &Ctx, args: &ProblemArgs, samples: usize, noise: f64, step: f64, tolerance: f64) -> Result<Outcome> {
    let pb = Problem::load(ctx, args)?;
    let cell = pb.cell()?;
    let asm = cell.assembly()?;
    let base = cell.affine_state();
    let mut rng = ChaCha8Rng::seed_from_u64(pb.config.seeds[0]);
    let mut errors = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut u = base.values.clone();
        for &v in &asm.vertices {
            if base.roles[v] != Role::Clamped {
                for k in v * asm.n..(v + 1) * asm.n {
                    u[k] += noise * rng.random_range(-1.0..1.0);
                }
            }
        }
        errors.push(asm.gradient_check(&u, step)?);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let pass = worst <= tolerance;
    let out = json!({ "samples": samples, "step": step, "max_relative_error": worst, "tolerance": tolerance, "pass": pass });
    println!("max relative error {} over {samples} states (tolerance {tolerance:e})", fmt(&out["max_relative_error"]));
    println!("verdict {}", if pass { "pass" } else { "fail" });
    write_json(&out_dir(ctx, Some(&pb.config), "grad-check")?.join("grad_check.json"), &out)?;
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn minimize(ctx: &Ctx, args: &ProblemArgs) -> Result<Outcome> {
    let pb = Problem::load(ctx, args)?;
    let cell = pb.cell()?;
    let seed = pb.config.seeds[0];
    let m = minimize_cell(&cell, &pb.config.solver.for_seed(seed))?;
    let out = json!({
        "lambda": pb.lambda,
        "seed": seed,
        "density": m.density,
        "energy": m.energy,
        "affine_energy": m.affine_energy,
        "restart_spread": m.restart_spread,
        "grad_norm": m.grad_norm,
        "free_dofs": m.free_dofs,
    });
    let keys = ["density", "energy", "affine_energy", "restart_spread", "grad_norm", "free_dofs"];
    print_table(&keys, &[keys.iter().map(|k| fmt(&out[*k])).collect()]);
    let dir = out_dir(ctx, Some(&pb.config), "minimize")?;
    write_json(&dir.join("minimize.json"), &out)?;
    m.deformation.write(dir.join("minimizer.bin"))?;
    Ok(Outcome::Pass)
}

fn free_energy(ctx: &Ctx, args: &ProblemArgs, betas: &[f64], ti: bool) -> Result<Outcome> {
    let pb = Problem::load(ctx, args)?;
    let cell = pb.cell()?;
    let model = if ti { None } else { Some(QuadraticModel::from_problem(&cell)?) };
    let mut rows = vec![];
    let mut out = vec![];
    for &beta in betas {
        let f = match &model {
            Some(m) => gaussian_free_energy(m, beta)?,
            None => free_energy_ti(&cell, beta, &pb.config.ti)?,
        };
        let v = serde_json::to_value(&f)?;
        rows.push(vec![beta.to_string(), fmt(&v["value"]), fmt(&v["stderr"]), fmt(&v["meta"]["dofs"])]);
        out.push(v);
    }
    print_table(&["beta", "value", "stderr", "dofs"], &rows);
    let dir = out_dir(ctx, Some(&pb.config), "free-energy")?;
    write_json(&dir.join("free_energy.json"), &out)?;
    Ok(Outcome::Pass)
}

fn study(ctx: &Ctx, path: &Path, kind: Option<StudyKind>) -> Result<Outcome> {
    let mut config = load_config(ctx, path)?;
    if let Some(k) = kind {
        config.kind = k;
    }
    let hash = config_hash(&config)?;
    let kind_name = serde_json::to_value(config.kind)?.as_str().unwrap_or("study").to_string();
    let dir = out_dir(ctx, Some(&config), &format!("{kind_name}-{}", &hash[..12]))?;
    let r = run_study(&config, Some(&dir))?;
    if ctx.verbose > 0 {
        eprintln!("{} points, {} resumed from checkpoint, {} failed", r.records.len(), r.resumed, r.failed);
    }
    print_results(&dir.join("results.csv"))?;
    report(&config, &r);
    println!("verdict {}", if r.verdict { "pass" } else { "fail" });
    println!("wrote {}", dir.display());
    Ok(if r.verdict { Outcome::Pass } else { Outcome::Fail })
}

fn print_results(csv_path: &Path) -> Result<()> {
    let mut rd = csv::Reader::from_path(csv_path).map_err(|e| Error::Io(e.to_string()))?;
    let header: Vec<String> = rd.headers().map_err(|e| Error::Io(e.to_string()))?.iter().map(String::from).collect();
    let rows: Vec<Vec<String>> = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Io(e.to_string()))?;
    print_table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows);
    Ok(())
}

fn report(config: &StudyConfig, r: &StudyResult) {
    let s = &r.summary;
    match config.kind {
        StudyKind::Phantom => {
            if let Some(rows) = s["rows"].as_array() {
                println!();
                let body: Vec<Vec<String>> = rows
                    .iter()
                    .map(|row| ["side", "beta", "gap", "max_relative_error"].iter().map(|k| fmt(&row[*k])).collect())
                    .collect();
                print_table(&["side", "beta", "gap", "max_relative_error"], &body);
            }
            if r.verdict {
                println!("identity holds to {:e}", config.thresholds.identity_relative);
            } else {
                println!("identity fails: max relative error {}", fmt(&s["max_relative_error"]));
            }
        }
        _ => {
            println!();
            println!("{}", serde_json::to_string_pretty(s).unwrap_or_default());
        }
    }
}

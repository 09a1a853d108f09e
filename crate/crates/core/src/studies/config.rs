use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use crate::energy::{PairPotential, VolumetricPotential};
use crate::error::{Error, Result};
use crate::finite_temp::{ChainParams, TiParams};
use crate::graph::{axis_lattice, read_graph, ExtendedGraph, GraphParams, Window};
use crate::zero_temp::{BoundaryMode, GraphSource, SolverParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    WInfConvergence,
    BetaGap,
    Phantom,
    TwoTemp,
    GrowthSandwich,
    RankOne,
    Concentration,
    Poincare,
    Subadditivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSpec {
    /// A fresh graph per region and seed.
    Generate(GraphParams),
    /// Integer lattice with axis edges, shared by every point.
    Lattice { shape: Vec<usize> },
    /// A stored graph, shared by every point.
    File(PathBuf),
}

impl Default for GraphSpec {
    fn default() -> Self {
        GraphSpec::Generate(GraphParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOneSpec {
    /// Base matrix; the identity when empty.
    #[serde(default)]
    pub base: Vec<f64>,
    pub a: Vec<f64>,
    pub normal: Vec<f64>,
    pub ts: Vec<f64>,
    #[serde(default)]
    pub tolerance: f64,
}

/// `rows x cols` boxes (`"2x2"`, `"4x1"`) tiling the whole cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub rows: usize,
    pub cols: usize,
}

impl Serialize for PartitionSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}x{}", self.rows, self.cols))
    }
}

impl<'de> Deserialize<'de> for PartitionSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let parse = || -> Option<PartitionSpec> {
            let (a, b) = s.split_once('x')?;
            let (rows, cols) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (rows > 0 && cols > 0).then_some(PartitionSpec { rows, cols })
        };
        parse().ok_or_else(|| serde::de::Error::custom(format!("partition {s:?} is not of the form RxC")))
    }
}

impl PartitionSpec {
    /// Boxes splitting the first axis into `rows` and the second into `cols` equal parts.
    pub fn boxes(&self, whole: &Window) -> Vec<Window> {
        let mut out = vec![];
        let step0 = whole.side(0) / self.rows as f64;
        let step1 = if whole.dim() > 1 { whole.side(1) / self.cols as f64 } else { 0.0 };
        for r in 0..self.rows {
            for c in 0..if whole.dim() > 1 { self.cols } else { 1 } {
                let mut lo = whole.lo.clone();
                let mut hi = whole.hi.clone();
                lo[0] = whole.lo[0] + r as f64 * step0;
                hi[0] = if r + 1 == self.rows { whole.hi[0] } else { whole.lo[0] + (r + 1) as f64 * step0 };
                if whole.dim() > 1 {
                    lo[1] = whole.lo[1] + c as f64 * step1;
                    hi[1] = if c + 1 == self.cols { whole.hi[1] } else { whole.lo[1] + (c + 1) as f64 * step1 };
                }
                out.push(Window { lo, hi });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub cauchy_gap: f64,
    pub restart_spread: f64,
    pub ratio_factor: f64,
    pub identity_relative: f64,
    pub poincare_factor: f64,
    /// Subadditivity slack floor, relative to the energy scale.
    pub slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            cauchy_gap: 0.02,
            restart_spread: 0.01,
            ratio_factor: 3.0,
            identity_relative: 1e-10,
            poincare_factor: 2.0,
            slack: 1e-8,
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A study: what to sweep, on which graphs, with which estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub kind: StudyKind,
    #[serde(default)]
    pub graph: GraphSpec,
    pub pair: PairPotential,
    #[serde(default)]
    pub volumetric: VolumetricPotential,
    /// Row-major `n x d` matrices.
    #[serde(default)]
    pub lambdas: Vec<Vec<f64>>,
    /// Cube sides; a single number is accepted.
    #[serde(default, deserialize_with = "one_or_many")]
    pub windows: Vec<f64>,
    /// Explicit region in graph coordinates, used instead of `windows`.
    #[serde(default)]
    pub region: Option<Window>,
    /// Lower corner of every cube `[origin, origin + L)^d`.
    #[serde(default)]
    pub origin: f64,
    /// Generated graphs cover the region expanded by this much (`C0 + 1` by default).
    #[serde(default)]
    pub margin: Option<f64>,
    /// Boundary band width (`C0` by default).
    #[serde(default)]
    pub band: Option<f64>,
    #[serde(default)]
    pub mode: BoundaryMode,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub n_grid: Vec<f64>,
    #[serde(default)]
    pub n_circ: Option<f64>,
    #[serde(default)]
    pub beta_circ: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub ti: TiParams,
    #[serde(default)]
    pub chain: ChainParams,
    #[serde(default)]
    pub rank_one: Option<RankOneSpec>,
    #[serde(default)]
    pub partitions: Vec<PartitionSpec>,
    /// Norm exponent for concentration and Poincaré studies; the growth exponent for sandwiches.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub bumps: Option<usize>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads a config; a relative graph file is resolved against the config's directory.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut c = Self::from_json(&text)?;
        if let GraphSpec::File(f) = &mut c.graph {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    *f = dir.join(&*f);
                }
            }
        }
        Ok(c)
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(match &self.graph {
            GraphSpec::Generate(p) => p.dim,
            GraphSpec::Lattice { shape } => shape.len(),
            GraphSpec::File(_) => self.fixed_graph()?.expect("file graph").dim(),
        })
    }

    /// The shared graph of lattice and file specs.
    pub fn fixed_graph(&self) -> Result<Option<Arc<ExtendedGraph>>> {
        Ok(match &self.graph {
            GraphSpec::Generate(_) => None,
            GraphSpec::Lattice { shape } => Some(Arc::new(axis_lattice(shape)?)),
            GraphSpec::File(f) => Some(Arc::new(read_graph(f)?)),
        })
    }

    pub fn source(&self) -> Result<GraphSource> {
        Ok(match &self.graph {
            GraphSpec::Generate(p) => {
                let mut s = GraphSource::generate(p.clone());
                if let (Some(m), GraphSource::Generate { margin, .. }) = (self.margin, &mut s) {
                    *margin = m;
                }
                s
            }
            _ => GraphSource::Fixed(self.fixed_graph()?.expect("fixed graph")),
        })
    }

    /// Regions of the sweep in graph coordinates.
    pub fn regions(&self) -> Result<Vec<Window>> {
        if let Some(r) = &self.region {
            return Ok(vec![r.clone()]);
        }
        let d = self.dim()?;
        Ok(self.windows.iter().map(|&l| Window::cube(d, self.origin, self.origin + l)).collect())
    }

    /// The largest region, used by single-window studies.
    pub fn main_region(&self) -> Result<Window> {
        let mut r = self.regions()?;
        r.sort_by(|a, b| a.volume().total_cmp(&b.volume()));
        r.pop().ok_or_else(|| Error::InvalidConfig("no window or region given".into()))
    }

    /// Checks that every grid the study kind needs is present and sane.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.windows.iter().any(|w| !(*w > 0.0)) {
            return bad("window sides must be positive");
        }
        if let GraphSpec::Generate(p) = &self.graph {
            p.check().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        }
        let needs_region = !matches!(self.kind, StudyKind::Poincare);
        if needs_region && self.region.is_none() && self.windows.is_empty() {
            return bad("give windows or a region");
        }
        let needs_lambdas = matches!(
            self.kind,
            StudyKind::WInfConvergence
                | StudyKind::BetaGap
                | StudyKind::Phantom
                | StudyKind::TwoTemp
                | StudyKind::GrowthSandwich
                | StudyKind::Concentration
                | StudyKind::Subadditivity
        );
        if needs_lambdas && self.lambdas.is_empty() {
            return bad("lambdas must not be empty");
        }
        match self.kind {
            StudyKind::WInfConvergence => {
                if self.region.is_some() {
                    return bad("w-inf-convergence sweeps cube windows, not a fixed region");
                }
                if self.windows.len() < 3 {
                    return Err(Error::GridTooSmall(format!("{} window sizes, need at least 3", self.windows.len())));
                }
            }
            StudyKind::BetaGap | StudyKind::Phantom | StudyKind::Concentration => {
                if self.betas.is_empty() {
                    return bad("betas must not be empty");
                }
                if self.betas.iter().any(|b| !(*b > 0.0)) {
                    return bad("betas must be positive");
                }
            }
            StudyKind::TwoTemp => {
                if self.n_grid.is_empty() || self.n_circ.is_none() || self.beta_circ.is_none() {
                    return bad("two-temp needs n_grid, n_circ and beta_circ");
                }
            }
            StudyKind::RankOne => {
                if self.rank_one.as_ref().is_none_or(|r| r.ts.len() < 3) {
                    return bad("rank-one needs a rank_one block with at least 3 values of t");
                }
            }
            StudyKind::Subadditivity => {
                if self.partitions.is_empty() {
                    return bad("partitions must not be empty");
                }
            }
            StudyKind::Poincare => {
                if !matches!(self.graph, GraphSpec::Generate(_)) {
                    return bad("the Poincaré probe generates its own graphs");
                }
                if self.windows.len() < 2 {
                    return Err(Error::GridTooSmall("the Poincaré probe needs at least 2 windows".into()));
                }
            }
            StudyKind::GrowthSandwich => {
                if self.lambdas.len() < 2 {
                    return Err(Error::GridTooSmall("the growth sandwich needs at least 2 matrices".into()));
                }
            }
        }
        Ok(())
    }
}

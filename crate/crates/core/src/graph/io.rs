use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::to_point;

use super::{ExtendedGraph, GraphParams, Window};

pub const FORMAT_VERSION: u32 = 1;

/// On-disk form of a graph; cells and overlaps are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub version: u32,
    pub params: GraphParams,
    pub window: Window,
    pub positions: Vec<Vec<f64>>,
    pub volumetric_flags: Vec<bool>,
    pub edges: Vec<[usize; 2]>,
    pub simplices: Vec<Vec<usize>>,
    #[serde(default)]
    pub fixture_only: bool,
}

impl ExtendedGraph {
    pub fn to_document(&self) -> GraphDocument {
        let d = self.dim();
        GraphDocument {
            version: FORMAT_VERSION,
            params: self.params.clone(),
            window: self.window.clone(),
            positions: self.positions.iter().map(|p| p[..d].to_vec()).collect(),
            volumetric_flags: self.volumetric.clone(),
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            simplices: self.simplices.clone(),
            fixture_only: self.fixture_only,
        }
    }

    pub fn from_document(doc: GraphDocument) -> Result<Self> {
        if doc.version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "graph format version {} is not supported (expected {FORMAT_VERSION})",
                doc.version
            )));
        }
        let d = doc.params.dim;
        if let Some(p) = doc.positions.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch(format!("position {p:?} in dimension {d}")));
        }
        ExtendedGraph::from_parts(
            doc.params,
            doc.window,
            doc.positions.iter().map(|p| to_point(p)).collect(),
            doc.volumetric_flags,
            doc.edges.into_iter().map(|[a, b]| (a, b)).collect(),
            Some(doc.simplices),
            doc.fixture_only,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(&self.to_document())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

pub fn write_graph(g: &ExtendedGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, g.to_json()? + "\n")?;
    Ok(())
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<ExtendedGraph> {
    ExtendedGraph::from_json(&fs::read_to_string(path)?)
}

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ExtendedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Free,
    /// Must stay within distance 1 of the reference value.
    Soft,
    /// Pinned to the reference value.
    Clamped,
}

/// Values `u(x) ∈ ℝⁿ` for every graph vertex, stored flat; NaN marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    pub n: usize,
    pub values: Vec<f64>,
    pub roles: Vec<Role>,
    /// `φ(εx)/ε` per vertex, same layout as `values`.
    pub reference: Vec<f64>,
}

/// `Λ x` for a row-major `n x d` matrix.
pub fn apply_linear(lambda: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let n = lambda.len() / d;
    (0..n).map(|r| (0..d).map(|c| lambda[r * d + c] * x[c]).sum()).collect()
}

impl Deformation {
    pub fn missing(n: usize, vertices: usize) -> Self {
        Deformation {
            n,
            values: vec![f64::NAN; n * vertices],
            roles: vec![Role::Free; vertices],
            reference: vec![0.0; n * vertices],
        }
    }

    /// `u = φ` with `φ` given per vertex position; reference set to the same values.
    pub fn from_map(g: &ExtendedGraph, n: usize, phi: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(n * g.len());
        for i in 0..g.len() {
            let v = phi(g.position(i));
            debug_assert_eq!(v.len(), n);
            values.extend(v);
        }
        Deformation { n, reference: values.clone(), values, roles: vec![Role::Free; g.len()] }
    }

    /// `u(x) = Λx` for a row-major `n x d` matrix `Λ`.
    pub fn affine(g: &ExtendedGraph, lambda: &[f64]) -> Result<Self> {
        let d = g.dim();
        if lambda.is_empty() || lambda.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!("{} entries for a matrix with {d} columns", lambda.len())));
        }
        Ok(Self::from_map(g, lambda.len() / d, |x| apply_linear(lambda, x)))
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn set(&mut self, i: usize, v: &[f64]) {
        self.values[i * self.n..(i + 1) * self.n].copy_from_slice(v);
    }

    pub fn reference_value(&self, i: usize) -> &[f64] {
        &self.reference[i * self.n..(i + 1) * self.n]
    }

    /// Checks the role constraints: clamped equal to the reference, soft strictly within 1 of it.
    pub fn check_roles(&self) -> Result<()> {
        for i in 0..self.len() {
            let (u, r) = (self.value(i), self.reference_value(i));
            let dev = u.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            match self.roles[i] {
                Role::Clamped if dev != 0.0 => {
                    return Err(Error::InvalidParams(format!("clamped vertex {i} is off its datum by {dev}")))
                }
                Role::Soft if !(dev < 1.0) => {
                    return Err(Error::InvalidParams(format!("soft vertex {i} is off its datum by {dev}")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Indices of free and soft vertices.
    pub fn movable(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.roles[i] != Role::Clamped).collect()
    }

    /// Writes a JSON header line followed by the values as little-endian `f64`.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = DeformationHeader { n: self.n, vertices: self.len(), roles: self.roles.clone() };
        let mut f = fs::File::create(path)?;
        writeln!(f, "{}", serde_json::to_string(&header)?)?;
        let mut bytes = Vec::with_capacity(16 * self.values.len());
        for v in self.values.iter().chain(&self.reference) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        f.write_all(&bytes)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let raw = fs::read(path)?;
        let nl = raw.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Parse("missing header line".into()))?;
        let header: DeformationHeader = serde_json::from_slice(&raw[..nl])?;
        let body = &raw[nl + 1..];
        let m = header.n * header.vertices;
        if body.len() != 16 * m || header.roles.len() != header.vertices {
            return Err(Error::Parse(format!("expected {} value bytes, found {}", 16 * m, body.len())));
        }
        let floats: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Deformation {
            n: header.n,
            values: floats[..m].to_vec(),
            reference: floats[m..].to_vec(),
            roles: header.roles,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct DeformationHeader {
    n: usize,
    vertices: usize,
    roles: Vec<Role>,
}

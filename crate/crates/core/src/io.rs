//! On-disk formats.
//!
//! Cubatures are JSON documents with schema `grasscub/1`: projectors as
//! row-major `d x d` arrays, weights, certificate residual, run metadata and
//! an echo of the producing configuration. Frames are JSON
//! `{d, t, rows, provenance}`. Moment sequences and atom lists are CSV with
//! a header row.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cubature::{CubatureMetadata, WeightedCubature};
use crate::error::{Error, Result};
use crate::grassmann::{Projector, SymMatrix};
use crate::moments::{DiscreteMeasure, FrameFamily, MinorProvenance};
use crate::scalar::{cst, to_f64, Scalar};

pub const CUBATURE_SCHEMA: &str = "grasscub/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub seed: u64,
    pub iterations: usize,
    pub grad_norm: f64,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub restart: usize,
    #[serde(default)]
    pub certified_degrees: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubatureRecord {
    pub schema: String,
    pub d: usize,
    pub k: usize,
    pub t: u32,
    pub points: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<f64>,
    pub certificate_residual: f64,
    pub metadata: MetadataRecord,
    #[serde(default)]
    pub config: serde_json::Value,
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

impl CubatureRecord {
    pub fn from_cubature<T: Scalar>(c: &WeightedCubature<T>, config: serde_json::Value) -> Self {
        let m = &c.metadata;
        CubatureRecord {
            schema: CUBATURE_SCHEMA.into(),
            d: c.dim(),
            k: c.rank(),
            t: c.degree(),
            points: c
                .points()
                .iter()
                .map(|p| {
                    p.as_matrix()
                        .row_iter()
                        .map(|r| r.iter().map(|&x| to_f64(x)).collect())
                        .collect()
                })
                .collect(),
            weights: c.weights().iter().map(|&w| to_f64(w)).collect(),
            certificate_residual: to_f64(c.certificate_residual),
            metadata: MetadataRecord {
                seed: m.seed,
                iterations: m.iterations,
                grad_norm: m.grad_norm,
                converged: m.converged,
                restart: m.restart,
                certified_degrees: m.certified_degrees.clone(),
            },
            config,
        }
    }

    /// Validates every projector and the weight sum; the residual is
    /// recomputed rather than trusted.
    pub fn to_cubature<T: Scalar>(&self) -> Result<WeightedCubature<T>> {
        if self.schema != CUBATURE_SCHEMA {
            return Err(Error::Format(format!("unknown schema {:?}", self.schema)));
        }
        let points = self
            .points
            .iter()
            .map(|rows| {
                if rows.len() != self.d || rows.iter().any(|r| r.len() != self.d) {
                    return Err(Error::Format(format!("point is not {0} x {0}", self.d)));
                }
                let m = DMatrix::from_fn(self.d, self.d, |i, j| cst::<T>(rows[i][j]));
                Projector::new(SymMatrix::from_matrix(&m)?, self.k)
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = self.weights.iter().map(|&w| cst::<T>(w)).collect();
        let mut c = WeightedCubature::new(points, weights, self.t)?;
        let m = &self.metadata;
        c.metadata = CubatureMetadata {
            seed: m.seed,
            iterations: m.iterations,
            grad_norm: m.grad_norm,
            converged: m.converged,
            restart: m.restart,
            certified_degrees: m.certified_degrees.clone(),
        };
        Ok(c)
    }
}

pub fn write_cubature<T: Scalar, W: Write>(
    out: W,
    c: &WeightedCubature<T>,
    config: serde_json::Value,
) -> Result<()> {
    serde_json::to_writer_pretty(out, &CubatureRecord::from_cubature(c, config)).map_err(format_err)
}

pub fn read_cubature<T: Scalar, R: Read>(input: R) -> Result<WeightedCubature<T>> {
    let rec: CubatureRecord = serde_json::from_reader(input).map_err(format_err)?;
    rec.to_cubature()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub v: Vec<f64>,
    pub alpha: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramesRecord {
    pub d: usize,
    pub t: u32,
    pub rows: Vec<Vec<f64>>,
    #[serde(default)]
    pub provenance: Option<ProvenanceRecord>,
}

pub fn write_frames<T: Scalar, W: Write>(out: W, f: &FrameFamily<T>, t: u32) -> Result<()> {
    let rec = FramesRecord {
        d: f.dim(),
        t,
        rows: (0..f.len())
            .map(|j| f.row(j).into_iter().map(to_f64).collect())
            .collect(),
        provenance: f.provenance.as_ref().map(|p| ProvenanceRecord {
            v: p.v.clone(),
            alpha: p.alpha.clone(),
        }),
    };
    serde_json::to_writer_pretty(out, &rec).map_err(format_err)
}

/// Frames and their stated degree.
pub fn read_frames<T: Scalar, R: Read>(input: R) -> Result<(FrameFamily<T>, u32)> {
    let rec: FramesRecord = serde_json::from_reader(input).map_err(format_err)?;
    if rec.rows.iter().any(|r| r.len() != rec.d) {
        return Err(Error::Format(format!("rows must have length {}", rec.d)));
    }
    let m = DMatrix::from_fn(rec.rows.len(), rec.d, |j, i| cst::<T>(rec.rows[j][i]));
    let mut f = FrameFamily::new(m)?;
    f.provenance = rec.provenance.map(|p| MinorProvenance {
        t: rec.t,
        v: p.v,
        alpha: p.alpha,
    });
    Ok((f, rec.t))
}

/// First column of a CSV with a header row.
pub fn read_moments_csv<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    r.records()
        .map(|rec| {
            let rec = rec.map_err(format_err)?;
            rec.get(0)
                .ok_or_else(|| Error::Format("empty record".into()))?
                .trim()
                .parse::<f64>()
                .map_err(format_err)
        })
        .collect()
}

/// Atoms as CSV rows `weight, x_1, ..., x_d` after a header row.
pub fn read_atoms_csv<R: Read>(input: R) -> Result<DiscreteMeasure<f64>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(format_err)?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(format_err))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() < 2 {
            return Err(Error::Format("atom rows need a weight and coordinates".into()));
        }
        if let Some(first) = rows.first() {
            if first.len() != vals.len() {
                return Err(Error::Format("atom rows differ in length".into()));
            }
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Format("no atoms".into()));
    }
    let d = rows[0].len() - 1;
    let atoms = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j + 1]);
    DiscreteMeasure::new(atoms, rows.iter().map(|r| r[0]).collect())
}

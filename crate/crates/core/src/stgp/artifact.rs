//! Model artifact: a versioned binary file holding the mesh, the
//! hyperparameters and the latent Gaussian conditional of one day.
//!
//! Layout (little endian):
//!
//! ```text
//! b"SOLMAPM\0"  magic
//! u32           format version
//! u64 + bytes   JSON header (metadata and section sizes)
//! f64 pairs     mesh nodes (east, north)
//! u64 triples   triangles
//! f64 pairs     inner boundary, then outer boundary
//! f64           latent mean
//! (u64, u64, f64) lower-triangle precision triplets (row >= col)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::fit::{DayModelPosterior, FitDiagnostics, Theta};
use super::mesh::Mesh;
use super::precision::Hyperparameters;
use super::projection::PlanarPoint;
use super::sparse::CscMatrix;
use crate::error::{Error, Result};
use crate::ingest::Resolution;

pub const MAGIC: &[u8; 8] = b"SOLMAPM\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    day: String,
    resolution_minutes: u32,
    time_count: usize,
    node_count: usize,
    triangle_count: usize,
    inner_boundary_len: usize,
    outer_boundary_len: usize,
    latent_dim: usize,
    precision_triplets: usize,
    hyper: Hyperparameters,
    theta: Theta,
    diagnostics: FitDiagnostics,
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_index<R: Read>(r: &mut R, bound: usize) -> Result<usize> {
    let v = get_u64(r)?;
    usize::try_from(v)
        .ok()
        .filter(|&i| i < bound)
        .ok_or_else(|| Error::Format(format!("index {v} out of bounds ({bound})")))
}

pub fn write_model<W: Write>(mesh: &Mesh, model: &DayModelPosterior, mut w: W) -> Result<()> {
    let lower: Vec<(usize, usize, f64)> = model
        .latent_precision
        .triplets()
        .filter(|&(i, j, _)| i >= j)
        .collect();
    let header = Header {
        format: "solmap-day-model".into(),
        day: model.day.format("%Y-%m-%d").to_string(),
        resolution_minutes: model.resolution.minutes(),
        time_count: model.time_count,
        node_count: mesh.node_count(),
        triangle_count: mesh.triangles.len(),
        inner_boundary_len: mesh.inner_boundary.len(),
        outer_boundary_len: mesh.outer_boundary.len(),
        latent_dim: model.dim(),
        precision_triplets: lower.len(),
        hyper: model.hyper,
        theta: model.theta,
        diagnostics: model.diagnostics,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    put_u64(&mut w, json.len() as u64)?;
    w.write_all(&json)?;
    for p in &mesh.nodes {
        put_f64(&mut w, p.east)?;
        put_f64(&mut w, p.north)?;
    }
    for t in &mesh.triangles {
        for &i in t {
            put_u64(&mut w, i as u64)?;
        }
    }
    for p in mesh.inner_boundary.iter().chain(&mesh.outer_boundary) {
        put_f64(&mut w, p.east)?;
        put_f64(&mut w, p.north)?;
    }
    for &v in &model.latent_mean {
        put_f64(&mut w, v)?;
    }
    for (i, j, v) in lower {
        put_u64(&mut w, i as u64)?;
        put_u64(&mut w, j as u64)?;
        put_f64(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<(Mesh, DayModelPosterior)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a model artifact (bad magic)".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "artifact version {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    let len = get_u64(&mut r)?;
    if len > 1 << 24 {
        return Err(Error::Format(format!("header length {len} implausible")));
    }
    let mut json = vec![0u8; len as usize];
    r.read_exact(&mut json)?;
    let h: Header = serde_json::from_slice(&json).map_err(|e| Error::Format(e.to_string()))?;
    let day = NaiveDate::parse_from_str(&h.day, "%Y-%m-%d")
        .map_err(|e| Error::Format(format!("bad day '{}': {e}", h.day)))?;
    let resolution = Resolution::from_minutes(h.resolution_minutes)?;
    if h.latent_dim != h.node_count * h.time_count + 1 {
        return Err(Error::Format("latent dimension does not match mesh and time grid".into()));
    }

    let point = |r: &mut R| -> Result<PlanarPoint> { Ok(PlanarPoint::new(get_f64(r)?, get_f64(r)?)) };
    let nodes = (0..h.node_count).map(|_| point(&mut r)).collect::<Result<Vec<_>>>()?;
    let triangles = (0..h.triangle_count)
        .map(|_| -> Result<[usize; 3]> {
            Ok([
                get_index(&mut r, h.node_count)?,
                get_index(&mut r, h.node_count)?,
                get_index(&mut r, h.node_count)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let inner_boundary = (0..h.inner_boundary_len).map(|_| point(&mut r)).collect::<Result<Vec<_>>>()?;
    let outer_boundary = (0..h.outer_boundary_len).map(|_| point(&mut r)).collect::<Result<Vec<_>>>()?;
    let latent_mean = (0..h.latent_dim).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut trip = Vec::with_capacity(2 * h.precision_triplets);
    for _ in 0..h.precision_triplets {
        let i = get_index(&mut r, h.latent_dim)?;
        let j = get_index(&mut r, h.latent_dim)?;
        let v = get_f64(&mut r)?;
        if i < j {
            return Err(Error::Format(format!("upper-triangle triplet ({i}, {j})")));
        }
        trip.push((i, j, v));
        if i != j {
            trip.push((j, i, v));
        }
    }
    let precision = CscMatrix::from_triplets(h.latent_dim, h.latent_dim, &trip);
    let mesh = Mesh {
        nodes,
        triangles,
        inner_boundary,
        outer_boundary,
    };
    let model = DayModelPosterior::new(
        h.hyper,
        h.theta,
        latent_mean,
        precision,
        day,
        resolution,
        h.time_count,
        h.node_count,
        h.diagnostics,
    )?;
    Ok((mesh, model))
}

pub fn save_model(path: &Path, mesh: &Mesh, model: &DayModelPosterior) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_model(mesh, model, std::io::BufWriter::new(f))
}

pub fn load_model(path: &Path) -> Result<(Mesh, DayModelPosterior)> {
    let f = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(f))
}

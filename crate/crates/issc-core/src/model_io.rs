//! Model persistence: a versioned binary file holding the preprocessing
//! and projection matrices as little-endian f64, plus a JSON sidecar
//! (`<path>.json`) with the shape metadata. Writing is fully deterministic,
//! so identical models produce byte-identical files.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npe::ProjectionModel;
use crate::pipeline::{FittedModel, Preprocessor};
use crate::spectral::ClusterAssignment;

const MAGIC: &[u8; 8] = b"ISSCMDL\0";
const VERSION: u32 = 1;

/// Shape metadata mirrored into the JSON sidecar.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelMeta {
    pub schema_version: u32,
    pub raw_dim: usize,
    pub reduced_dim: usize,
    pub embed_dim: usize,
    pub in_sample_count: usize,
    pub cluster_count: usize,
    pub has_pca: bool,
    pub normalize: bool,
}

impl ModelMeta {
    pub fn of(model: &FittedModel) -> Self {
        let raw_dim = model
            .preprocess
            .pca()
            .map_or(model.projection.feature_dim(), |p| p.mean().len());
        Self {
            schema_version: VERSION,
            raw_dim,
            reduced_dim: model.projection.feature_dim(),
            embed_dim: model.projection.embed_dim(),
            in_sample_count: model.projection.embedded_in_sample().ncols(),
            cluster_count: model.projection.in_sample_labels().cluster_count(),
            has_pca: model.preprocess.pca().is_some(),
            normalize: model.preprocess.normalize(),
        }
    }
}

/// Writes the model binary at `path` and the metadata sidecar at
/// `path.json`.
pub fn write_model(path: &Path, model: &FittedModel) -> Result<()> {
    let meta = ModelMeta::of(model);
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    push_u32(&mut buf, VERSION);
    buf.push(meta.has_pca as u8);
    buf.push(meta.normalize as u8);
    push_u32(&mut buf, meta.raw_dim as u32);
    push_u32(&mut buf, meta.reduced_dim as u32);
    push_u32(&mut buf, meta.embed_dim as u32);
    push_u32(&mut buf, meta.in_sample_count as u32);

    if let Some(pca) = model.preprocess.pca() {
        push_vector(&mut buf, pca.mean());
        push_matrix(&mut buf, pca.basis());
    }
    push_matrix(&mut buf, model.projection.projection());
    push_vector(&mut buf, model.projection.eigenvalues());
    push_matrix(&mut buf, model.projection.embedded_in_sample());
    push_f64(&mut buf, model.projection.in_sample_labels().inertia);
    for &label in &model.projection.in_sample_labels().labels {
        push_u32(&mut buf, label as u32);
    }

    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;

    let sidecar = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Model(format!("cannot encode sidecar: {e}")))?;
    std::fs::write(sidecar_path(path), sidecar)?;
    Ok(())
}

/// Reads a model written by [`write_model`].
pub fn read_model(path: &Path) -> Result<FittedModel> {
    let bytes = std::fs::read(path)?;
    let mut cursor = Cursor::new(&bytes);

    let magic = cursor.take(8)?;
    if magic != MAGIC {
        return Err(Error::Model("bad magic: not a model file".into()));
    }
    let version = cursor.u32()?;
    if version != VERSION {
        return Err(Error::Model(format!(
            "unsupported model version {version}, expected {VERSION}"
        )));
    }
    let has_pca = cursor.u8()? != 0;
    let normalize = cursor.u8()? != 0;
    let raw_dim = cursor.u32()? as usize;
    let reduced_dim = cursor.u32()? as usize;
    let embed_dim = cursor.u32()? as usize;
    let in_sample_count = cursor.u32()? as usize;

    let pca = if has_pca {
        let mean = cursor.vector(raw_dim)?;
        let basis = cursor.matrix(raw_dim, reduced_dim)?;
        Some(crate::dataset::PcaBasis::from_parts(mean, basis))
    } else {
        None
    };
    let w = cursor.matrix(reduced_dim, embed_dim)?;
    let eigenvalues = cursor.vector(embed_dim)?;
    let embedded = cursor.matrix(embed_dim, in_sample_count)?;
    let inertia = cursor.f64()?;
    let mut labels = Vec::with_capacity(in_sample_count);
    for _ in 0..in_sample_count {
        labels.push(cursor.u32()? as usize);
    }
    cursor.expect_end()?;

    let projection = ProjectionModel::from_parts(
        w,
        eigenvalues,
        embedded,
        ClusterAssignment { labels, inertia },
    )?;
    Ok(FittedModel {
        preprocess: Preprocessor::from_parts(pca, normalize),
        projection,
    })
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    std::path::PathBuf::from(name)
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_vector(buf: &mut Vec<u8>, v: &DVector<f64>) {
    for &x in v.iter() {
        push_f64(buf, x);
    }
}

fn push_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    // row-major on disk
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            push_f64(buf, m[(i, j)]);
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(Error::Model("model file is truncated".into()));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn vector(&mut self, n: usize) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(n);
        for i in 0..n {
            v[i] = self.f64()?;
        }
        Ok(v)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.f64()?;
            }
        }
        Ok(m)
    }

    fn expect_end(&self) -> Result<()> {
        if self.offset != self.bytes.len() {
            return Err(Error::Model(format!(
                "{} trailing bytes after the model payload",
                self.bytes.len() - self.offset
            )));
        }
        Ok(())
    }
}

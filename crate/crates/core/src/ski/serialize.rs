//! Versioned JSON container for [`LoveCache`], so precomputation and queries
//! can run in separate processes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::love::{LoveCache, VarianceFactors};
use super::model::Standardization;
use crate::error::{Error, Result};
use crate::kernels::{AdditiveStructure, KernelRegistry, StructureSpec};

pub const CACHE_FORMAT_VERSION: u32 = 1;
const CACHE_FORMAT_NAME: &str = "lovegp-cache";

/// Column-major dense matrix.
#[derive(Serialize, Deserialize)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StoredMatrix {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    fn into_matrix(self, what: &str) -> Result<DMatrix<f64>> {
        if self.rows * self.cols != self.data.len() {
            return Err(Error::Format(format!(
                "{what}: {}x{} matrix with {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_vec(self.rows, self.cols, self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    version: u32,
    structure: StructureSpec,
    noise: f64,
    standardization: Standardization,
    mean_cache: Vec<f64>,
    r: StoredMatrix,
    r_prime: StoredMatrix,
    jitter: f64,
    sample_root: Option<StoredMatrix>,
}

impl LoveCache {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        let file = CacheFile {
            format: CACHE_FORMAT_NAME.into(),
            version: CACHE_FORMAT_VERSION,
            structure: self.structure.to_spec(),
            noise: self.noise,
            standardization: self.standardization,
            mean_cache: self.mean_cache.clone(),
            r: StoredMatrix::from_matrix(&self.factors.r),
            r_prime: StoredMatrix::from_matrix(&self.factors.r_prime),
            jitter: self.factors.jitter,
            sample_root: self.sample_root.as_ref().map(StoredMatrix::from_matrix),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(reader: R, registry: &KernelRegistry) -> Result<Self> {
        let file: CacheFile = serde_json::from_reader(reader)?;
        if file.format != CACHE_FORMAT_NAME {
            return Err(Error::Format(format!("not a cache file (format `{}`)", file.format)));
        }
        if file.version != CACHE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported cache version {} (expected {CACHE_FORMAT_VERSION})",
                file.version
            )));
        }
        let structure = AdditiveStructure::from_spec(&file.structure, registry)?;
        let m = structure.total_inducing();
        let r = file.r.into_matrix("R")?;
        let r_prime = file.r_prime.into_matrix("R'")?;
        if file.mean_cache.len() != m || r.ncols() != m || r_prime.shape() != r.shape() {
            return Err(Error::Format(format!(
                "cache shapes disagree with a grid of {m} inducing points"
            )));
        }
        let sample_root = file
            .sample_root
            .map(|s| s.into_matrix("S"))
            .transpose()?;
        if let Some(s) = &sample_root {
            if s.nrows() != m {
                return Err(Error::Format("sampling root has wrong row count".into()));
            }
        }
        Ok(Self::from_parts(
            structure,
            file.noise,
            file.standardization,
            file.mean_cache,
            VarianceFactors {
                r,
                r_prime,
                jitter: file.jitter,
            },
            sample_root,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_json(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, registry: &KernelRegistry) -> Result<Self> {
        Self::read_json(BufReader::new(File::open(path)?), registry)
    }
}

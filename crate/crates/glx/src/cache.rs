//! Binary cache of finite-volume Green matrices under `GLX_CACHE_DIR`,
//! keyed by a hash of (model, domain, tolerance).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use glx_core::green::GreenMatrix;
use glx_core::linalg::DenseMatrix;
use glx_core::{BoxDomain, ModelSpec};
use sha2::{Digest, Sha256};

pub const CACHE_ENV: &str = "GLX_CACHE_DIR";
const MAGIC: &[u8; 8] = b"GLXGRN01";

#[derive(Debug, Clone)]
pub struct GreenCache {
    dir: Option<PathBuf>,
}

impl GreenCache {
    /// Reads `GLX_CACHE_DIR`; an unset or empty variable disables caching.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        GreenCache { dir }
    }

    pub fn at(dir: &Path) -> Self {
        GreenCache { dir: Some(dir.to_path_buf()) }
    }

    pub fn disabled() -> Self {
        GreenCache { dir: None }
    }

    pub fn key(model: &ModelSpec, domain: &BoxDomain, tol: f64) -> String {
        let text = serde_json::json!({
            "model": model,
            "dim": domain.dim(),
            "side": domain.side(),
            "tol": tol,
        })
        .to_string();
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("green-{key}.bin")))
    }

    pub fn load(&self, model: &ModelSpec, domain: &BoxDomain, tol: f64) -> Result<Option<GreenMatrix>> {
        let Some(path) = self.path(&Self::key(model, domain, tol)) else {
            return Ok(None);
        };
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let n = domain.volume();
        if bytes.len() != 16 + 8 * n * n || &bytes[..8] != MAGIC {
            bail!("corrupt cache file {}", path.display());
        }
        let stored = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        if stored != n {
            bail!("cache file {} holds {stored} sites, expected {n}", path.display());
        }
        let data = bytes[16..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok(Some(GreenMatrix::new(*domain, DenseMatrix::from_rows(n, data)?)?))
    }

    pub fn store(&self, model: &ModelSpec, green: &GreenMatrix, tol: f64) -> Result<()> {
        let Some(path) = self.path(&Self::key(model, green.domain(), tol)) else {
            return Ok(());
        };
        let dir = path.parent().expect("cache file has a parent");
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let data = green.matrix().data();
        let mut bytes = Vec::with_capacity(16 + 8 * data.len());
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&(green.matrix().n() as u64).to_le_bytes());
        for x in data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        // write then rename so concurrent readers never see a partial file
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, &bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

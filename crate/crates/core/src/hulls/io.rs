//! Envelope tables on disk: CSV export, a binary cache keyed by the flux
//! fingerprint, and the `sets.csv` listing.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::envelope::{convex_envelope, fingerprint, residual_surface, EnvelopeMeta, EnvelopeTable};
use crate::error::{Error, Result};
use crate::flux::{FluxModel, Window};
use crate::interval::IntervalSet;

const MAGIC: &[u8; 8] = b"WCENV\x00\x01\x00";

/// Rows `p, beta, g, boundary_flag`, p-major.
pub fn write_envelope_csv(env: &EnvelopeTable, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["p", "beta", "g", "boundary_flag"])?;
    for (i, p) in env.p_axis.iter().enumerate() {
        for (j, b) in env.beta_axis.iter().enumerate() {
            w.write_record([
                p.to_string(),
                b.to_string(),
                env.values[[i, j]].to_string(),
                u8::from(env.boundary[[i, j]]).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_envelope_bin(env: &EnvelopeTable, path: impl AsRef<Path>) -> Result<()> {
    let meta = serde_json::to_vec(&env.meta).map_err(|e| Error::Cache(e.to_string()))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    for n in [meta.len(), env.p_axis.len(), env.beta_axis.len()] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    w.write_all(&meta)?;
    for x in env.p_axis.iter().chain(&env.beta_axis).chain(env.values.iter()) {
        w.write_all(&x.to_le_bytes())?;
    }
    let flags: Vec<u8> = env.boundary.iter().map(|&b| u8::from(b)).collect();
    w.write_all(&flags)?;
    w.flush()?;
    Ok(())
}

pub fn read_envelope_bin(path: impl AsRef<Path>) -> Result<EnvelopeTable> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let meta_len = cur.u64()? as usize;
    let np = cur.u64()? as usize;
    let nb = cur.u64()? as usize;
    let meta: EnvelopeMeta =
        serde_json::from_slice(cur.take(meta_len)?).map_err(|e| Error::Cache(e.to_string()))?;
    let p_axis = cur.f64s(np)?;
    let beta_axis = cur.f64s(nb)?;
    let values = Array2::from_shape_vec((np, nb), cur.f64s(np * nb)?).map_err(|e| Error::Cache(e.to_string()))?;
    let flags = cur.take(np * nb)?.iter().map(|&b| b != 0).collect();
    let boundary = Array2::from_shape_vec((np, nb), flags).map_err(|e| Error::Cache(e.to_string()))?;
    if cur.pos != bytes.len() {
        return Err(Error::Cache("trailing bytes".into()));
    }
    Ok(EnvelopeTable { p_axis, beta_axis, values, boundary, meta })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Cache("truncated file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Cache("size overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn cache_path(dir: impl AsRef<Path>, flux: &FluxModel, window_p: &Window, window_beta: &Window) -> PathBuf {
    dir.as_ref().join(format!("envelope-{}.bin", fingerprint(flux, window_p, window_beta)))
}

/// Loads the envelope from `dir` if a cache entry with a matching
/// fingerprint exists, otherwise computes and stores it.
pub fn cached_envelope(
    dir: impl AsRef<Path>,
    flux: &FluxModel,
    window_p: &Window,
    window_beta: &Window,
) -> Result<EnvelopeTable> {
    let path = cache_path(&dir, flux, window_p, window_beta);
    let key = fingerprint(flux, window_p, window_beta);
    if path.exists() {
        if let Ok(env) = read_envelope_bin(&path) {
            if env.meta.fingerprint == key {
                return Ok(env);
            }
        }
    }
    let env = convex_envelope(&residual_surface(flux, window_p, window_beta)?);
    fs::create_dir_all(&dir)?;
    write_envelope_bin(&env, &path)?;
    Ok(env)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Lambda,
    Gamma,
    Z,
    Sigma,
}

/// One row of `sets.csv`; empty sets have blank bounds, Λ has a blank `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRow {
    pub p: Option<f64>,
    pub set_kind: SetKind,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub truncated_lo: bool,
    pub truncated_hi: bool,
}

impl SetRow {
    /// One row per interval of `set`, or a single blank row if it is empty.
    pub fn rows(p: Option<f64>, kind: SetKind, set: &IntervalSet) -> Vec<SetRow> {
        if set.is_empty() {
            return vec![SetRow { p, set_kind: kind, lo: None, hi: None, truncated_lo: false, truncated_hi: false }];
        }
        set.intervals
            .iter()
            .map(|&(lo, hi)| SetRow {
                p,
                set_kind: kind,
                lo: Some(lo),
                hi: Some(hi),
                truncated_lo: set.truncated_lo,
                truncated_hi: set.truncated_hi,
            })
            .collect()
    }
}

pub fn write_sets_csv(rows: &[SetRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sets_csv(path: impl AsRef<Path>) -> Result<Vec<SetRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

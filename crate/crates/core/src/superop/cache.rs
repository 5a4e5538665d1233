//! On-disk superoperator format.
//!
//! A payload file holds one fixed-width record per stored entry: eight `i16`
//! indices `(l̃,p̃,l̃',p̃',l,p,l',p')` followed by `re` and `im` as `f64`, all
//! little-endian, sorted by index tuple. A JSON sidecar next to it (same stem,
//! `.json` extension) carries the parameters, the SHA-256 of the payload and a
//! parameter hash that is recomputed on load.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AssemblyMethod, SuperopIndex, SuperopMatrix, SuperopMetadata};
use crate::beam::{ModeIndex, TruncationSpec};
use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};
use crate::util::{sha256_hex, write_atomic};

pub const FORMAT_VERSION: u32 = 1;
const BASIS_ORDER: &str = "l ascending then p ascending";
const RECORD_BYTES: usize = 8 * 2 + 2 * 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSidecar {
    pub format_version: u32,
    pub w0: f64,
    pub lambda: f64,
    pub cn2: f64,
    pub z: f64,
    pub max_in: u32,
    pub max_out: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub basis_order: String,
    pub payload_sha256: String,
    pub param_hash: String,
    pub method: AssemblyMethod,
    pub max_error_estimate: f64,
    pub entry_count: usize,
}

/// SHA-256 (hex) of the canonical JSON of the physical and accuracy parameters.
///
/// Keys are emitted in sorted order and floats in shortest round-trip form, so
/// equal parameters always hash equally.
#[allow(clippy::too_many_arguments)]
pub fn param_hash(
    w0: f64,
    lambda: f64,
    cn2: f64,
    z: f64,
    max_in: u32,
    max_out: u32,
    rel_tol: f64,
    abs_tol: f64,
) -> String {
    let mut m = BTreeMap::new();
    m.insert("abs_tol", serde_json::json!(abs_tol));
    m.insert("cn2", serde_json::json!(cn2));
    m.insert("format_version", serde_json::json!(FORMAT_VERSION));
    m.insert("lambda", serde_json::json!(lambda));
    m.insert("max_in", serde_json::json!(max_in));
    m.insert("max_out", serde_json::json!(max_out));
    m.insert("rel_tol", serde_json::json!(rel_tol));
    m.insert("w0", serde_json::json!(w0));
    m.insert("z", serde_json::json!(z));
    let canonical = serde_json::to_string(&m).expect("plain map serializes");
    sha256_hex(canonical.as_bytes())
}

/// Sidecar path for a payload path: same stem with a `.json` extension.
pub fn sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

impl CacheSidecar {
    fn expected_hash(&self) -> String {
        param_hash(
            self.w0,
            self.lambda,
            self.cn2,
            self.z,
            self.max_in,
            self.max_out,
            self.rel_tol,
            self.abs_tol,
        )
    }
}

fn encode<S: Real>(t: &SuperopMatrix<S>) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(t.len() * RECORD_BYTES);
    for (idx, v) in t.entries() {
        for x in idx.as_array() {
            let x = i16::try_from(x).map_err(|_| Error::Shape(format!("index {idx} does not fit in i16")))?;
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&v.re.as_f64().to_le_bytes());
        buf.extend_from_slice(&v.im.as_f64().to_le_bytes());
    }
    Ok(buf)
}

/// Writes `path` (payload) and its sidecar atomically; the sidecar goes last.
pub fn save_superop<S: Real>(t: &SuperopMatrix<S>, path: &Path) -> Result<CacheSidecar> {
    let payload = encode(t)?;
    let m = &t.metadata;
    let trunc = t.truncation();
    let sidecar = CacheSidecar {
        format_version: FORMAT_VERSION,
        w0: m.w0,
        lambda: m.lambda,
        cn2: m.cn2,
        z: m.z,
        max_in: trunc.max_in(),
        max_out: trunc.max_out(),
        rel_tol: m.rel_tol,
        abs_tol: m.abs_tol,
        basis_order: BASIS_ORDER.to_string(),
        payload_sha256: sha256_hex(&payload),
        param_hash: param_hash(
            m.w0,
            m.lambda,
            m.cn2,
            m.z,
            trunc.max_in(),
            trunc.max_out(),
            m.rel_tol,
            m.abs_tol,
        ),
        method: m.method,
        max_error_estimate: m.max_error_estimate,
        entry_count: t.len(),
    };
    write_atomic(path, &payload)?;
    let json = serde_json::to_vec_pretty(&sidecar)?;
    write_atomic(&sidecar_path(path), &json)?;
    Ok(sidecar)
}

/// Reads the sidecar alone, verifying its parameter hash.
pub fn read_sidecar(path: &Path) -> Result<CacheSidecar> {
    let side_path = sidecar_path(path);
    let format_err = |reason: String| Error::CacheFormat {
        path: side_path.clone(),
        reason,
    };
    let text = fs::read(&side_path)?;
    let sidecar: CacheSidecar = serde_json::from_slice(&text).map_err(|e| format_err(e.to_string()))?;
    if sidecar.format_version != FORMAT_VERSION {
        return Err(format_err(format!(
            "format version {} (expected {FORMAT_VERSION})",
            sidecar.format_version
        )));
    }
    if sidecar.basis_order != BASIS_ORDER {
        return Err(format_err(format!("basis order {:?}", sidecar.basis_order)));
    }
    if sidecar.param_hash != sidecar.expected_hash() {
        return Err(Error::HashMismatch {
            path: side_path.clone(),
            what: "parameter hash".into(),
        });
    }
    Ok(sidecar)
}

/// Loads a payload and sidecar written by [`save_superop`].
pub fn load_superop<S: Real>(path: &Path) -> Result<SuperopMatrix<S>> {
    let sidecar = read_sidecar(path)?;
    let payload = fs::read(path)?;
    let format_err = |reason: String| Error::CacheFormat {
        path: path.to_path_buf(),
        reason,
    };
    if sha256_hex(&payload) != sidecar.payload_sha256 {
        return Err(Error::HashMismatch {
            path: path.to_path_buf(),
            what: "payload sha256".into(),
        });
    }
    if payload.len() % RECORD_BYTES != 0 || payload.len() / RECORD_BYTES != sidecar.entry_count {
        return Err(format_err(format!(
            "{} bytes for {} records",
            payload.len(),
            sidecar.entry_count
        )));
    }
    let trunc = TruncationSpec::new(sidecar.max_in, sidecar.max_out)?;
    let metadata = SuperopMetadata {
        w0: sidecar.w0,
        lambda: sidecar.lambda,
        cn2: sidecar.cn2,
        z: sidecar.z,
        rel_tol: sidecar.rel_tol,
        abs_tol: sidecar.abs_tol,
        method: sidecar.method,
        max_error_estimate: sidecar.max_error_estimate,
    };
    let mut t = SuperopMatrix::new(trunc, metadata);
    let mut last: Option<SuperopIndex> = None;
    for rec in payload.chunks_exact(RECORD_BYTES) {
        let mut ix = [0i32; 8];
        for (k, x) in ix.iter_mut().enumerate() {
            *x = i16::from_le_bytes([rec[2 * k], rec[2 * k + 1]]) as i32;
        }
        let f = |o: usize| f64::from_le_bytes(rec[o..o + 8].try_into().expect("8 bytes"));
        let mode = |l: i32, p: i32| -> Result<ModeIndex> {
            u32::try_from(p)
                .map(|p| ModeIndex::new(l, p))
                .map_err(|_| format_err(format!("negative radial index {p}")))
        };
        let idx = SuperopIndex::new(
            mode(ix[0], ix[1])?,
            mode(ix[2], ix[3])?,
            mode(ix[4], ix[5])?,
            mode(ix[6], ix[7])?,
        );
        if last.is_some_and(|prev| prev >= idx) {
            return Err(format_err(format!("records not sorted at {idx}")));
        }
        last = Some(idx);
        t.insert(idx, Complex::new(S::lit(f(16)), S::lit(f(24))))
            .map_err(|e| format_err(e.to_string()))?;
    }
    Ok(t)
}

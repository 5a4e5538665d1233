//! Scenario configuration, parameter-grid expansion and the fidelity sweep.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aqec::{build_code, channel_fidelity, DEFAULT_RANK_TOL};
use crate::beam::{BeamGeometry, TruncationSpec};
use crate::error::{Error, Result};
use crate::kraus::{completeness_deficiency, kraus_decompose, rearrange, KrausSet, DEFAULT_CUTOFF_RATIO};
use crate::quadrature::Tolerance;
use crate::superop::{
    assemble_superop, assemble_with_kernel, load_superop, param_hash, save_superop, with_workers,
    AssemblyOptions, KernelLadder, SuperopMatrix,
};
use crate::turbulence::{fried_parameter, TurbulenceParams};
use crate::util::{format_sig, write_atomic};

/// Environment variable overriding [`ScenarioConfig::cache_dir`].
pub const CACHE_DIR_ENV: &str = "OAM_CACHE_DIR";

pub const RESULTS_HEADER: &str = "z,w_over_r0,max_in,max_out,fidelity,deficiency,kraus_count,runtime_seconds";

fn default_rel_tol() -> f64 {
    1e-6
}
fn default_abs_tol() -> f64 {
    1e-10
}
fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}
fn default_cutoff_ratio() -> f64 {
    DEFAULT_CUTOFF_RATIO
}

/// Experiment constants and the parameter grid. Unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Beam waist (m).
    pub w0: f64,
    /// Wavelength (m).
    pub lambda: f64,
    /// `C_n²` (m^(-2/3)).
    pub cn2: f64,
    /// Propagation distances (m).
    pub z_list: Vec<f64>,
    pub max_in_list: Vec<u32>,
    pub max_out_list: Vec<u32>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "default_cutoff_ratio")]
    pub cutoff_ratio: f64,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; defaults to the logical core count.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("w0", self.w0)?;
        positive("lambda", self.lambda)?;
        if !(self.cn2 >= 0.0 && self.cn2.is_finite()) {
            return Err(Error::Config(format!("cn2 must be >= 0, got {}", self.cn2)));
        }
        if let Some(z) = self.z_list.iter().find(|z| !(**z >= 0.0 && z.is_finite())) {
            return Err(Error::Config(format!("z values must be >= 0, got {z}")));
        }
        if let Some(m) = self.max_in_list.iter().find(|m| **m == 0) {
            return Err(Error::Config(format!("max_in must be >= 1, got {m}")));
        }
        if !Tolerance::new(self.rel_tol, self.abs_tol, 1).is_valid() {
            return Err(Error::Config(
                "rel_tol/abs_tol must be non-negative and not both zero".into(),
            ));
        }
        if !(self.rank_tol >= 0.0 && self.cutoff_ratio >= 0.0) {
            return Err(Error::Config("rank_tol and cutoff_ratio must be >= 0".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<BeamGeometry<f64>> {
        BeamGeometry::new(self.w0, self.lambda)
    }

    pub fn turbulence(&self) -> Result<TurbulenceParams<f64>> {
        TurbulenceParams::kolmogorov(self.cn2)
    }

    pub fn tolerance(&self) -> Tolerance<f64> {
        Tolerance::new(self.rel_tol, self.abs_tol, Tolerance::default().max_evaluations)
    }

    pub fn assembly_options(&self) -> AssemblyOptions<f64> {
        AssemblyOptions::new(self.tolerance())
    }

    /// `OAM_CACHE_DIR` if set, else `cache_dir`; `None` disables caching.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(v) if !v.is_empty() => Some(PathBuf::from(v)),
            _ => self.cache_dir.clone(),
        }
    }

    /// `w(z)/r0`, zero without turbulence.
    pub fn w_over_r0(&self, z: f64) -> Result<f64> {
        if self.cn2 == 0.0 || z == 0.0 {
            return Ok(0.0);
        }
        Ok(self.geometry()?.beam_width(z) / fried_parameter(self.lambda, self.cn2, z)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPoint {
    pub z: f64,
    pub max_in: u32,
    pub max_out: u32,
}

impl ScenarioPoint {
    pub fn truncation(&self) -> Result<TruncationSpec> {
        TruncationSpec::new(self.max_in, self.max_out)
    }
}

/// `z_list × {(max_in, max_out) : max_out ≥ max_in}`, ordered by `z`, then
/// `max_in`, then `max_out`. Duplicates are removed. A `max_in` with no
/// admissible `max_out` is an error.
pub fn expand_grid(cfg: &ScenarioConfig) -> Result<Vec<ScenarioPoint>> {
    if cfg.z_list.is_empty() || cfg.max_in_list.is_empty() || cfg.max_out_list.is_empty() {
        return Err(Error::Config(
            "z_list, max_in_list and max_out_list must be non-empty".into(),
        ));
    }
    let mut zs = cfg.z_list.clone();
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    let mut ins = cfg.max_in_list.clone();
    ins.sort_unstable();
    ins.dedup();
    let mut outs = cfg.max_out_list.clone();
    outs.sort_unstable();
    outs.dedup();
    for &mi in &ins {
        if !outs.iter().any(|&mo| mo >= mi) {
            return Err(Error::Config(format!(
                "max_in {mi} has no max_out >= {mi} in {:?}",
                cfg.max_out_list
            )));
        }
    }
    let mut points = Vec::new();
    for &z in &zs {
        for &max_in in &ins {
            for &max_out in outs.iter().filter(|&&mo| mo >= max_in) {
                points.push(ScenarioPoint { z, max_in, max_out });
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub z: f64,
    pub w_over_r0: f64,
    pub max_in: u32,
    pub max_out: u32,
    pub fidelity: f64,
    /// Largest-magnitude eigenvalue of `I - Σ A_k†A_k`.
    pub deficiency: f64,
    pub kraus_count: usize,
    pub runtime_seconds: f64,
}

impl FidelityRecord {
    /// Same record with the runtime zeroed, for reproducibility comparisons.
    pub fn without_runtime(&self) -> Self {
        Self {
            runtime_seconds: 0.0,
            ..self.clone()
        }
    }

    fn failed(point: &ScenarioPoint, w_over_r0: f64, runtime_seconds: f64) -> Self {
        Self {
            z: point.z,
            w_over_r0,
            max_in: point.max_in,
            max_out: point.max_out,
            fidelity: f64::NAN,
            deficiency: f64::NAN,
            kraus_count: 0,
            runtime_seconds,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.fidelity.is_nan()
    }
}

/// Cache file for a point, keyed by the parameter hash.
pub fn cache_path(dir: &Path, cfg: &ScenarioConfig, point: &ScenarioPoint) -> PathBuf {
    let hash = param_hash(
        cfg.w0,
        cfg.lambda,
        cfg.cn2,
        point.z,
        point.max_in,
        point.max_out,
        cfg.rel_tol,
        cfg.abs_tol,
    );
    dir.join(format!("superop-{hash}.bin"))
}

/// Assembles `T` for one point without touching the cache.
pub fn assemble_point(
    cfg: &ScenarioConfig,
    point: &ScenarioPoint,
    ladder: Option<&KernelLadder<f64>>,
) -> Result<SuperopMatrix<f64>> {
    let trunc = point.truncation()?;
    let geom = cfg.geometry()?;
    let turb = cfg.turbulence()?;
    let opts = cfg.assembly_options();
    match ladder {
        Some(l) => assemble_with_kernel(trunc, &geom, &turb, point.z, &opts, l),
        None => assemble_superop(trunc, &geom, &turb, point.z, &opts),
    }
}

/// Where a superoperator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Cache,
    Computed,
}

/// Loads `T` from the cache or assembles (and caches) it. A cache file that
/// fails its integrity checks is recomputed and overwritten.
pub fn load_or_assemble(
    cfg: &ScenarioConfig,
    point: &ScenarioPoint,
    ladder: Option<&KernelLadder<f64>>,
) -> Result<(SuperopMatrix<f64>, Provenance)> {
    let trunc = point.truncation()?;
    let cache = cfg.resolved_cache_dir().map(|d| cache_path(&d, cfg, point));
    if let Some(path) = &cache {
        if path.exists() {
            if let Ok(t) = load_superop::<f64>(path) {
                if t.truncation() == trunc {
                    return Ok((t, Provenance::Cache));
                }
            }
        }
    }
    let t = assemble_point(cfg, point, ladder)?;
    if let Some(path) = &cache {
        save_superop(&t, path)?;
    }
    Ok((t, Provenance::Computed))
}

/// Kraus set of a superoperator with the configured cutoff.
pub fn kraus_for(cfg: &ScenarioConfig, t: &SuperopMatrix<f64>) -> Result<KrausSet<f64>> {
    kraus_decompose(&rearrange(t), cfg.cutoff_ratio)
}

fn evaluate(
    cfg: &ScenarioConfig,
    point: &ScenarioPoint,
    ladder: Option<&KernelLadder<f64>>,
) -> Result<FidelityRecord> {
    let start = Instant::now();
    let (t, _) = load_or_assemble(cfg, point, ladder)?;
    let k = kraus_for(cfg, &t)?;
    let code = build_code(&point.truncation()?)?;
    let fidelity = channel_fidelity(&k, &code, cfg.rank_tol)?;
    let (_, deficiency) = completeness_deficiency(&k);
    Ok(FidelityRecord {
        z: point.z,
        w_over_r0: cfg.w_over_r0(point.z)?,
        max_in: point.max_in,
        max_out: point.max_out,
        fidelity,
        deficiency,
        kraus_count: k.len(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

fn tag(point: &ScenarioPoint, e: Error) -> Error {
    Error::Point {
        z: point.z,
        max_in: point.max_in,
        max_out: point.max_out,
        source: Box::new(e),
    }
}

/// Superoperator → Kraus → code → fidelity for one grid point.
pub fn run_point(point: &ScenarioPoint, cfg: &ScenarioConfig) -> Result<FidelityRecord> {
    with_workers(cfg.workers, || evaluate(cfg, point, None)).map_err(|e| tag(point, e))
}

#[derive(Debug, Default)]
pub struct SweepReport {
    /// One record per completed point in grid order; failures carry NaN fields.
    pub records: Vec<FidelityRecord>,
    pub failures: Vec<(ScenarioPoint, Error)>,
    pub cancelled: bool,
}

/// Runs every grid point. A failing point is recorded with NaN fidelity and
/// the sweep continues; `cancel` stops the sweep between distance groups.
/// Points at the same `z` share one angular-kernel ladder.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    cancel: &AtomicBool,
    mut on_record: impl FnMut(&FidelityRecord, Option<&Error>) + Send,
) -> Result<SweepReport> {
    let points = expand_grid(cfg)?;
    let geom = cfg.geometry()?;
    let turb = cfg.turbulence()?;
    let opts = cfg.assembly_options();
    with_workers(cfg.workers, move || {
        let mut report = SweepReport::default();
        let mut start = 0;
        while start < points.len() {
            if cancel.load(Ordering::SeqCst) {
                report.cancelled = true;
                break;
            }
            let z = points[start].z;
            let end = start + points[start..].iter().take_while(|p| p.z == z).count();
            let group = &points[start..end];
            let max_shift = group.iter().map(|p| p.max_in + p.max_out).max().unwrap_or(0);
            let ladder = turb.structure_function(geom.wavelength(), z).map(|sf| {
                KernelLadder::new(
                    sf,
                    geom.beam_width(z),
                    opts.radial_cutoff,
                    max_shift,
                    opts.max_refinements,
                )
            });
            let results: Vec<(Instant, Result<FidelityRecord>)> = group
                .par_iter()
                .map(|p| {
                    let t0 = Instant::now();
                    let r = match &ladder {
                        Ok(l) => evaluate(cfg, p, Some(l)),
                        Err(e) => Err(Error::Domain(e.to_string())),
                    };
                    (t0, r.map_err(|e| tag(p, e)))
                })
                .collect();
            for (p, (t0, r)) in group.iter().zip(results) {
                match r {
                    Ok(rec) => {
                        on_record(&rec, None);
                        report.records.push(rec);
                    }
                    Err(e) => {
                        let rec = FidelityRecord::failed(
                            p,
                            cfg.w_over_r0(p.z).unwrap_or(f64::NAN),
                            t0.elapsed().as_secs_f64(),
                        );
                        on_record(&rec, Some(&e));
                        report.records.push(rec);
                        report.failures.push((*p, e));
                    }
                }
            }
            start = end;
        }
        Ok(report)
    })
}

/// Results CSV: fidelity at 4 decimals, other floats at 6 significant digits.
pub fn records_to_csv(records: &[FidelityRecord]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for r in records {
        let fidelity = if r.fidelity.is_nan() {
            "nan".to_string()
        } else {
            format!("{:.4}", r.fidelity)
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            format_sig(r.z, 6),
            format_sig(r.w_over_r0, 6),
            r.max_in,
            r.max_out,
            fidelity,
            format_sig(r.deficiency, 6),
            r.kraus_count,
            format_sig(r.runtime_seconds, 6)
        );
    }
    s
}

pub fn write_records_csv(records: &[FidelityRecord], path: &Path) -> Result<()> {
    write_atomic(path, records_to_csv(records).as_bytes())
}

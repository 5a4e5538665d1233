//! `oam-channel`: turbulence channel construction, Kraus extraction, recovery
//! fidelity sweeps and field grids from the command line.
//!
//! Exit codes: 0 success, 1 computational failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use oam_channel::aqec::{apply_channel_and_recover, build_code, transpose_recovery};
use oam_channel::field::{state_intensity_grid, BasisTag, GridSpec, StateOnModes};
use oam_channel::kraus::{completeness_deficiency, leading_kraus_analysis, save_kraus};
use oam_channel::pipeline::{
    assemble_point, cache_path, expand_grid, kraus_for, load_or_assemble, run_sweep, write_records_csv,
    Provenance, ScenarioConfig, ScenarioPoint,
};
use oam_channel::superop::{param_hash, read_sidecar, save_superop};
use oam_channel::verify::{run_checks, VerifyLevel};
use oam_channel::Error;

const DEFAULT_CACHE_DIR: &str = "oam-cache";

#[derive(Parser)]
#[command(
    name = "oam-channel",
    version,
    about = "OAM photon turbulence channel: superoperator, Kraus operators, recovery fidelity",
    after_help = "Numeric flags override the config file. A grid flag that is omitted takes the \
                  first entry of the matching config list (z_list, max_in_list, max_out_list). \
                  OAM_CACHE_DIR overrides the config cache_dir."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct PointArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Propagation distance in meters.
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    max_in: Option<u32>,
    #[arg(long)]
    max_out: Option<u32>,
    /// Worker threads (overrides config `workers`).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble the superoperator for one point and write the cache file.
    ComputeSuperop {
        #[command(flatten)]
        point: PointArgs,
        /// Payload path; the JSON sidecar is written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract Kraus operators for one point and export them.
    Kraus {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full parameter grid and write the fidelity CSV.
    FidelitySweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write an intensity grid of a logical state at one pipeline stage.
    FieldGrid {
        #[command(flatten)]
        point: PointArgs,
        #[arg(long, value_enum)]
        state: LogicalState,
        #[arg(long, value_enum)]
        stage: Stage,
        /// Samples per axis.
        #[arg(long, default_value_t = 256)]
        points: usize,
        /// Half extent in beam widths.
        #[arg(long, default_value_t = 3.0)]
        half_width: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the oracle suite.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LogicalState {
    Logical0,
    Logical1,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Before,
    AfterNoise,
    AfterRecovery,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Truncation(_) => Failure::Usage(e.to_string()),
            other => Failure::Compute(other.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: &Path, workers: Option<usize>) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::from_path(path).map_err(|e| Failure::Usage(e.to_string()))?;
    if workers.is_some() {
        cfg.workers = workers;
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(cfg)
}

fn resolve_point(cfg: &ScenarioConfig, args: &PointArgs) -> Result<ScenarioPoint, Failure> {
    let first = |name: &str, v: Option<f64>| {
        v.ok_or_else(|| Failure::Usage(format!("{name} is empty in the config and no flag was given")))
    };
    let point = ScenarioPoint {
        z: match args.z {
            Some(z) => z,
            None => first("z_list", cfg.z_list.first().copied())?,
        },
        max_in: match args.max_in {
            Some(m) => m,
            None => first("max_in_list", cfg.max_in_list.first().map(|m| *m as f64))? as u32,
        },
        max_out: match args.max_out {
            Some(m) => m,
            None => first("max_out_list", cfg.max_out_list.first().map(|m| *m as f64))? as u32,
        },
    };
    if !(point.z >= 0.0 && point.z.is_finite()) {
        return Err(Failure::Usage(format!("z must be >= 0, got {}", point.z)));
    }
    point.truncation().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(point)
}

fn pool(workers: Option<usize>) {
    if let Some(n) = workers {
        // The global pool can only be configured once; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn compute_superop(args: PointArgs, out: Option<PathBuf>) -> CliResult {
    let cfg = load_config(&args.config, args.workers)?;
    let point = resolve_point(&cfg, &args)?;
    pool(cfg.workers);
    let target = match out {
        Some(p) => p,
        None => {
            let dir = cfg
                .resolved_cache_dir()
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR));
            cache_path(&dir, &cfg, &point)
        }
    };
    let expected = param_hash(
        cfg.w0,
        cfg.lambda,
        cfg.cn2,
        point.z,
        point.max_in,
        point.max_out,
        cfg.rel_tol,
        cfg.abs_tol,
    );
    if target.exists() {
        if let Ok(side) = read_sidecar(&target) {
            if side.param_hash == expected && oam_channel::superop::load_superop::<f64>(&target).is_ok() {
                println!("cache hit: {}", target.display());
                println!("elements: {}", side.entry_count);
                println!("max quadrature error: {:e}", side.max_error_estimate);
                return Ok(());
            }
        }
    }
    let start = Instant::now();
    let t = assemble_point(&cfg, &point, None)?;
    save_superop(&t, &target)?;
    println!("wrote {}", target.display());
    println!("elements: {}", t.len());
    println!("max quadrature error: {:e}", t.metadata.max_error_estimate);
    println!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn kraus(args: PointArgs, out: PathBuf) -> CliResult {
    let cfg = load_config(&args.config, args.workers)?;
    let point = resolve_point(&cfg, &args)?;
    pool(cfg.workers);
    let (t, provenance) = load_or_assemble(&cfg, &point, None)?;
    if provenance == Provenance::Cache {
        println!("cache hit");
    }
    let k = kraus_for(&cfg, &t)?;
    save_kraus(&k, &out)?;
    let (_, deficiency) = completeness_deficiency(&k);
    let report = leading_kraus_analysis(&k)?;
    println!("wrote {}", out.display());
    println!("kraus operators: {}", k.len());
    let head: Vec<String> = k.eigenvalues.iter().take(8).map(|l| format!("{l:.6e}")).collect();
    println!("leading eigenvalues: {}", head.join(" "));
    println!("completeness deficiency: {deficiency:.6e}");
    println!(
        "leading operator: c = {:.6}{:+.6}i, ‖A1 - cE‖ = {:.6e}",
        report.overlap.re, report.overlap.im, report.residual
    );
    for p in &report.pairs {
        println!(
            "pair ({}, {}): λ = {:.6e}, {:.6e}, shifts {:?} / {:?}",
            p.indices.0, p.indices.1, p.eigenvalues.0, p.eigenvalues.1, p.shifts.0, p.shifts.1
        );
    }
    Ok(())
}

fn fidelity_sweep(config: PathBuf, out: PathBuf, workers: Option<usize>) -> CliResult {
    let cfg = load_config(&config, workers)?;
    expand_grid(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = cancel.clone();
        let _ = ctrlc::set_handler(move || {
            eprintln!("interrupt: finishing the current distance group, then writing partial results");
            cancel.store(true, Ordering::SeqCst);
        });
    }
    let report = run_sweep(&cfg, &cancel, |rec, err| match err {
        None => eprintln!(
            "z={} max_in={} max_out={} fidelity={:.4} ({:.1}s)",
            rec.z, rec.max_in, rec.max_out, rec.fidelity, rec.runtime_seconds
        ),
        Some(e) => eprintln!("FAILED {e}"),
    })?;
    write_records_csv(&report.records, &out)?;
    println!("wrote {} ({} records)", out.display(), report.records.len());
    if report.cancelled {
        return Err(Failure::Compute(
            "sweep cancelled; partial results written".into(),
        ));
    }
    if !report.failures.is_empty() {
        return Err(Failure::Compute(format!(
            "{} point(s) failed",
            report.failures.len()
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn field_grid(
    args: PointArgs,
    state: LogicalState,
    stage: Stage,
    points: usize,
    half_width: f64,
    out: PathBuf,
) -> CliResult {
    let cfg = load_config(&args.config, args.workers)?;
    let point = resolve_point(&cfg, &args)?;
    pool(cfg.workers);
    let trunc = point.truncation()?;
    let geom = cfg.geometry()?;
    let code = build_code::<f64>(&trunc)?;
    let psi = match state {
        LogicalState::Logical0 => code.logical_zero.clone(),
        LogicalState::Logical1 => code.logical_one.clone(),
    };
    let rho = &psi * psi.adjoint();
    let st = match stage {
        Stage::Before => StateOnModes::pure(psi, trunc.input_basis(), BasisTag::Input, point.z)?,
        Stage::AfterNoise | Stage::AfterRecovery => {
            let (t, _) = load_or_assemble(&cfg, &point, None)?;
            let k = kraus_for(&cfg, &t)?;
            if matches!(stage, Stage::AfterNoise) {
                StateOnModes::mixed(k.apply(&rho)?, trunc.output_basis(), BasisTag::Output, point.z)?
            } else {
                let r = transpose_recovery(&k, &code, cfg.rank_tol)?;
                let out = apply_channel_and_recover(&k, &r, &rho)?;
                StateOnModes::mixed(out, trunc.input_basis(), BasisTag::Input, point.z)?
            }
        }
    };
    let spec = GridSpec { points, half_width };
    let grid = state_intensity_grid(&st, &geom, &spec).map_err(|e| match e {
        Error::Domain(m) => Failure::Usage(m),
        other => other.into(),
    })?;
    grid.write_csv(&out)?;
    println!("wrote {} ({}x{} grid)", out.display(), points, points);
    Ok(())
}

fn verify(level: Level) -> CliResult {
    let level = match level {
        Level::Fast => VerifyLevel::Fast,
        Level::Full => VerifyLevel::Full,
    };
    let results = run_checks(level);
    let mut failed = 0;
    for r in &results {
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(Failure::Compute(format!("{failed} check(s) failed")));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ComputeSuperop { point, out } => compute_superop(point, out),
        Command::Kraus { point, out } => kraus(point, out),
        Command::FidelitySweep { config, out, workers } => fidelity_sweep(config, out, workers),
        Command::FieldGrid {
            point,
            state,
            stage,
            points,
            half_width,
            out,
        } => field_grid(point, state, stage, points, half_width, out),
        Command::Verify { level } => verify(level),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

use std::sync::atomic::AtomicBool;

use oam_channel::pipeline::{
    cache_path, expand_grid, load_or_assemble, records_to_csv, run_point, run_sweep, Provenance,
    ScenarioConfig, ScenarioPoint, RESULTS_HEADER,
};
use oam_channel::superop::{read_sidecar, sidecar_path};

fn config(cache: Option<&std::path::Path>) -> ScenarioConfig {
    ScenarioConfig {
        w0: 0.01,
        lambda: 1e-6,
        cn2: 1e-14,
        z_list: vec![200.0],
        max_in_list: vec![1],
        max_out_list: vec![1, 3],
        rel_tol: 1e-6,
        abs_tol: 1e-10,
        rank_tol: 1e-10,
        cutoff_ratio: 1e-12,
        cache_dir: cache.map(|p| p.to_path_buf()),
        workers: Some(1),
    }
}

fn point(z: f64, max_in: u32, max_out: u32) -> ScenarioPoint {
    ScenarioPoint { z, max_in, max_out }
}

#[test]
fn reference_point_reproduces() {
    let rec = run_point(&point(200.0, 1, 3), &config(None)).unwrap();
    assert!((rec.fidelity - 0.9558).abs() <= 0.02, "fidelity {}", rec.fidelity);
    assert!((rec.w_over_r0 - 9.6954e-2).abs() <= 5e-6);
    assert!((0.0..=1.0).contains(&rec.deficiency));
    assert!(rec.kraus_count > 0);
}

#[test]
fn quiescent_point_is_perfect() {
    let mut cfg = config(None);
    cfg.cn2 = 0.0;
    let rec = run_point(&point(500.0, 2, 3), &cfg).unwrap();
    assert!((rec.fidelity - 1.0).abs() <= 1e-10);
    assert!(rec.deficiency.abs() <= 1e-10);
    assert_eq!(rec.kraus_count, 1);
    assert_eq!(rec.w_over_r0, 0.0);
}

#[test]
fn cached_and_fresh_records_agree_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Some(dir.path()));
    let p = point(200.0, 1, 3);
    let fresh = run_point(&p, &config(None)).unwrap();
    let first = run_point(&p, &cfg).unwrap();
    let path = cache_path(dir.path(), &cfg, &p);
    assert!(path.exists() && sidecar_path(&path).exists());
    let side = read_sidecar(&path).unwrap();
    assert_eq!((side.max_in, side.max_out, side.z), (1, 3, 200.0));
    let (_, provenance) = load_or_assemble(&cfg, &p, None).unwrap();
    assert_eq!(provenance, Provenance::Cache);
    let warm = run_point(&p, &cfg).unwrap();
    for r in [&first, &warm] {
        let (a, b) = (r.without_runtime(), fresh.without_runtime());
        assert_eq!(a.fidelity.to_bits(), b.fidelity.to_bits());
        assert_eq!(a.deficiency.to_bits(), b.deficiency.to_bits());
        assert_eq!(a, b);
    }
}

#[test]
fn corrupt_cache_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Some(dir.path()));
    let p = point(10.0, 1, 1);
    let good = run_point(&p, &cfg).unwrap();
    let path = cache_path(dir.path(), &cfg, &p);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[7] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    let (_, provenance) = load_or_assemble(&cfg, &p, None).unwrap();
    assert_eq!(provenance, Provenance::Computed);
    let again = run_point(&p, &cfg).unwrap();
    assert_eq!(good.without_runtime(), again.without_runtime());
}

#[test]
fn changed_parameters_miss_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Some(dir.path()));
    let p = point(10.0, 1, 1);
    run_point(&p, &cfg).unwrap();
    let mut other = cfg.clone();
    other.cn2 = 2e-14;
    assert_ne!(
        cache_path(dir.path(), &cfg, &p),
        cache_path(dir.path(), &other, &p)
    );
    let (_, provenance) = load_or_assemble(&other, &p, None).unwrap();
    assert_eq!(provenance, Provenance::Computed);
}

#[test]
fn sweep_matches_single_points() {
    let mut cfg = config(None);
    cfg.z_list = vec![10.0, 200.0];
    let cancel = AtomicBool::new(false);
    let mut seen = 0;
    let report = run_sweep(&cfg, &cancel, |_, err| {
        assert!(err.is_none());
        seen += 1;
    })
    .unwrap();
    assert_eq!(seen, 4);
    assert!(!report.cancelled && report.failures.is_empty());
    let points = expand_grid(&cfg).unwrap();
    for (rec, p) in report.records.iter().zip(&points) {
        let single = run_point(p, &cfg).unwrap();
        assert_eq!(rec.without_runtime(), single.without_runtime());
    }
    let csv = records_to_csv(&report.records);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], RESULTS_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("10,0.0135608,1,1,"));
}

#[test]
fn cancelled_sweep_stops_early() {
    let cfg = config(None);
    let cancel = AtomicBool::new(true);
    let report = run_sweep(&cfg, &cancel, |_, _| {}).unwrap();
    assert!(report.cancelled);
    assert!(report.records.is_empty());
}

#[test]
fn unreachable_tolerance_is_a_recorded_failure() {
    let mut cfg = config(None);
    cfg.z_list = vec![1000.0];
    cfg.max_out_list = vec![1];
    cfg.rel_tol = 1e-15;
    cfg.abs_tol = 0.0;
    let cancel = AtomicBool::new(false);
    let report = run_sweep(&cfg, &cancel, |_, _| {}).unwrap();
    assert_eq!(report.records.len(), 1);
    assert_eq!(report.failures.len(), 1);
    assert!(report.records[0].is_failure());
    let msg = report.failures[0].1.to_string();
    assert!(msg.contains("1000"), "{msg}");
    assert!(records_to_csv(&report.records)
        .lines()
        .nth(1)
        .unwrap()
        .contains(",nan,"));
}

#[test]
fn full_grid_has_seventy_five_points() {
    let mut cfg = config(None);
    cfg.z_list = vec![1.0, 10.0, 200.0, 500.0, 1000.0];
    cfg.max_in_list = vec![1, 2, 3];
    cfg.max_out_list = (1..=6).collect();
    let points = expand_grid(&cfg).unwrap();
    assert_eq!(points.len(), 75);
    assert!(points.iter().all(|p| p.max_out >= p.max_in));
    assert!(points
        .windows(2)
        .all(|w| { (w[0].z, w[0].max_in, w[0].max_out) < (w[1].z, w[1].max_in, w[1].max_out) }));
}

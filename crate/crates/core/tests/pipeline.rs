//! Cross-module flows: generation, repair, search, persistence, and the
//! Cesàro extraction applied to step errors.

use shadowlab::cesaro::{extract_null_set, verify_equivalence, BoundedSequence, LevelSchedule, DEFAULT_DENSITY_MARGIN};
use shadowlab::concat::{asymptotic_certificate, concatenate, noisy_blocks, BlockPlan, GrowthRule};
use shadowlab::disk_example::{build_disk_system, decaying_corruption};
use shadowlab::io::{load_orbit, load_plan, save_orbit, save_plan};
use shadowlab::pseudo_orbit::{is_average_pseudo_orbit, is_ergodic_pseudo_orbit, make_corrupted_orbit, JumpRule, ScanMode};
use shadowlab::shadow::{average_shadow_search, trace_report, SearchOptions, ShadowParams};
use shadowlab::space::DEFAULT_NET_CAP;
use shadowlab::surgery::{repair, RepairOptions};
use shadowlab::{IndexSet, PseudoOrbit};

fn repaired_disk_orbit(h: usize, delta: f64) -> PseudoOrbit {
    let system = build_disk_system();
    let bad = IndexSet::from_predicate(h, |j| j.is_power_of_two());
    let xi = make_corrupted_orbit(&system, &[0.6, -0.3], h, &bad, &JumpRule::Uniform, 5).unwrap();
    let options = RepairOptions {
        density_tol: 0.02,
        ..RepairOptions::default()
    };
    assert!(is_ergodic_pseudo_orbit(&xi, delta / 2.0, options.density_tol, 0.5).unwrap().holds);
    let r = repair(&xi, delta, options).unwrap();
    assert!(is_average_pseudo_orbit(&r.y, delta, r.block_length, ScanMode::default()).unwrap().holds);
    r.y
}

#[test]
fn search_minimum_matches_exhaustive_rescan() {
    let y = repaired_disk_orbit(2000, 0.4);
    let params = ShadowParams {
        epsilon: 0.2,
        ..ShadowParams::default()
    };
    let out = average_shadow_search(&y, params, 0.05, SearchOptions::default()).unwrap();
    assert!(out.success);

    let net = y.space().net(0.05, DEFAULT_NET_CAP).unwrap();
    assert_eq!(out.net_size, net.len());
    let limsups: Vec<f64> = net.iter().map(|z| trace_report(&y, z, params).unwrap().limsup).collect();
    let min = limsups.iter().cloned().fold(f64::INFINITY, f64::min);
    let first = limsups.iter().position(|v| *v == min).unwrap();
    assert_eq!(out.objective, min);
    assert_eq!(out.best_index, first);
    assert_eq!(out.best.z, net[first]);
}

#[test]
fn repaired_orbit_survives_a_file_round_trip() {
    let y = repaired_disk_orbit(1500, 0.8);
    let dir = tempdir("orbit");
    let path = dir.join("y.json");
    save_orbit(&path, &y).unwrap();
    assert_eq!(load_orbit(&path).unwrap(), y);
}

#[test]
fn persisted_plan_concatenates_identically() {
    let system = build_disk_system();
    let blocks = noisy_blocks(&system, &[8, 80, 1024], &[0.5, 0.25, 0.15], 2).unwrap();
    let plan = BlockPlan::new(system, blocks, GrowthRule::default()).unwrap();
    let dir = tempdir("plan");
    let back = load_plan(&save_plan(&dir, &plan).unwrap()).unwrap();
    assert_eq!(back, plan);
    let a = concatenate(&plan).unwrap();
    let b = concatenate(&back).unwrap();
    assert_eq!(a, b);
    let cert = asymptotic_certificate(&b, &back, None).unwrap();
    assert!(cert.splits.iter().all(|s| s.matches()));
    assert!(cert.boundaries.iter().all(|c| c.bounds_hold()));
}

#[test]
fn decaying_step_errors_are_cesaro_null() {
    let xi = decaying_corruption(20_000, 3).unwrap();
    let a = BoundedSequence::new(xi.step_errors().to_vec(), xi.space().diameter()).unwrap();
    let x = extract_null_set(&a, &LevelSchedule::Harmonic, DEFAULT_DENSITY_MARGIN, 0.5).unwrap();
    // errors below 1/k from k-th stage on: only the first few steps can land in J
    assert!(x.j.indices().iter().all(|&n| n < 10), "{:?}", x.j.indices());
    assert!(x.guarantee_violation(&a).is_none());
    let eq = verify_equivalence(&a, &x.j, 0.01, 0.5).unwrap();
    assert!(eq.verdict.holds, "{eq:?}");
}

fn tempdir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("shadowlab-pipeline-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

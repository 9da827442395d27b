//! Subcommand bodies. Each writes its artifacts under the output directory
//! and returns the paths it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shadowlab::cesaro::{cesaro_means, extract_null_set, verify_equivalence, BoundedSequence};
use shadowlab::concat::{asymptotic_certificate, concatenate, noisy_blocks, BlockPlan};
use shadowlab::density::{DensityEstimate, IndexSet};
use shadowlab::disk_example::{
    aasp_demo, build_disk_system, decaying_corruption, tracking_curve, tracking_verdict, DiskExampleInstance,
};
use shadowlab::io::{load_orbit, read_sequence_csv, save_orbit, save_plan, write_csv, write_json};
use shadowlab::pseudo_orbit::{
    is_average_pseudo_orbit, is_ergodic_pseudo_orbit, is_pseudo_orbit, is_weak_asymptotic_average,
    is_asymptotic_average, make_corrupted_orbit, seeded_point, ScanMode,
};
use shadowlab::shadow::{
    average_shadow_search, m_alpha_shadow_search, refined_asymptotic_search, SearchOptions, SearchOutcome,
    ShadowReport, ShadowVariant, VariantVerdict,
};
use shadowlab::surgery::{block_length, repair, RepairOptions, RepairResult};
use shadowlab::{Point, PseudoOrbit, Result, Verdict};

use crate::config::{Corruption, DiskInstance, ExperimentConfig, Scan};

pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    /// Explicit input, overriding `config.input`.
    pub input: Option<PathBuf>,
}

impl Context {
    fn input(&self) -> Option<&Path> {
        self.input.as_deref().or(self.config.input.as_deref())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// The input orbit, or one generated from the config when there is none.
    fn orbit(&self) -> Result<PseudoOrbit> {
        match self.input() {
            Some(p) => load_orbit(p),
            None => generate_orbit(&self.config),
        }
    }

    fn search_options(&self) -> SearchOptions {
        SearchOptions {
            threads: None,
            net_cap: self.config.net_cap,
        }
    }
}

fn corruption_set(c: &Corruption, horizon: usize) -> Result<IndexSet> {
    Ok(match c {
        Corruption::None => IndexSet::empty(horizon),
        Corruption::Squares => IndexSet::from_predicate(horizon, is_square),
        Corruption::Indices { indices } => IndexSet::from_unsorted(indices.clone(), horizon)?,
        Corruption::All => IndexSet::full(horizon),
    })
}

fn is_square(j: usize) -> bool {
    let r = (j as f64).sqrt() as usize;
    (r.saturating_sub(1)..=r + 1).any(|k| k * k == j)
}

pub fn generate_orbit(config: &ExperimentConfig) -> Result<PseudoOrbit> {
    let system = config.system();
    let start = match &config.generate.start {
        Some(p) => p.clone(),
        None => seeded_point(system.space(), config.seed),
    };
    let c = corruption_set(&config.generate.corruption, config.horizon)?;
    make_corrupted_orbit(&system, &start, config.horizon, &c, &config.generate.jump, config.seed)
}

pub fn generate(ctx: &Context) -> Result<Vec<PathBuf>> {
    let xi = generate_orbit(&ctx.config)?;
    let path = ctx.path("orbit.json");
    save_orbit(&path, &xi)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct Classification {
    horizon: usize,
    clamped: usize,
    exceptional_count: usize,
    exceptional_density: DensityEstimate,
    window: usize,
    verdicts: Vec<Verdict>,
}

fn scan_mode(scan: Scan, seed: u64) -> ScanMode {
    match scan {
        Scan::Full { budget } => ScanMode::Full { budget: budget as u128 },
        Scan::Sampled { samples } => ScanMode::Sampled { samples, seed },
    }
}

fn classification(xi: &PseudoOrbit, config: &ExperimentConfig, window: usize) -> Result<Classification> {
    let t = &config.thresholds;
    let tf = config.tail_fraction;
    let bad = xi.exceptional_set(t.delta);
    let window = window.min(xi.horizon());
    Ok(Classification {
        horizon: xi.horizon(),
        clamped: xi.clamped().len(),
        exceptional_count: bad.len(),
        exceptional_density: bad.summary(tf)?,
        window,
        verdicts: vec![
            is_pseudo_orbit(xi, t.delta)?,
            is_ergodic_pseudo_orbit(xi, t.delta, t.density_tol, tf)?,
            is_average_pseudo_orbit(xi, t.delta, window, scan_mode(config.classify.scan, config.seed))?,
            is_weak_asymptotic_average(xi, t.delta, tf)?,
            is_asymptotic_average(xi, t.tol, tf)?,
        ],
    })
}

fn default_window(xi: &PseudoOrbit, config: &ExperimentConfig) -> Result<usize> {
    match config.classify.window {
        Some(n) => Ok(n),
        None => block_length(xi.space().diameter(), config.thresholds.delta),
    }
}

pub fn classify(ctx: &Context) -> Result<Vec<PathBuf>> {
    let xi = ctx.orbit()?;
    let window = default_window(&xi, &ctx.config)?;
    let report = classification(&xi, &ctx.config, window)?;
    let path = ctx.path("classify.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct RepairAudit<'a> {
    delta: f64,
    block_length: usize,
    options: RepairOptions,
    short_circuited: bool,
    truncated_last_block: bool,
    bad: &'a [usize],
    anchors: &'a [usize],
    diff: &'a [usize],
    block_points: usize,
    diff_within_blocks: bool,
    max_in_block_error: f64,
    ergodic_verdict: &'a Verdict,
    average_verdict: Verdict,
}

fn repair_audit<'a>(r: &'a RepairResult, config: &ExperimentConfig) -> Result<RepairAudit<'a>> {
    let window = r.block_length.min(r.y.horizon());
    Ok(RepairAudit {
        delta: r.delta,
        block_length: r.block_length,
        options: r.options,
        short_circuited: r.short_circuited,
        truncated_last_block: r.truncated_last_block,
        bad: r.bad.indices(),
        anchors: r.anchors.indices(),
        diff: r.diff.indices(),
        block_points: r.blocks.len(),
        diff_within_blocks: r.diff.is_subset(&r.blocks),
        max_in_block_error: r.in_block_errors().map(|(_, e)| e).fold(0.0, f64::max),
        ergodic_verdict: &r.ergodic_verdict,
        average_verdict: is_average_pseudo_orbit(&r.y, r.delta, window, scan_mode(config.classify.scan, config.seed))?,
    })
}

fn repair_options(config: &ExperimentConfig) -> RepairOptions {
    RepairOptions {
        density_tol: config.thresholds.density_tol,
        tail_fraction: config.tail_fraction,
        finite_cutoff: config.repair.finite_cutoff,
    }
}

pub fn run_repair(ctx: &Context) -> Result<Vec<PathBuf>> {
    let xi = ctx.orbit()?;
    let r = repair(&xi, ctx.config.thresholds.delta, repair_options(&ctx.config))?;
    let orbit_path = ctx.path("repaired.json");
    save_orbit(&orbit_path, &r.y)?;
    let audit_path = ctx.path("repair.json");
    write_json(&audit_path, &repair_audit(&r, &ctx.config)?)?;
    Ok(vec![orbit_path, audit_path])
}

#[derive(Serialize)]
struct CesaroReport<'a> {
    length: usize,
    bound: f64,
    margin: f64,
    tail_fraction: f64,
    j: &'a [usize],
    j_density: f64,
    stages: &'a [shadowlab::cesaro::Stage],
    truncated: bool,
    guarantee_violation: Option<(usize, f64, f64)>,
    precondition: &'a Verdict,
    equivalence: shadowlab::cesaro::EquivalenceReport,
}

pub fn cesaro(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let values = match ctx.input() {
        Some(p) => read_sequence_csv(p)?,
        None => (0..c.horizon).map(|n| if is_square(n) { 1.0 } else { 0.0 }).collect(),
    };
    let a = match c.cesaro.bound {
        Some(b) => BoundedSequence::new(values, b)?,
        None => BoundedSequence::from_values(values)?,
    };
    let x = extract_null_set(&a, &c.cesaro.schedule, c.cesaro.margin, c.tail_fraction)?;
    let equivalence = verify_equivalence(&a, &x.j, c.cesaro.tol, c.tail_fraction)?;
    let report = CesaroReport {
        length: a.len(),
        bound: a.bound(),
        margin: c.cesaro.margin,
        tail_fraction: c.tail_fraction,
        j: x.j.indices(),
        j_density: x.j.prefix_density(a.len())?,
        stages: &x.stages,
        truncated: x.truncated,
        guarantee_violation: x.guarantee_violation(&a),
        precondition: &x.precondition,
        equivalence,
    };
    let json = ctx.path("cesaro.json");
    write_json(&json, &report)?;
    let csv = ctx.path("cesaro_means.csv");
    let means = cesaro_means(&a);
    write_csv(&csv, &["n", "mean"], means.iter().enumerate().map(|(i, m)| vec![(i + 1) as f64, *m]))?;
    Ok(vec![json, csv])
}

#[derive(Serialize)]
struct ConcatReport {
    lengths: Vec<usize>,
    offsets: Vec<usize>,
    quality_levels: Vec<usize>,
    offset_bound_holds: bool,
    junction_errors: Vec<f64>,
    splits_match: bool,
    max_split_gap: f64,
    certificate: CertificateSummary,
}

#[derive(Serialize)]
struct CertificateSummary {
    boundaries: Vec<shadowlab::concat::BoundaryCheck>,
    growth_violations: Vec<shadowlab::concat::GrowthViolation>,
    boundary_means_monotone: bool,
    heuristic: bool,
    verdict: Verdict,
}

pub fn concat(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let system = c.system();
    let blocks = noisy_blocks(&system, &c.concat.lengths, &c.concat.levels, c.seed)?;
    let plan = BlockPlan::new(system, blocks, c.concat.growth)?;
    let manifest = save_plan(&ctx.path("plan"), &plan)?;
    let joined = concatenate(&plan)?;
    let cert = asymptotic_certificate(&joined, &plan, None)?;
    let orbit_path = ctx.path("concat_orbit.json");
    save_orbit(&orbit_path, &joined.xi)?;
    let report = ConcatReport {
        lengths: plan.lengths(),
        offsets: plan.offsets().to_vec(),
        quality_levels: plan.quality_levels().to_vec(),
        offset_bound_holds: plan.offset_bound_holds(),
        junction_errors: joined.junction_errors.clone(),
        splits_match: cert.splits.iter().all(|s| s.matches()),
        max_split_gap: cert.splits.iter().map(|s| (s.total() - s.direct).abs()).fold(0.0, f64::max),
        certificate: CertificateSummary {
            boundaries: cert.boundaries,
            growth_violations: cert.growth_violations,
            boundary_means_monotone: cert.boundary_means_monotone,
            heuristic: cert.heuristic,
            verdict: cert.verdict,
        },
    };
    let json = ctx.path("concat.json");
    write_json(&json, &report)?;
    let csv = ctx.path("concat_means.csv");
    let sums = joined.xi.error_prefix_sums();
    write_csv(&csv, &["n", "mean"], (1..sums.len()).map(|n| vec![n as f64, sums[n] / n as f64]))?;
    Ok(vec![manifest, orbit_path, json, csv])
}

/// A shadow report without its per-step curves, which go to CSV.
#[derive(Serialize)]
struct ReportSummary<'a> {
    z: &'a Point,
    params: shadowlab::shadow::ShadowParams,
    diameter: f64,
    horizon: usize,
    limsup: f64,
    limsup_at: usize,
    hit_count: usize,
    hit_density: DensityEstimate,
    mesh: Option<f64>,
    verdicts: &'a [VariantVerdict],
}

impl<'a> From<&'a ShadowReport> for ReportSummary<'a> {
    fn from(r: &'a ShadowReport) -> Self {
        ReportSummary {
            z: &r.z,
            params: r.params,
            diameter: r.diameter,
            horizon: r.horizon(),
            limsup: r.limsup,
            limsup_at: r.limsup_at,
            hit_count: r.hit_set.len(),
            hit_density: r.hit_density,
            mesh: r.mesh,
            verdicts: &r.verdicts,
        }
    }
}

#[derive(Serialize)]
struct OutcomeSummary<'a> {
    success: bool,
    objective: f64,
    best_index: usize,
    net_size: usize,
    mesh: f64,
    best: ReportSummary<'a>,
}

impl<'a> From<&'a SearchOutcome> for OutcomeSummary<'a> {
    fn from(o: &'a SearchOutcome) -> Self {
        OutcomeSummary {
            success: o.success,
            objective: o.objective,
            best_index: o.best_index,
            net_size: o.net_size,
            mesh: o.mesh,
            best: (&o.best).into(),
        }
    }
}

#[derive(Serialize)]
struct SearchReport<'a> {
    average: OutcomeSummary<'a>,
    m_alpha: OutcomeSummary<'a>,
    refined: Option<shadowlab::shadow::RefinedSearch>,
}

fn write_curves(path: &Path, r: &ShadowReport) -> Result<()> {
    write_csv(
        path,
        &["n", "trace_error", "prefix_mean"],
        r.prefix_means
            .iter()
            .enumerate()
            .map(|(i, m)| vec![(i + 1) as f64, r.trace_errors[i], *m]),
    )
}

pub fn search(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let xi = ctx.orbit()?;
    let params = c.shadow_params();
    let opts = ctx.search_options();
    let average = average_shadow_search(&xi, params, c.mesh, opts)?;
    let m_alpha = m_alpha_shadow_search(&xi, params, c.mesh, opts)?;
    let refined = if c.search.refined_meshes.is_empty() {
        None
    } else {
        Some(refined_asymptotic_search(
            &xi,
            c.search.epsilon0,
            &c.search.refined_meshes,
            c.search.slack,
            c.tail_fraction,
            opts,
        )?)
    };
    let json = ctx.path("search.json");
    write_json(
        &json,
        &SearchReport {
            average: (&average).into(),
            m_alpha: (&m_alpha).into(),
            refined,
        },
    )?;
    let csv = ctx.path("search_curve.csv");
    write_curves(&csv, &average.best)?;
    Ok(vec![json, csv])
}

#[derive(Serialize)]
struct DiskReport {
    instance: DiskInstance,
    seed: u64,
    start: Point,
    m: f64,
    recurrence_violation: Option<(usize, f64, f64)>,
    verdict: Verdict,
    precondition: Verdict,
    tail_max_mean: f64,
    levels: Vec<(f64, bool)>,
}

pub fn example_disk(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let inst = match c.example_disk.instance {
        DiskInstance::Decaying => DiskExampleInstance::new(decaying_corruption(c.horizon, c.seed)?, None)?,
        DiskInstance::TrueOrbit => {
            let xi = PseudoOrbit::true_orbit(&build_disk_system(), &[0.5, 0.5], c.horizon)?;
            DiskExampleInstance::new(xi, Some(Point::from([0.0, 0.0])))?
        }
    };
    let curve = tracking_curve(&inst);
    let demo = aasp_demo(&inst, c.thresholds.tol, &c.example_disk.levels, c.tail_fraction)?;
    let csv = ctx.path("example_disk.csv");
    write_csv(
        &csv,
        &["n", "lhs", "rhs", "mean"],
        curve.iter().map(|t| vec![t.n as f64, t.lhs, t.rhs, t.lhs / t.n as f64]),
    )?;
    let json = ctx.path("example_disk.json");
    write_json(
        &json,
        &DiskReport {
            instance: c.example_disk.instance,
            seed: c.seed,
            start: inst.start.clone(),
            m: inst.m,
            recurrence_violation: inst.recurrence_violation(),
            verdict: tracking_verdict(&inst),
            precondition: demo.precondition,
            tail_max_mean: demo.tail_max,
            levels: demo.levels,
        },
    )?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct MatrixRow {
    orbit: &'static str,
    check: String,
    holds: bool,
    verdict: Verdict,
}

#[derive(Serialize)]
struct Suite<'a> {
    config: &'a ExperimentConfig,
    block_length: usize,
    anchors: usize,
    rows: Vec<MatrixRow>,
}

fn property_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Generates an ergodic pseudo-orbit, repairs it, classifies both, and runs
/// both searches on both, reporting every verdict as one matrix.
pub fn equivalence_suite(ctx: &Context) -> Result<Vec<PathBuf>> {
    let c = &ctx.config;
    let xi = generate_orbit(c)?;
    let r = repair(&xi, c.thresholds.delta, repair_options(c))?;
    let params = c.shadow_params();
    let opts = ctx.search_options();
    let mut rows = Vec::new();
    for (name, orbit) in [("input", &xi), ("repaired", &r.y)] {
        for verdict in classification(orbit, c, r.block_length)?.verdicts {
            rows.push(MatrixRow {
                orbit: name,
                check: property_name(&verdict.property),
                holds: verdict.holds,
                verdict,
            });
        }
        let average = average_shadow_search(orbit, params, c.mesh, opts)?;
        let m_alpha = m_alpha_shadow_search(orbit, params, c.mesh, opts)?;
        for variant in ShadowVariant::ALL {
            let best = if variant == ShadowVariant::MAlpha { &m_alpha.best } else { &average.best };
            let verdict = best.verdict(variant).clone();
            rows.push(MatrixRow {
                orbit: name,
                check: format!("shadow/{}", property_name(&variant)),
                holds: verdict.holds,
                verdict,
            });
        }
    }
    let json = ctx.path("equivalence_suite.json");
    let suite = Suite {
        config: c,
        block_length: r.block_length,
        anchors: r.anchors.len(),
        rows,
    };
    write_json(&json, &suite)?;
    let csv = ctx.path("equivalence_matrix.csv");
    let mut w = csv_rows(&suite.rows);
    w.insert(0, "orbit,check,holds".to_string());
    fs::write(&csv, w.join("\n") + "\n")?;
    Ok(vec![json, csv])
}

fn csv_rows(rows: &[MatrixRow]) -> Vec<String> {
    rows.iter().map(|r| format!("{},{},{}", r.orbit, r.check, r.holds)).collect()
}

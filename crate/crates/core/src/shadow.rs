//! Tracing errors of true orbits against a pseudo-orbit, the six shadowing
//! verdicts, and exhaustive ε-net searches for a shadowing point.
//!
//! For a candidate `z` the trace errors are `t_j = d(f_w^j(z), x_j)` for
//! `j = 0..=H`. The limsup of their prefix means is the maximum over the tail
//! window. Searches evaluate every net point in parallel and reduce by
//! (objective, net index), so results do not depend on the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{tail_window, DensityEstimate, IndexSet, DEFAULT_TAIL_FRACTION};
use crate::error::{Error, Result};
use crate::pseudo_orbit::{prefix_sums, PseudoOrbit};
use crate::space::{Point, DEFAULT_NET_CAP};
use crate::verdict::{Property, Verdict, Witness};

pub const INEQUALITY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowParams {
    pub epsilon: f64,
    pub alpha: f64,
    /// Level standing in for "tends to zero" in the asymptotic variant.
    pub tol: f64,
    pub tail_fraction: f64,
}

impl Default for ShadowParams {
    fn default() -> Self {
        ShadowParams {
            epsilon: 0.1,
            alpha: 0.5,
            tol: 0.01,
            tail_fraction: DEFAULT_TAIL_FRACTION,
        }
    }
}

impl ShadowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::param("tol", format!("must be positive, got {}", self.tol)));
        }
        tail_window(1, self.tail_fraction)?;
        Ok(())
    }

    fn pairs(&self) -> [(&'static str, f64); 4] {
        [
            ("epsilon", self.epsilon),
            ("alpha", self.alpha),
            ("tol", self.tol),
            ("tail_fraction", self.tail_fraction),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowVariant {
    MeanErgodic,
    Average,
    AsymptoticAverage,
    WeakAsymptoticAverage,
    AlmostAsymptoticAverage,
    MAlpha,
}

impl ShadowVariant {
    pub const ALL: [ShadowVariant; 6] = [
        ShadowVariant::MeanErgodic,
        ShadowVariant::Average,
        ShadowVariant::AsymptoticAverage,
        ShadowVariant::WeakAsymptoticAverage,
        ShadowVariant::AlmostAsymptoticAverage,
        ShadowVariant::MAlpha,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantVerdict {
    pub variant: ShadowVariant,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowReport {
    pub z: Point,
    pub params: ShadowParams,
    pub diameter: f64,
    /// `t_j` for `j = 0..=H`.
    pub trace_errors: Vec<f64>,
    /// Element `n-1` is `(1/n) Σ_{j<n} t_j`.
    pub prefix_means: Vec<f64>,
    /// Maximum of the prefix means over the tail window.
    pub limsup: f64,
    /// Prefix length at which the maximum is attained.
    pub limsup_at: usize,
    /// `{j : t_j < ε}`.
    pub hit_set: IndexSet,
    pub hit_density: DensityEstimate,
    pub mesh: Option<f64>,
    pub verdicts: Vec<VariantVerdict>,
}

/// `t_j = d(f_w^j(z), x_j)` for every point of `ξ`.
pub fn trace_errors(xi: &PseudoOrbit, z: &[f64]) -> Result<Vec<f64>> {
    let orbit = xi.system().orbit(z, xi.points().len())?;
    let space = xi.space();
    Ok(orbit.iter().zip(xi.points()).map(|(a, b)| space.distance(a, b)).collect())
}

/// Tail-window maximum of the prefix means of `t`, with the prefix length
/// attaining it (first one on ties).
fn tail_limsup(t: &[f64], tail_fraction: f64) -> Result<(usize, f64)> {
    let sums = prefix_sums(t);
    let mut best = (0usize, f64::NEG_INFINITY);
    for n in tail_window(t.len(), tail_fraction)? {
        let m = sums[n] / n as f64;
        if m > best.1 {
            best = (n, m);
        }
    }
    Ok(best)
}

impl ShadowReport {
    /// Builds a report from raw trace errors.
    pub fn from_trace_errors(z: Point, trace_errors: Vec<f64>, diameter: f64, params: ShadowParams) -> Result<Self> {
        params.validate()?;
        if trace_errors.is_empty() {
            return Err(Error::param("trace_errors", "empty trace"));
        }
        if let Some(t) = trace_errors.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::param("trace_errors", format!("must be finite and nonnegative, got {t}")));
        }
        let sums = prefix_sums(&trace_errors);
        let prefix_means: Vec<f64> = (1..=trace_errors.len()).map(|n| sums[n] / n as f64).collect();
        let (limsup_at, limsup) = tail_limsup(&trace_errors, params.tail_fraction)?;
        let hit_set = IndexSet::from_predicate(trace_errors.len(), |j| trace_errors[j] < params.epsilon);
        let hit_density = hit_set.summary(params.tail_fraction)?;
        let mut report = ShadowReport {
            z,
            params,
            diameter,
            trace_errors,
            prefix_means,
            limsup,
            limsup_at,
            hit_set,
            hit_density,
            mesh: None,
            verdicts: Vec::new(),
        };
        report.verdicts = ShadowVariant::ALL.iter().map(|v| report.variant_verdict(*v)).collect();
        Ok(report)
    }

    pub fn horizon(&self) -> usize {
        self.trace_errors.len()
    }

    fn variant_verdict(&self, variant: ShadowVariant) -> VariantVerdict {
        let mut params = self.params.pairs().to_vec();
        params.push(("horizon", self.horizon() as f64));
        let on_average = |property, level: f64| {
            if self.limsup < level {
                Verdict::pass(property, &params)
            } else {
                Verdict::fail(
                    property,
                    Witness::PrefixMean {
                        n: self.limsup_at,
                        mean: self.limsup,
                    },
                    &params,
                )
            }
        };
        let verdict = match variant {
            ShadowVariant::AsymptoticAverage => {
                on_average(Property::AsymptoticallyShadowedOnAverage, self.params.tol)
            }
            ShadowVariant::MAlpha => {
                if self.hit_density.lower > self.params.alpha {
                    Verdict::pass(Property::MAlphaShadowed, &params)
                } else {
                    Verdict::fail(
                        Property::MAlphaShadowed,
                        Witness::ExceptionalDensity {
                            upper_density: 1.0 - self.hit_density.lower,
                            count: self.horizon() - self.hit_set.len(),
                        },
                        &params,
                    )
                }
            }
            _ => on_average(Property::ShadowedOnAverage, self.params.epsilon),
        };
        VariantVerdict { variant, verdict }
    }

    pub fn verdict(&self, variant: ShadowVariant) -> &Verdict {
        &self
            .verdicts
            .iter()
            .find(|v| v.variant == variant)
            .expect("every variant is evaluated")
            .verdict
    }
}

/// Trace report of the true orbit of `z` against `ξ`.
pub fn trace_report(xi: &PseudoOrbit, z: &[f64], params: ShadowParams) -> Result<ShadowReport> {
    let t = trace_errors(xi, z)?;
    ShadowReport::from_trace_errors(Point::new(z.to_vec()), t, xi.space().diameter(), params)
}

/// First prefix `n` with `mean_n(t) < ε·d_n({t ≥ ε})`, as `(n, lhs, rhs)`.
pub fn markov_violation(t: &[f64], epsilon: f64) -> Option<(usize, f64, f64)> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, v) in t.iter().enumerate() {
        sum += v;
        if *v >= epsilon {
            count += 1;
        }
        let n = (i + 1) as f64;
        let (lhs, rhs) = (sum / n, epsilon * count as f64 / n);
        if lhs < rhs - INEQUALITY_TOL {
            return Some((i + 1, lhs, rhs));
        }
    }
    None
}

/// First prefix `n` with `mean_n(t) > diam·d_n({t ≥ η}) + η`, as `(n, lhs, rhs)`.
pub fn diameter_bound_violation(t: &[f64], diameter: f64, eta: f64) -> Option<(usize, f64, f64)> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, v) in t.iter().enumerate() {
        sum += v;
        if *v >= eta {
            count += 1;
        }
        let n = (i + 1) as f64;
        let (lhs, rhs) = (sum / n, diameter * count as f64 / n + eta);
        if lhs > rhs + INEQUALITY_TOL {
            return Some((i + 1, lhs, rhs));
        }
    }
    None
}

/// `mean_n ≥ ε·d_n({t ≥ ε})` at every prefix of the report.
pub fn markov_inequality_check(report: &ShadowReport, epsilon: f64) -> bool {
    markov_violation(&report.trace_errors, epsilon).is_none()
}

/// `mean_n ≤ diam(X)·d_n({t ≥ η}) + η` at every prefix of the report.
pub fn diameter_bound_check(report: &ShadowReport, eta: f64) -> bool {
    diameter_bound_violation(&report.trace_errors, report.diameter, eta).is_none()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Worker threads; `None` uses the global pool. Affects speed only.
    pub threads: Option<usize>,
    pub net_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            threads: None,
            net_cap: DEFAULT_NET_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub success: bool,
    pub best: ShadowReport,
    /// Position of the best point in net enumeration order.
    pub best_index: usize,
    /// The objective that was optimized at the best point.
    pub objective: f64,
    pub net_size: usize,
    pub mesh: f64,
}

fn run_in_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(0) => Err(Error::param("threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param("threads", e.to_string()))?;
            Ok(pool.install(job))
        }
    }
}

/// Evaluates `objective` on every net point and returns the index of the
/// minimum, ties going to the lowest index.
fn net_argmin(
    xi: &PseudoOrbit,
    mesh: f64,
    options: SearchOptions,
    objective: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Result<(Vec<Point>, usize, f64)> {
    let net = xi.space().net(mesh, options.net_cap)?;
    let values: Vec<f64> = run_in_pool(options.threads, || {
        net.par_iter().map(|z| objective(z)).collect::<Result<Vec<f64>>>()
    })??;
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    let value = values[best];
    Ok((net, best, value))
}

/// Minimizes the limsup estimate over the `mesh`-net; succeeds when the
/// minimum is below `ε`.
pub fn average_shadow_search(
    xi: &PseudoOrbit,
    params: ShadowParams,
    mesh: f64,
    options: SearchOptions,
) -> Result<SearchOutcome> {
    params.validate()?;
    let tf = params.tail_fraction;
    let (net, index, value) = net_argmin(xi, mesh, options, |z| Ok(tail_limsup(&trace_errors(xi, z)?, tf)?.1))?;
    let mut best = trace_report(xi, &net[index], params)?;
    best.mesh = Some(mesh);
    Ok(SearchOutcome {
        success: value < params.epsilon,
        best,
        best_index: index,
        objective: value,
        net_size: net.len(),
        mesh,
    })
}

/// Maximizes the lower density of the hit set over the `mesh`-net; succeeds
/// when it exceeds `α`.
pub fn m_alpha_shadow_search(
    xi: &PseudoOrbit,
    params: ShadowParams,
    mesh: f64,
    options: SearchOptions,
) -> Result<SearchOutcome> {
    params.validate()?;
    let (net, index, value) = net_argmin(xi, mesh, options, |z| {
        let t = trace_errors(xi, z)?;
        let hits = IndexSet::from_predicate(t.len(), |j| t[j] < params.epsilon);
        Ok(-hits.lower_density_estimate(params.tail_fraction)?)
    })?;
    let mut best = trace_report(xi, &net[index], params)?;
    best.mesh = Some(mesh);
    Ok(SearchOutcome {
        success: -value > params.alpha,
        best,
        best_index: index,
        objective: -value,
        net_size: net.len(),
        mesh,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedStage {
    /// Stage number `m ≥ 1`.
    pub stage: usize,
    pub mesh: f64,
    /// `ε_0 / 2^m`.
    pub target: f64,
    pub achieved: f64,
    pub success: bool,
    pub net_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedSearch {
    pub stages: Vec<RefinedStage>,
    /// Best point of each completed stage.
    pub candidates: Vec<Point>,
    /// Distances between successive stage candidates.
    pub distances: Vec<f64>,
    /// Some stage missed its target; `stages` ends with that stage.
    pub failed: bool,
    pub slack: f64,
}

impl RefinedSearch {
    /// The candidate of the last successful stage.
    pub fn candidate(&self) -> Option<&Point> {
        let ok = self.stages.iter().take_while(|s| s.success).count();
        ok.checked_sub(1).map(|i| &self.candidates[i])
    }
}

/// Stage `m = 1..=levels` searches the `meshes[m-1]`-net for a point whose
/// limsup estimate is below `ε_0/2^m`, allowing a relative slack. Stops at
/// the first failing stage.
pub fn refined_asymptotic_search(
    xi: &PseudoOrbit,
    epsilon0: f64,
    meshes: &[f64],
    slack: f64,
    tail_fraction: f64,
    options: SearchOptions,
) -> Result<RefinedSearch> {
    if meshes.is_empty() {
        return Err(Error::param("meshes", "at least one level is required"));
    }
    if meshes.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("meshes", "mesh schedule must be strictly decreasing"));
    }
    if !(slack >= 0.0) {
        return Err(Error::param("slack", format!("must be nonnegative, got {slack}")));
    }
    let mut stages = Vec::new();
    let mut candidates: Vec<Point> = Vec::new();
    let mut failed = false;
    for (i, &mesh) in meshes.iter().enumerate() {
        let m = i + 1;
        let target = epsilon0 / 2f64.powi(m as i32);
        let params = ShadowParams {
            epsilon: target,
            tail_fraction,
            ..ShadowParams::default()
        };
        let outcome = average_shadow_search(xi, params, mesh, options)?;
        let success = outcome.objective < target * (1.0 + slack);
        stages.push(RefinedStage {
            stage: m,
            mesh,
            target,
            achieved: outcome.objective,
            success,
            net_size: outcome.net_size,
        });
        candidates.push(outcome.best.z);
        if !success {
            failed = true;
            break;
        }
    }
    let space = xi.space();
    let distances = candidates.windows(2).map(|w| space.distance(&w[0], &w[1])).collect();
    Ok(RefinedSearch {
        stages,
        candidates,
        distances,
        failed,
        slack,
    })
}

//! Finite pseudo-orbits and their classification into the five pseudo-orbit
//! types (plain, ergodic, average, weak asymptotic average, asymptotic average).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{tail_window, IndexSet};
use crate::error::{Error, Result};
use crate::space::{MetricSpace, Point};
use crate::system::System;
use crate::verdict::{Property, Verdict, Witness};

/// Tolerance for agreement between cached and recomputed step errors.
pub const CACHE_TOL: f64 = 1e-12;

/// Largest number of `(k, n)` windows a full average scan may visit.
pub const DEFAULT_PAIR_BUDGET: u128 = 1_000_000_000;

/// The points `x_0..x_H` of a pseudo-orbit together with the cached step
/// errors `e_j = d(f_{w_j}(x_j), x_{j+1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoOrbit {
    system: System,
    points: Vec<Point>,
    step_errors: Vec<f64>,
    clamped: Vec<usize>,
}

impl PseudoOrbit {
    pub fn new(system: System, points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::param("points", "a pseudo-orbit needs at least two points"));
        }
        let space = system.space();
        if let Some(p) = points.iter().find(|p| !space.contains(p)) {
            return Err(Error::Domain {
                point: p.to_vec(),
                space: space.name().to_string(),
            });
        }
        let step_errors = compute_step_errors(&system, &points);
        Ok(PseudoOrbit {
            system,
            points,
            step_errors,
            clamped: Vec::new(),
        })
    }

    /// Rebuilds a pseudo-orbit and checks a cached error vector against the
    /// recomputed one.
    pub fn with_cached_errors(system: System, points: Vec<Point>, cached: &[f64]) -> Result<Self> {
        let orbit = PseudoOrbit::new(system, points)?;
        orbit.verify_cache(cached)?;
        Ok(orbit)
    }

    pub fn true_orbit(system: &System, z: &[f64], horizon: usize) -> Result<Self> {
        PseudoOrbit::new(system.clone(), system.orbit(z, horizon + 1)?)
    }

    pub(crate) fn with_clamped(mut self, clamped: Vec<usize>) -> Self {
        self.clamped = clamped;
        self
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn space(&self) -> &MetricSpace {
        self.system.space()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn step_errors(&self) -> &[f64] {
        &self.step_errors
    }

    /// Indices `j` whose corrupted successor `x_{j+1}` had to be clamped.
    pub fn clamped(&self) -> &[usize] {
        &self.clamped
    }

    /// Number of steps `H` (there are `H + 1` points).
    pub fn horizon(&self) -> usize {
        self.step_errors.len()
    }

    pub fn verify_cache(&self, cached: &[f64]) -> Result<()> {
        if cached.len() != self.step_errors.len() {
            return Err(Error::Integrity(format!(
                "{} cached step errors for {} steps",
                cached.len(),
                self.step_errors.len()
            )));
        }
        for (j, (c, e)) in cached.iter().zip(&self.step_errors).enumerate() {
            if (c - e).abs() > CACHE_TOL {
                return Err(Error::Integrity(format!(
                    "cached step error {c} at {j} differs from recomputed {e}"
                )));
            }
        }
        Ok(())
    }

    /// `P[n] = e_0 + … + e_{n-1}` for `n = 0..=H`.
    pub fn error_prefix_sums(&self) -> Vec<f64> {
        prefix_sums(&self.step_errors)
    }

    /// `{j : e_j ≥ δ}`.
    pub fn exceptional_set(&self, delta: f64) -> IndexSet {
        IndexSet::from_predicate(self.horizon(), |j| self.step_errors[j] >= delta)
    }
}

pub(crate) fn compute_step_errors(system: &System, points: &[Point]) -> Vec<f64> {
    let space = system.space();
    points
        .windows(2)
        .enumerate()
        .map(|(j, w)| space.distance(&system.step(j, &w[0]), &w[1]))
        .collect()
}

pub(crate) fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for v in values {
        acc += v;
        out.push(acc);
    }
    out
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    Ok(())
}

/// Every step error is below `δ`.
pub fn is_pseudo_orbit(xi: &PseudoOrbit, delta: f64) -> Result<Verdict> {
    check_delta(delta)?;
    let params = [("delta", delta), ("horizon", xi.horizon() as f64)];
    Ok(match xi.step_errors.iter().position(|e| *e >= delta) {
        None => Verdict::pass(Property::PseudoOrbit, &params),
        Some(index) => Verdict::fail(
            Property::PseudoOrbit,
            Witness::Step {
                index,
                error: xi.step_errors[index],
            },
            &params,
        ),
    })
}

/// The exceptional set `{j : e_j ≥ δ}` has upper density estimate at most
/// `density_tol`.
pub fn is_ergodic_pseudo_orbit(
    xi: &PseudoOrbit,
    delta: f64,
    density_tol: f64,
    tail_fraction: f64,
) -> Result<Verdict> {
    check_delta(delta)?;
    if !(density_tol >= 0.0) {
        return Err(Error::param("density_tol", "must be nonnegative"));
    }
    let bad = xi.exceptional_set(delta);
    let upper = bad.upper_density_estimate(tail_fraction)?;
    let params = [
        ("delta", delta),
        ("density_tol", density_tol),
        ("horizon", xi.horizon() as f64),
        ("tail_fraction", tail_fraction),
    ];
    let witness = Witness::ExceptionalDensity {
        upper_density: upper,
        count: bad.len(),
    };
    Ok(if upper <= density_tol {
        Verdict::pass(Property::ErgodicPseudoOrbit, &params).with_witness(witness)
    } else {
        Verdict::fail(Property::ErgodicPseudoOrbit, witness, &params)
    })
}

/// How the `(k, n)` windows of the average check are visited.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScanMode {
    /// Every window, refused when the pair count exceeds `budget`.
    Full { budget: u128 },
    /// `samples` windows drawn uniformly from the admissible pairs.
    Sampled { samples: usize, seed: u64 },
}

impl Default for ScanMode {
    fn default() -> Self {
        ScanMode::Full {
            budget: DEFAULT_PAIR_BUDGET,
        }
    }
}

/// Number of windows `(k, n)` with `N ≤ n ≤ H` and `k + n ≤ H`.
pub fn window_pair_count(horizon: usize, min_len: usize) -> u128 {
    if min_len > horizon {
        return 0;
    }
    let r = (horizon - min_len + 1) as u128;
    r * (r + 1) / 2
}

/// Every window of length `n ≥ N` has mean step error below `δ`.
///
/// The witness of a failure is the first violating `(k, n)` in
/// lexicographic order, independent of how the scan is parallelized.
pub fn is_average_pseudo_orbit(xi: &PseudoOrbit, delta: f64, min_len: usize, mode: ScanMode) -> Result<Verdict> {
    check_delta(delta)?;
    let h = xi.horizon();
    if min_len == 0 || min_len > h {
        return Err(Error::range("N", min_len, format!("[1, {h}]")));
    }
    let sums = xi.error_prefix_sums();
    let mean = |k: usize, n: usize| (sums[k + n] - sums[k]) / n as f64;
    let mut params = vec![("delta", delta), ("N", min_len as f64), ("horizon", h as f64)];

    let (first, sampled) = match mode {
        ScanMode::Full { budget } => {
            let pairs = window_pair_count(h, min_len);
            if pairs > budget {
                return Err(Error::Resource {
                    what: "full window scan",
                    required: pairs,
                    cap: budget,
                    advice: "request the sampled scan mode explicitly",
                });
            }
            let first = (0..=h - min_len).into_par_iter().find_map_first(|k| {
                (min_len..=h - k)
                    .find(|&n| mean(k, n) >= delta)
                    .map(|n| (k, n))
            });
            (first, false)
        }
        ScanMode::Sampled { samples, seed } => {
            params.push(("samples", samples as f64));
            params.push(("seed", seed as f64));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut hits: Vec<(usize, usize)> = (0..samples)
                .map(|_| {
                    let n = rng.random_range(min_len..=h);
                    let k = rng.random_range(0..=h - n);
                    (k, n)
                })
                .filter(|&(k, n)| mean(k, n) >= delta)
                .collect();
            hits.sort_unstable();
            (hits.first().copied(), true)
        }
    };
    let mut verdict = match first {
        None => Verdict::pass(Property::AveragePseudoOrbit, &params),
        Some((k, n)) => Verdict::fail(
            Property::AveragePseudoOrbit,
            Witness::Window {
                start: k,
                length: n,
                mean: mean(k, n),
            },
            &params,
        ),
    };
    verdict.sampled = sampled;
    Ok(verdict)
}

fn tail_prefix_mean_verdict(
    xi: &PseudoOrbit,
    property: Property,
    level_name: &'static str,
    level: f64,
    tail_fraction: f64,
) -> Result<Verdict> {
    check_delta(level).map_err(|_| Error::param(level_name, format!("must be positive, got {level}")))?;
    let sums = xi.error_prefix_sums();
    let window = tail_window(xi.horizon(), tail_fraction)?;
    let params = [
        (level_name, level),
        ("horizon", xi.horizon() as f64),
        ("tail_fraction", tail_fraction),
    ];
    let violation = window
        .map(|n| (n, sums[n] / n as f64))
        .find(|&(_, m)| m >= level);
    Ok(match violation {
        None => Verdict::pass(property, &params),
        Some((n, mean)) => Verdict::fail(property, Witness::PrefixMean { n, mean }, &params),
    })
}

/// Prefix means of the step errors stay below `δ` across the tail window.
pub fn is_weak_asymptotic_average(xi: &PseudoOrbit, delta: f64, tail_fraction: f64) -> Result<Verdict> {
    tail_prefix_mean_verdict(xi, Property::WeakAsymptoticAveragePseudoOrbit, "delta", delta, tail_fraction)
}

/// Prefix means of the step errors stay below `tol` across the tail window
/// (finite stand-in for convergence to zero).
pub fn is_asymptotic_average(xi: &PseudoOrbit, tol: f64, tail_fraction: f64) -> Result<Verdict> {
    tail_prefix_mean_verdict(xi, Property::AsymptoticAveragePseudoOrbit, "tol", tol, tail_fraction)
}

/// Where a corrupted step sends the orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JumpRule {
    /// A seeded uniformly distributed point of the space.
    Uniform,
    /// A fixed target point.
    Fixed { point: Point },
    /// `f_{w_j}(x_j)` displaced in a seeded direction by `scale / (j+1)^decay`.
    Offset { scale: f64, decay: f64 },
}

/// Builds `x_{j+1} = f_{w_j}(x_j)` except at the corruption indices, where
/// the successor is chosen by `jump`. Jumps that leave the space are
/// projected back and recorded in [`PseudoOrbit::clamped`].
pub fn make_corrupted_orbit(
    system: &System,
    z: &[f64],
    horizon: usize,
    corruption: &IndexSet,
    jump: &JumpRule,
    seed: u64,
) -> Result<PseudoOrbit> {
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    if let Some(&last) = corruption.indices().last() {
        if last >= horizon {
            return Err(Error::range("corruption index", last, format!("[0, {horizon})")));
        }
    }
    let space = system.space();
    if !space.contains(z) {
        return Err(Error::Domain {
            point: z.to_vec(),
            space: space.name().to_string(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(horizon + 1);
    let mut clamped = Vec::new();
    points.push(Point::new(z.to_vec()));
    for j in 0..horizon {
        let image = system.step(j, &points[j]);
        let next = if corruption.contains(j) {
            let target = match jump {
                JumpRule::Uniform => uniform_point(space, &mut rng),
                JumpRule::Fixed { point } => point.clone(),
                JumpRule::Offset { scale, decay } => {
                    let len = scale / ((j + 1) as f64).powf(*decay);
                    let dir = unit_direction(space.dimension(), &mut rng);
                    Point::new(image.iter().zip(&dir).map(|(c, d)| c + len * d).collect())
                }
            };
            if space.contains(&target) {
                target
            } else {
                clamped.push(j);
                space.project(&target)
            }
        } else {
            image
        };
        points.push(next);
    }
    Ok(PseudoOrbit::new(system.clone(), points)?.with_clamped(clamped))
}

/// A uniformly distributed point of `space` drawn from a ChaCha8 stream
/// seeded with `seed`.
pub fn seeded_point(space: &MetricSpace, seed: u64) -> Point {
    uniform_point(space, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn uniform_point(space: &MetricSpace, rng: &mut impl Rng) -> Point {
    match space {
        MetricSpace::UnitDisk => loop {
            let x: f64 = rng.random_range(-1.0..=1.0);
            let y: f64 = rng.random_range(-1.0..=1.0);
            if x * x + y * y <= 1.0 {
                return Point::new(vec![x, y]);
            }
        },
        MetricSpace::Box { lo, hi } => Point::new(
            lo.iter()
                .zip(hi)
                .map(|(l, h)| if l == h { *l } else { rng.random_range(*l..=*h) })
                .collect(),
        ),
        MetricSpace::Circle => Point::new(vec![rng.random_range(0.0..1.0)]),
    }
}

pub(crate) fn unit_direction(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

//! The unit-disk system with the swap `f_1(x, y) = (y, x)` and the halving
//! `f_2(x, y) = (x/2, y/2)`, driven by the alternating word `1 2 1 2 …`.
//!
//! For any pseudo-orbit `(x_i)` with step errors `α_i` and any true orbit
//! `(a_i)` starting at distance `M` from `x_0`, the tracking distances
//! `d_k = d(a_k, x_k)` satisfy `d_{k+1} ≤ α_k + d_k/2` after a halving and
//! `d_{k+1} ≤ α_k + d_k` after a swap. Summing gives
//! `Σ_{i<n} d_i ≤ 4(M + Σ_{i<n} α_i)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::IndexSet;
use crate::error::{Error, Result};
use crate::maps::{GeneratorFamily, GeneratorMap};
use crate::pseudo_orbit::{is_asymptotic_average, make_corrupted_orbit, seeded_point, JumpRule, PseudoOrbit};
use crate::space::{MetricSpace, Point};
use crate::system::System;
use crate::verdict::{Property, Verdict, Witness};
use crate::word::Word;

pub const TRACKING_TOL: f64 = 1e-9;
pub const RECURRENCE_TOL: f64 = 1e-12;

pub fn build_disk_system() -> System {
    System::new(
        GeneratorFamily::new(
            MetricSpace::UnitDisk,
            vec![GeneratorMap::swap(), GeneratorMap::scale(vec![0.5, 0.5])],
        )
        .expect("swap and halving map the disk into itself"),
        Word::periodic(2, vec![1, 2]).expect("valid pattern"),
    )
    .expect("alphabet matches")
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiskExampleInstance {
    pub xi: PseudoOrbit,
    /// Start `(a_0, b_0)` of the true orbit.
    pub start: Point,
    /// The true orbit `(a_i, b_i)`, `i = 0..=H`.
    pub orbit: Vec<Point>,
    /// `α_i`, the step errors of `ξ`.
    pub alphas: Vec<f64>,
    /// `d((a_0, b_0), x_0)`.
    pub m: f64,
}

impl DiskExampleInstance {
    /// `start = None` uses `x_0`.
    pub fn new(xi: PseudoOrbit, start: Option<Point>) -> Result<Self> {
        let system = build_disk_system();
        if xi.system().family() != system.family() {
            return Err(Error::param("xi", "pseudo-orbit is not on the swap/halving disk system"));
        }
        if let Some(i) = (0..xi.horizon()).find(|&i| xi.system().word().symbol_at(i) != 1 + i % 2) {
            return Err(Error::param("xi", format!("word is not alternating at index {i}")));
        }
        let start = start.unwrap_or_else(|| xi.points()[0].clone());
        let orbit = system.orbit(&start, xi.points().len())?;
        let m = xi.space().distance(&start, &xi.points()[0]);
        let alphas = xi.step_errors().to_vec();
        Ok(DiskExampleInstance {
            xi,
            start,
            orbit,
            alphas,
            m,
        })
    }

    pub fn horizon(&self) -> usize {
        self.alphas.len()
    }

    /// `d_i = d((a_i, b_i), x_i)` for `i = 0..=H`.
    pub fn tracking_distances(&self) -> Vec<f64> {
        let space = self.xi.space();
        self.orbit.iter().zip(self.xi.points()).map(|(a, x)| space.distance(a, x)).collect()
    }

    /// First `k` breaking the per-step recurrence, as `(k, d_{k+1}, bound)`.
    pub fn recurrence_violation(&self) -> Option<(usize, f64, f64)> {
        let d = self.tracking_distances();
        (0..self.horizon()).find_map(|k| {
            // symbol 2 halves, symbol 1 swaps
            let factor = if self.xi.system().word().symbol_at(k) == 2 { 0.5 } else { 1.0 };
            let bound = self.alphas[k] + factor * d[k];
            (d[k + 1] > bound + RECURRENCE_TOL).then_some((k, d[k + 1], bound))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingCheck {
    pub n: usize,
    /// `Σ_{i<n} d_i`.
    pub lhs: f64,
    /// `4(M + Σ_{i<n} α_i)`.
    pub rhs: f64,
    pub holds: bool,
}

/// The tracking bound at prefix `n ∈ [1, H]`.
pub fn tracking_inequality_check(inst: &DiskExampleInstance, n: usize) -> Result<TrackingCheck> {
    let h = inst.horizon();
    if n == 0 || n > h {
        return Err(Error::range("n", n, format!("[1, {h}]")));
    }
    let d = inst.tracking_distances();
    let lhs: f64 = d[..n].iter().sum();
    let rhs = 4.0 * (inst.m + inst.alphas[..n].iter().sum::<f64>());
    Ok(TrackingCheck {
        n,
        lhs,
        rhs,
        holds: lhs <= rhs + TRACKING_TOL,
    })
}

/// [`tracking_inequality_check`] at every `n ∈ [1, H]`, in one pass.
pub fn tracking_curve(inst: &DiskExampleInstance) -> Vec<TrackingCheck> {
    let d = inst.tracking_distances();
    let mut lhs = 0.0;
    let mut alpha = 0.0;
    (0..inst.horizon())
        .map(|i| {
            lhs += d[i];
            alpha += inst.alphas[i];
            let rhs = 4.0 * (inst.m + alpha);
            TrackingCheck {
                n: i + 1,
                lhs,
                rhs,
                holds: lhs <= rhs + TRACKING_TOL,
            }
        })
        .collect()
}

/// Verdict over the whole curve, witnessing the first failing prefix.
pub fn tracking_verdict(inst: &DiskExampleInstance) -> Verdict {
    let params = [("m", inst.m), ("horizon", inst.horizon() as f64), ("tol", TRACKING_TOL)];
    match tracking_curve(inst).into_iter().find(|c| !c.holds) {
        None => Verdict::pass(Property::TrackingBound, &params),
        Some(c) => Verdict::fail(
            Property::TrackingBound,
            Witness::Inequality {
                n: c.n,
                lhs: c.lhs,
                rhs: c.rhs,
            },
            &params,
        ),
    }
}

/// Pseudo-orbit from a seeded start whose step `i` is displaced by
/// `1/(i+1)²` in a seeded direction (less where the displaced point had to be
/// projected back into the disk).
pub fn decaying_corruption(horizon: usize, seed: u64) -> Result<PseudoOrbit> {
    let system = build_disk_system();
    let z = seeded_point(system.space(), seed);
    make_corrupted_orbit(
        &system,
        &z,
        horizon,
        &IndexSet::full(horizon),
        &JumpRule::Offset { scale: 1.0, decay: 2.0 },
        seed,
    )
}

/// `count` decaying-corruption instances with seeds `base_seed + i`, built in
/// parallel; the order follows the seeds.
pub fn decaying_batch(count: usize, horizon: usize, base_seed: u64) -> Result<Vec<DiskExampleInstance>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| DiskExampleInstance::new(decaying_corruption(horizon, base_seed + i)?, None))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AaspDemo {
    pub precondition: Verdict,
    /// Element `n-1` is `(1/n) Σ_{i<n} d_i`.
    pub means: Vec<f64>,
    /// Element `n-1` is `4(M + Σ_{i<n} α_i)/n`.
    pub bounds: Vec<f64>,
    /// Every mean is at most its bound.
    pub bounds_hold: bool,
    /// Maximum mean over the tail window.
    pub tail_max: f64,
    /// `(tol, tail_max < tol)` for every tested level.
    pub levels: Vec<(f64, bool)>,
}

/// Tracking means of the instance against the summed bound divided by `n`.
/// Rejects `ξ` unless it is an asymptotic average pseudo-orbit at
/// `precondition_tol`.
pub fn aasp_demo(
    inst: &DiskExampleInstance,
    precondition_tol: f64,
    tols: &[f64],
    tail_fraction: f64,
) -> Result<AaspDemo> {
    let precondition = is_asymptotic_average(&inst.xi, precondition_tol, tail_fraction)?;
    if !precondition.holds {
        return Err(Error::Precondition(Box::new(precondition)));
    }
    let curve = tracking_curve(inst);
    let means: Vec<f64> = curve.iter().map(|c| c.lhs / c.n as f64).collect();
    let bounds: Vec<f64> = curve.iter().map(|c| c.rhs / c.n as f64).collect();
    let bounds_hold = curve.iter().all(|c| c.holds);
    let window = crate::density::tail_window(means.len(), tail_fraction)?;
    let tail_max = window.map(|n| means[n - 1]).fold(f64::NEG_INFINITY, f64::max);
    Ok(AaspDemo {
        precondition,
        means,
        bounds,
        bounds_hold,
        tail_max,
        levels: tols.iter().map(|t| (*t, tail_max < *t)).collect(),
    })
}

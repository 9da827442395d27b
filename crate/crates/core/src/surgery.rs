//! Repair of a `(δ/2, w)`-ergodic pseudo-orbit into a `(δ, w)`-average
//! pseudo-orbit that differs from it only on a sparse set of blocks.
//!
//! The bad steps `B = {i : e_i ≥ δ/2}` are covered by blocks `[k, k+M)`
//! anchored at greedily chosen bad indices spaced at least `M` apart, where
//! `M` is the smallest integer with `diam(X)/M < δ/8`. Inside a block the
//! pseudo-orbit is overwritten by the true orbit of its anchor point, composed
//! with the word symbols starting at the anchor index, so every in-block step
//! error vanishes and only the block-exit step can stay large.

use serde::Serialize;

use crate::density::{IndexSet, DEFAULT_TAIL_FRACTION};
use crate::error::{Error, Result};
use crate::pseudo_orbit::{is_ergodic_pseudo_orbit, PseudoOrbit};
use crate::verdict::Verdict;

/// Smallest `M ≥ 1` with `diameter / M < δ/8`.
pub fn block_length(diameter: f64, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("must be positive, got {delta}")));
    }
    let target = delta / 8.0;
    let fits = |m: usize| diameter / (m as f64) < target;
    let mut m = ((diameter / target).floor() as usize).max(1);
    while !fits(m) {
        m += 1;
    }
    while m > 1 && fits(m - 1) {
        m -= 1;
    }
    Ok(m)
}

/// `k_0 = min B`, `k_{n+1} = min {l ∈ B : l ≥ k_n + M}`.
pub fn select_anchors(bad: &IndexSet, block_len: usize) -> IndexSet {
    let mut anchors = Vec::new();
    let mut next_allowed = 0usize;
    for &l in bad.indices() {
        if l >= next_allowed {
            anchors.push(l);
            next_allowed = l + block_len;
        }
    }
    IndexSet::new(anchors, bad.horizon()).expect("subsequence of a valid index set")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RepairOptions {
    /// Density tolerance for the ergodic precondition.
    pub density_tol: f64,
    pub tail_fraction: f64,
    /// The input is returned unchanged when it has at most this many bad
    /// steps in total.
    pub finite_cutoff: usize,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            density_tol: 0.01,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            finite_cutoff: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RepairResult {
    pub y: PseudoOrbit,
    pub delta: f64,
    pub block_length: usize,
    /// Bad steps `{i : e_i ≥ δ/2}` of the input.
    pub bad: IndexSet,
    pub anchors: IndexSet,
    /// Union of the blocks `[k, k+M)`, clipped to the point indices `[0, H]`.
    pub blocks: IndexSet,
    /// Point indices where the repaired orbit differs from the input.
    pub diff: IndexSet,
    /// The input was returned unchanged (few enough bad steps).
    pub short_circuited: bool,
    /// The last block ran past the horizon and was cut at `H`.
    pub truncated_last_block: bool,
    pub ergodic_verdict: Verdict,
    pub options: RepairOptions,
}

/// Runs the block surgery. Rejects inputs that are not `(δ/2, w)`-ergodic
/// at the configured density tolerance.
pub fn repair(xi: &PseudoOrbit, delta: f64, options: RepairOptions) -> Result<RepairResult> {
    let horizon = xi.horizon();
    let m = block_length(xi.space().diameter(), delta)?;
    if m > horizon {
        return Err(Error::param(
            "delta",
            format!("block length {m} needs a horizon of at least {m}, got {horizon}"),
        ));
    }
    let ergodic = is_ergodic_pseudo_orbit(xi, delta / 2.0, options.density_tol, options.tail_fraction)?;
    if !ergodic.holds {
        return Err(Error::Precondition(Box::new(ergodic)));
    }
    let bad = xi.exceptional_set(delta / 2.0);
    let n_points = horizon + 1;

    if bad.len() <= options.finite_cutoff {
        return Ok(RepairResult {
            y: xi.clone(),
            delta,
            block_length: m,
            bad,
            anchors: IndexSet::empty(horizon),
            blocks: IndexSet::empty(n_points),
            diff: IndexSet::empty(n_points),
            short_circuited: true,
            truncated_last_block: false,
            ergodic_verdict: ergodic,
            options,
        });
    }

    let anchors = select_anchors(&bad, m);
    let system = xi.system();
    let mut points = xi.points().to_vec();
    let mut blocks = Vec::with_capacity(anchors.len() * m);
    let mut truncated = false;
    for &k in anchors.indices() {
        let end = k + m;
        if end > n_points {
            truncated = true;
        }
        let end = end.min(n_points);
        blocks.extend(k..end);
        for i in k + 1..end {
            points[i] = system.step(i - 1, &points[i - 1]);
        }
    }
    let diff: Vec<usize> = (0..n_points)
        .filter(|&i| points[i] != xi.points()[i])
        .collect();
    let y = PseudoOrbit::new(system.clone(), points)?;

    Ok(RepairResult {
        y,
        delta,
        block_length: m,
        bad,
        anchors,
        blocks: IndexSet::new(blocks, n_points)?,
        diff: IndexSet::new(diff, n_points)?,
        short_circuited: false,
        truncated_last_block: truncated,
        ergodic_verdict: ergodic,
        options,
    })
}

/// Outcome of counting `A_k^n = {i ∈ [k, k+n) : e^y_i ≥ δ/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowBound {
    pub start: usize,
    pub length: usize,
    pub count: usize,
    /// `2(n + M)/M`.
    pub bound: f64,
    /// Mean step error of `y` over the window.
    pub mean: f64,
    /// `(|A|/n)·diam(X) + δ/2`.
    pub chained: f64,
}

impl WindowBound {
    pub fn count_within_bound(&self) -> bool {
        self.count as f64 <= self.bound
    }

    /// `mean ≤ chained < δ`.
    pub fn mean_within_chain(&self, delta: f64) -> bool {
        self.mean <= self.chained + 1e-12 && self.chained < delta
    }
}

impl RepairResult {
    /// Counts the bad steps of `y` in `[k, k+n)` and evaluates the window bounds.
    pub fn window_bound(&self, start: usize, length: usize) -> Result<WindowBound> {
        let m = self.block_length;
        if length < m {
            return Err(Error::range("n", length, format!("[{m}, ∞)")));
        }
        let h = self.y.horizon();
        if start + length > h {
            return Err(Error::range("k + n", start + length, format!("[0, {h}]")));
        }
        let errors = &self.y.step_errors()[start..start + length];
        let half = self.delta / 2.0;
        let count = errors.iter().filter(|e| **e >= half).count();
        let mean = errors.iter().sum::<f64>() / length as f64;
        Ok(WindowBound {
            start,
            length,
            count,
            bound: 2.0 * (length + m) as f64 / m as f64,
            mean,
            chained: count as f64 / length as f64 * self.y.space().diameter() + half,
        })
    }

    /// Step errors of `y` at every in-block step `i ∈ [k, k+M-1)`.
    pub fn in_block_errors(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let m = self.block_length;
        let h = self.y.horizon();
        self.anchors
            .indices()
            .iter()
            .flat_map(move |&k| k..(k + m - 1).min(h))
            .map(|i| (i, self.y.step_errors()[i]))
    }
}

/// `|A_k^n| ≤ 2(n+M)/M` for the window `[k, k+n)`, `n ≥ M`.
pub fn window_violation_bound_check(result: &RepairResult, start: usize, length: usize) -> Result<bool> {
    Ok(result.window_bound(start, length)?.count_within_bound())
}

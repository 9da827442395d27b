//! Bounded nonnegative sequences whose Cesàro means tend to zero, and the
//! density-zero set off which the sequence itself tends to zero.
//!
//! [`extract_null_set`] builds the exceptional set `J` in stages. Stage `k`
//! uses the level `ε_{k+1}` and covers `[T_k, T_{k+1})`, where `T_{k+1}` is
//! the first index past `max(T_k + 1, 2·T_k)` at which `{n : a_n ≥ ε_{k+1}}`
//! has prefix density below `ε_{k+1}`. Every `n ∉ J` with `n ≥ T_k` then has
//! `a_n < ε_k`.

use serde::{Deserialize, Serialize};

use crate::density::{tail_window, IndexSet};
use crate::error::{Error, Result};
use crate::verdict::{Property, Verdict, Witness};

pub const DEFAULT_DENSITY_MARGIN: f64 = 0.1;
pub const INEQUALITY_TOL: f64 = 1e-12;

/// Values `a_0, …, a_{H-1}` with `0 ≤ a_j ≤ bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSequence")]
pub struct BoundedSequence {
    values: Vec<f64>,
    bound: f64,
}

#[derive(Deserialize)]
struct RawSequence {
    values: Vec<f64>,
    bound: f64,
}

impl TryFrom<RawSequence> for BoundedSequence {
    type Error = Error;

    fn try_from(raw: RawSequence) -> Result<Self> {
        BoundedSequence::new(raw.values, raw.bound)
    }
}

impl BoundedSequence {
    pub fn new(values: Vec<f64>, bound: f64) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::param("bound", format!("must be finite and nonnegative, got {bound}")));
        }
        if values.is_empty() {
            return Err(Error::param("values", "sequence is empty"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= bound)) {
            return Err(Error::range("a_i", format!("a_{i} = {v}"), format!("[0, {bound}]")));
        }
        Ok(BoundedSequence { values, bound })
    }

    /// Uses the largest value as the bound.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let bound = values.iter().copied().fold(0.0, f64::max);
        BoundedSequence::new(values, bound)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `{i : a_i ≥ level}`.
    pub fn level_set(&self, level: f64) -> IndexSet {
        IndexSet::from_predicate(self.len(), |i| self.values[i] >= level)
    }

    fn prefix_sums(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.len() + 1);
        p.push(0.0);
        let mut s = 0.0;
        for v in &self.values {
            s += v;
            p.push(s);
        }
        p
    }
}

/// Element `n-1` is `(1/n) Σ_{i<n} a_i`.
pub fn cesaro_means(a: &BoundedSequence) -> Vec<f64> {
    let p = a.prefix_sums();
    (1..=a.len()).map(|n| p[n] / n as f64).collect()
}

/// First `n` with `(1/n) Σ_{i<n} a_i > B·d_n({a ≥ θ}) + θ`, as `(n, lhs, rhs)`.
pub fn threshold_inequality_violation(a: &BoundedSequence, theta: f64) -> Result<Option<(usize, f64, f64)>> {
    if !(theta > 0.0) {
        return Err(Error::param("theta", format!("must be positive, got {theta}")));
    }
    let means = cesaro_means(a);
    let mut count = 0usize;
    for (i, mean) in means.iter().enumerate() {
        if a.values[i] >= theta {
            count += 1;
        }
        let n = i + 1;
        let rhs = a.bound * count as f64 / n as f64 + theta;
        if *mean > rhs + INEQUALITY_TOL {
            return Ok(Some((n, *mean, rhs)));
        }
    }
    Ok(None)
}

/// Decreasing positive levels `ε_1 > ε_2 > …`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LevelSchedule {
    /// `ε_k = 1/k`.
    #[default]
    Harmonic,
    /// A finite schedule; its last level covers the rest of the horizon.
    Explicit { levels: Vec<f64> },
}

impl LevelSchedule {
    pub fn validate(&self) -> Result<()> {
        if let LevelSchedule::Explicit { levels } = self {
            if levels.is_empty() {
                return Err(Error::param("levels", "schedule is empty"));
            }
            if levels.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(Error::param("levels", "levels must be positive and finite"));
            }
            if levels.windows(2).any(|w| w[0] <= w[1]) {
                return Err(Error::param("levels", "levels must be strictly decreasing"));
            }
        }
        Ok(())
    }

    /// `ε_k` for `k ≥ 1`, if the schedule reaches that far.
    pub fn level(&self, k: usize) -> Option<f64> {
        match self {
            LevelSchedule::Harmonic => Some(1.0 / k as f64),
            LevelSchedule::Explicit { levels } => levels.get(k - 1).copied(),
        }
    }
}

/// One stage `[T_k, T_{k+1})` of the extraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// `ε_{k+1}`.
    pub level: f64,
    pub start: usize,
    pub end: usize,
    /// Indices of this stage added to `J`.
    pub added: usize,
    /// Prefix density of `{a ≥ level}` at `end`.
    pub level_set_density: f64,
    /// Prefix density of `J` at `end`.
    pub density: f64,
    /// `(T_k/T_{k+1})·bound_k + ε_{k+1}`, an upper bound for `density`.
    pub density_bound: f64,
    /// `end` is the horizon because no admissible `T_{k+1}` exists, or the
    /// schedule ran out.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NullSetExtraction {
    pub j: IndexSet,
    /// `T_0 = 0, T_1, …`; the last entry is the end of the last stage.
    pub boundaries: Vec<usize>,
    pub stages: Vec<Stage>,
    pub truncated: bool,
    pub precondition: Verdict,
}

impl NullSetExtraction {
    /// Checks `a_n < ε_k` for every `n ∉ J` with `n ≥ T_k`; returns the first
    /// offending `(n, a_n, ε_k)`.
    pub fn guarantee_violation(&self, a: &BoundedSequence) -> Option<(usize, f64, f64)> {
        for (k, stage) in self.stages.iter().enumerate().skip(1) {
            let eps_k = self.stages[k - 1].level;
            for n in stage.start..a.len() {
                if !self.j.contains(n) && a.values[n] >= eps_k {
                    return Some((n, a.values[n], eps_k));
                }
            }
        }
        None
    }
}

/// Tail-window maximum of the Cesàro means, with the witnessing `n`.
fn tail_max_mean(means: &[f64], tail_fraction: f64) -> Result<(usize, f64)> {
    let window = tail_window(means.len(), tail_fraction)?;
    Ok(window
        .map(|n| (n, means[n - 1]))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc }))
}

/// Builds `J` stage by stage. Rejects `a` unless its tail-window Cesàro means
/// stay below `ε_1·margin`.
pub fn extract_null_set(
    a: &BoundedSequence,
    schedule: &LevelSchedule,
    margin: f64,
    tail_fraction: f64,
) -> Result<NullSetExtraction> {
    schedule.validate()?;
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::param("margin", format!("must lie in (0, 1], got {margin}")));
    }
    let h = a.len();
    let eps1 = schedule.level(1).expect("validated schedule is nonempty");
    let threshold = eps1 * margin;
    let (n_max, max_mean) = tail_max_mean(&cesaro_means(a), tail_fraction)?;
    let params = [("threshold", threshold), ("tail_fraction", tail_fraction), ("horizon", h as f64)];
    let precondition = if max_mean < threshold {
        Verdict::pass(Property::CesaroNull, &params)
    } else {
        Verdict::fail(Property::CesaroNull, Witness::PrefixMean { n: n_max, mean: max_mean }, &params)
    };
    if !precondition.holds {
        return Err(Error::Precondition(Box::new(precondition)));
    }

    let mut j = Vec::new();
    let mut boundaries = vec![0usize];
    let mut stages = Vec::new();
    let mut start = 0usize;
    let mut bound = 0.0f64;
    let mut truncated = false;
    let mut k = 0usize;
    while start < h {
        // the loop stops at the last level, so level k+1 always exists
        let level = schedule.level(k + 1).expect("schedule level");
        let schedule_exhausted = schedule.level(k + 2).is_none();
        let min_end = (start + 1).max(2 * start);
        // count of {i < t : a_i ≥ level}, advanced t by t
        let mut count = a.values[..min_end.min(h)].iter().filter(|v| **v >= level).count();
        let mut end = None;
        if !schedule_exhausted {
            let mut t = min_end;
            while t <= h {
                if (count as f64) / (t as f64) < level {
                    end = Some(t);
                    break;
                }
                if t < h && a.values[t] >= level {
                    count += 1;
                }
                t += 1;
            }
        }
        let stage_truncated = end.is_none();
        let end = end.unwrap_or(h);
        let before = j.len();
        j.extend((start..end).filter(|&n| a.values[n] >= level));
        let added = j.len() - before;
        let level_count = a.values[..end].iter().filter(|v| **v >= level).count();
        bound = if start == 0 { level } else { start as f64 / end as f64 * bound + level };
        stages.push(Stage {
            level,
            start,
            end,
            added,
            level_set_density: level_count as f64 / end as f64,
            density: j.len() as f64 / end as f64,
            density_bound: bound,
            truncated: stage_truncated,
        });
        boundaries.push(end);
        if stage_truncated {
            truncated = true;
            break;
        }
        start = end;
        k += 1;
    }

    Ok(NullSetExtraction {
        j: IndexSet::new(j, h)?,
        boundaries,
        stages,
        truncated,
        precondition,
    })
}

/// Per-direction details of [`verify_equivalence`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub upper_density: f64,
    /// `sup {a_n : n ∉ J, n ≥ tail start}`.
    pub off_tail_sup: f64,
    pub max_tail_mean: f64,
    /// Direction (i): `J` sparse and `a` small off `J`.
    pub premise_i: bool,
    pub conclusion_i: bool,
    /// Direction (ii): Cesàro means small in the tail.
    pub premise_ii: bool,
    pub conclusion_ii: bool,
    pub verdict: Verdict,
}

/// Checks both directions of the equivalence at horizon `H`.
///
/// (i) If `d̄(J) ≤ tol` and `a_n < tol` off `J` in the tail, every tail mean is
/// below `tol + B·d̄(J)`; the exact split
/// `mean(n) ≤ B·d_n(J) + head(n)/n + sup_tail` is also checked, where
/// `head(n)` is the off-`J` mass before the tail start.
/// (ii) If the tail means are below `tol`, `a_n < tol` off `J` in the tail.
pub fn verify_equivalence(
    a: &BoundedSequence,
    j: &IndexSet,
    tol: f64,
    tail_fraction: f64,
) -> Result<EquivalenceReport> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", format!("must be positive, got {tol}")));
    }
    let h = a.len();
    if j.horizon() != h {
        return Err(Error::param("J", format!("horizon {} does not match sequence length {h}", j.horizon())));
    }
    let window = tail_window(h, tail_fraction)?;
    let tail_start = *window.start();
    let b = a.bound;
    let means = cesaro_means(a);
    let upper_density = j.upper_density_estimate(tail_fraction)?;

    let mut sup_index = None;
    let mut off_tail_sup = 0.0f64;
    for n in (tail_start..h).filter(|&n| !j.contains(n)) {
        if sup_index.is_none() || a.values[n] > off_tail_sup {
            sup_index = Some(n);
            off_tail_sup = a.values[n];
        }
    }
    let (_, max_tail_mean) = tail_max_mean(&means, tail_fraction)?;

    let params = [("tol", tol), ("tail_fraction", tail_fraction), ("horizon", h as f64), ("bound", b)];

    let premise_i = upper_density <= tol && off_tail_sup < tol;
    let mut witness_i = None;
    if premise_i {
        let head_off: f64 = (0..tail_start).filter(|&i| !j.contains(i)).map(|i| a.values[i]).sum();
        for n in window.clone() {
            let mean = means[n - 1];
            let split = b * j.prefix_density(n)? + head_off / n as f64 + off_tail_sup;
            if mean > split + INEQUALITY_TOL {
                witness_i = Some(Witness::Inequality { n, lhs: mean, rhs: split });
                break;
            }
            let target = tol + b * upper_density;
            if mean >= target {
                witness_i = Some(Witness::Inequality { n, lhs: mean, rhs: target });
                break;
            }
        }
    }
    let conclusion_i = witness_i.is_none();

    let premise_ii = max_tail_mean < tol;
    let mut witness_ii = None;
    if premise_ii {
        if let Some(n) = sup_index {
            if off_tail_sup >= tol {
                witness_ii = Some(Witness::Value { index: n, value: off_tail_sup });
            }
        }
    }
    let conclusion_ii = witness_ii.is_none();

    let verdict = match witness_i.or(witness_ii) {
        None => Verdict::pass(Property::CesaroEquivalence, &params),
        Some(w) => Verdict::fail(Property::CesaroEquivalence, w, &params),
    };
    Ok(EquivalenceReport {
        upper_density,
        off_tail_sup,
        max_tail_mean,
        premise_i,
        conclusion_i,
        premise_ii,
        conclusion_ii,
        verdict,
    })
}

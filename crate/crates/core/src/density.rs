//! Subsets of `[0, H)` and their prefix, upper and lower densities.
//!
//! `limsup`/`liminf` are replaced by the extrema of the prefix density over
//! the tail window `n ∈ [⌈tail_fraction·H⌉, H]`. Counts are exact integers
//! and each density is a single division.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
pub const DEFAULT_HORIZON: usize = 10_000;

/// The tail window `[max(1, ⌈tail_fraction·H⌉), H]`.
pub fn tail_window(horizon: usize, tail_fraction: f64) -> Result<RangeInclusive<usize>> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::param(
            "tail_fraction",
            format!("must lie in (0, 1), got {tail_fraction}"),
        ));
    }
    if horizon == 0 {
        return Err(Error::param("tail_fraction", "tail window of an empty horizon is empty"));
    }
    let start = ((tail_fraction * horizon as f64).ceil() as usize).max(1);
    Ok(start..=horizon)
}

/// A strictly increasing set of naturals below a horizon `H`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawIndexSet")]
pub struct IndexSet {
    horizon: usize,
    indices: Vec<usize>,
}

#[derive(Deserialize)]
struct RawIndexSet {
    horizon: usize,
    indices: Vec<usize>,
}

impl TryFrom<RawIndexSet> for IndexSet {
    type Error = Error;

    fn try_from(raw: RawIndexSet) -> Result<Self> {
        IndexSet::new(raw.indices, raw.horizon)
    }
}

impl IndexSet {
    pub fn new(indices: Vec<usize>, horizon: usize) -> Result<Self> {
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::param(
                "indices",
                format!("not strictly increasing at {} >= {}", w[0], w[1]),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= horizon {
                return Err(Error::range("index", last, format!("[0, {horizon})")));
            }
        }
        Ok(IndexSet { horizon, indices })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut indices: Vec<usize>, horizon: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        IndexSet::new(indices, horizon)
    }

    pub fn from_predicate(horizon: usize, mut pred: impl FnMut(usize) -> bool) -> Self {
        IndexSet {
            horizon,
            indices: (0..horizon).filter(|&j| pred(j)).collect(),
        }
    }

    pub fn empty(horizon: usize) -> Self {
        IndexSet {
            horizon,
            indices: Vec::new(),
        }
    }

    pub fn full(horizon: usize) -> Self {
        IndexSet {
            horizon,
            indices: (0..horizon).collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.binary_search(&j).is_ok()
    }

    /// `|A ∩ [0, n)|`.
    pub fn count_below(&self, n: usize) -> usize {
        self.indices.partition_point(|&i| i < n)
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// `[0, H) \ A`.
    pub fn complement(&self) -> IndexSet {
        let mut out = Vec::with_capacity(self.horizon - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for j in 0..self.horizon {
            if it.peek() == Some(&&j) {
                it.next();
            } else {
                out.push(j);
            }
        }
        IndexSet {
            horizon: self.horizon,
            indices: out,
        }
    }

    /// `|A ∩ [0, n)| / n`, with the convention that `n = 0` gives `0`.
    pub fn prefix_density(&self, n: usize) -> Result<f64> {
        if n > self.horizon {
            return Err(Error::range("n", n, format!("[0, {}]", self.horizon)));
        }
        if n == 0 {
            return Ok(0.0);
        }
        Ok(self.count_below(n) as f64 / n as f64)
    }

    /// Prefix densities for every `n` of the tail window, in order.
    fn tail_densities(&self, tail_fraction: f64) -> Result<impl Iterator<Item = f64> + '_> {
        let window = tail_window(self.horizon, tail_fraction)?;
        let start = *window.start();
        // `count` is |A ∩ [0, n)|; moving to n+1 adds at most the element n
        let mut count = self.count_below(start);
        Ok(window.map(move |n| {
            if n > start && self.indices.get(count) == Some(&(n - 1)) {
                count += 1;
            }
            count as f64 / n as f64
        }))
    }

    pub fn upper_density_estimate(&self, tail_fraction: f64) -> Result<f64> {
        Ok(self.tail_densities(tail_fraction)?.fold(0.0, f64::max))
    }

    pub fn lower_density_estimate(&self, tail_fraction: f64) -> Result<f64> {
        Ok(self.tail_densities(tail_fraction)?.fold(f64::INFINITY, f64::min))
    }

    /// Whether the lower density estimate exceeds `alpha`.
    pub fn in_m_alpha(&self, alpha: f64, tail_fraction: f64) -> Result<bool> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        Ok(self.lower_density_estimate(tail_fraction)? > alpha)
    }

    pub fn summary(&self, tail_fraction: f64) -> Result<DensityEstimate> {
        Ok(DensityEstimate {
            lower: self.lower_density_estimate(tail_fraction)?,
            upper: self.upper_density_estimate(tail_fraction)?,
            horizon: self.horizon,
            tail_fraction,
        })
    }
}

/// Finite-horizon density estimates together with the window that produced them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub lower: f64,
    pub upper: f64,
    pub horizon: usize,
    pub tail_fraction: f64,
}

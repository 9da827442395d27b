//! Concatenation of pseudo-orbit blocks `β^(1) β^(2) …` into one sequence.
//!
//! Block `k` has `m_k + 1` points and starts at offset
//! `M_{k-1} = Σ_{i<k} (m_i + 1)`. It must be a pseudo-orbit for the word
//! shifted by `M_{k-1}`, so its own step errors reappear unchanged inside the
//! concatenation. The step at `M_k - 1` joins two blocks and is a junction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_orbit::{prefix_sums, uniform_point, unit_direction, PseudoOrbit};
use crate::space::Point;
use crate::system::System;
use crate::verdict::{Property, Verdict, Witness};

pub const DEFAULT_GROWTH_CAP: u32 = 20;
pub const DEFAULT_GROWTH_RATIO: f64 = 8.0;
pub const SPLIT_TOL: f64 = 1e-9;

/// Finite growth floor `m_{k} ≥ max(2^{min(N_{k+1}, cap)}, ratio·M_{k-1})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthRule {
    pub cap: u32,
    pub ratio: f64,
}

impl Default for GrowthRule {
    fn default() -> Self {
        GrowthRule {
            cap: DEFAULT_GROWTH_CAP,
            ratio: DEFAULT_GROWTH_RATIO,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthViolation {
    /// 1-based block number `k`.
    pub block: usize,
    pub length: usize,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockPlan {
    system: System,
    blocks: Vec<PseudoOrbit>,
    quality: Vec<usize>,
    offsets: Vec<usize>,
    growth: GrowthRule,
}

/// Smallest `N ≥ 1` such that the block's prefix means at every `n ∈ [N, m]`
/// are below `level`; `m + 1` if even the full mean is not.
fn quality_level(errors: &[f64], level: f64) -> usize {
    let sums = prefix_sums(errors);
    (1..=errors.len())
        .rev()
        .find(|&n| sums[n] / n as f64 >= level)
        .map_or(1, |n| n + 1)
}

impl BlockPlan {
    /// Computes `N_k` and the offsets `M_k`. `N_k` is raised where needed so
    /// the sequence is strictly increasing.
    pub fn new(system: System, blocks: Vec<PseudoOrbit>, growth: GrowthRule) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::param("blocks", "a plan needs at least one block"));
        }
        if !(growth.ratio > 0.0) {
            return Err(Error::param("growth.ratio", "must be positive"));
        }
        if let Some(b) = blocks.iter().find(|b| b.space() != system.space()) {
            return Err(Error::param(
                "blocks",
                format!("block lives on {}, the plan on {}", b.space().name(), system.space().name()),
            ));
        }
        let mut quality: Vec<usize> = Vec::with_capacity(blocks.len());
        for (i, b) in blocks.iter().enumerate() {
            let n = quality_level(b.step_errors(), 1.0 / (i + 1) as f64);
            let floor = quality.last().map_or(1, |prev| prev + 1);
            quality.push(n.max(floor));
        }
        let mut offsets = vec![0usize];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.points().len());
        }
        Ok(BlockPlan {
            system,
            blocks,
            quality,
            offsets,
            growth,
        })
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn blocks(&self) -> &[PseudoOrbit] {
        &self.blocks
    }

    pub fn growth(&self) -> GrowthRule {
        self.growth
    }

    /// `m_k` for `k = 1..=n`.
    pub fn lengths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.horizon()).collect()
    }

    /// `N_1, N_2, …`.
    pub fn quality_levels(&self) -> &[usize] {
        &self.quality
    }

    /// `M_0 = 0, M_1, …, M_n`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `M_n ≤ (n+1)·m_n` for every `n`.
    pub fn offset_bound_holds(&self) -> bool {
        self.lengths()
            .iter()
            .enumerate()
            .all(|(i, m)| self.offsets[i + 1] <= (i + 2) * m)
    }

    pub fn growth_floor(&self, k: usize) -> f64 {
        let mut floor = 0.0f64;
        if let Some(n_next) = self.quality.get(k) {
            floor = floor.max(2f64.powi((*n_next as u32).min(self.growth.cap) as i32));
        }
        if k >= 2 {
            floor = floor.max(self.growth.ratio * self.offsets[k - 1] as f64);
        }
        floor
    }

    pub fn growth_violations(&self) -> Vec<GrowthViolation> {
        self.lengths()
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| {
                let floor = self.growth_floor(i + 1);
                (floor > m as f64).then_some(GrowthViolation {
                    block: i + 1,
                    length: m,
                    floor,
                })
            })
            .collect()
    }

    /// Checks that block `k` follows the word from `M_{k-1}` and that its
    /// prefix means are below `1/k` from `N_k` on.
    pub fn block_verdict(&self, k: usize) -> Verdict {
        let b = &self.blocks[k - 1];
        let offset = self.offsets[k - 1];
        let level = 1.0 / k as f64;
        let n_k = self.quality[k - 1];
        let params = [
            ("block", k as f64),
            ("offset", offset as f64),
            ("level", level),
            ("quality", n_k as f64),
        ];
        let word = self.system.word();
        let own = b.system().word();
        if b.system().family() != self.system.family() {
            return Verdict::fail(Property::BlockQuality, Witness::Value { index: 0, value: k as f64 }, &params);
        }
        // a symbol of the block's word that disagrees with w_{offset+i}
        if let Some(i) = (0..b.horizon()).find(|&i| own.symbol_at(i) != word.symbol_at(offset + i)) {
            let value = own.symbol_at(i) as f64;
            return Verdict::fail(Property::BlockQuality, Witness::Value { index: offset + i, value }, &params);
        }
        let sums = b.error_prefix_sums();
        let m = b.horizon();
        if n_k > m {
            let mean = sums[m] / m as f64;
            return Verdict::fail(Property::BlockQuality, Witness::PrefixMean { n: m, mean }, &params);
        }
        match (n_k..=m).map(|n| (n, sums[n] / n as f64)).find(|(_, mean)| *mean >= level) {
            Some((n, mean)) => Verdict::fail(Property::BlockQuality, Witness::PrefixMean { n, mean }, &params),
            None => Verdict::pass(Property::BlockQuality, &params),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Concatenation {
    pub xi: PseudoOrbit,
    /// Step indices `M_k - 1`, `k = 1..n-1`.
    pub junctions: Vec<usize>,
    pub junction_errors: Vec<f64>,
}

/// Lays the blocks end to end. Rejects the first block that fails
/// [`BlockPlan::block_verdict`], wrapping its verdict in a block witness.
pub fn concatenate(plan: &BlockPlan) -> Result<Concatenation> {
    for k in 1..=plan.blocks.len() {
        let v = plan.block_verdict(k);
        if !v.holds {
            let outer = Verdict::fail(
                Property::BlockQuality,
                Witness::Block {
                    block: k,
                    inner: Box::new(v),
                },
                &[("blocks", plan.blocks.len() as f64)],
            );
            return Err(Error::Precondition(Box::new(outer)));
        }
    }
    let points: Vec<Point> = plan.blocks.iter().flat_map(|b| b.points().iter().cloned()).collect();
    let junctions: Vec<usize> = plan.offsets[1..plan.offsets.len() - 1].iter().map(|m| m - 1).collect();
    if points.len() < 2 {
        return Err(Error::param("blocks", "the concatenation has fewer than two points"));
    }
    let xi = PseudoOrbit::new(plan.system.clone(), points)?;
    let junction_errors = junctions.iter().map(|&j| xi.step_errors()[j]).collect();
    Ok(Concatenation {
        xi,
        junctions,
        junction_errors,
    })
}

/// Interior, junction and tail parts of `Σ_{i<j} e_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Split {
    pub j: usize,
    /// Number of completed blocks `n`, with `M_n ≤ j < M_{n+1}`.
    pub blocks: usize,
    pub interior: f64,
    pub junction: f64,
    pub tail: f64,
    pub direct: f64,
}

impl Split {
    pub fn total(&self) -> f64 {
        self.interior + self.junction + self.tail
    }

    pub fn matches(&self) -> bool {
        (self.total() - self.direct).abs() <= SPLIT_TOL
    }
}

/// The three bounds at a block boundary `j = M_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryCheck {
    pub n: usize,
    pub offset: usize,
    pub mean: f64,
    /// Interior mass of block `n`, divided by `M_n`; at most `1/n`.
    pub current: f64,
    pub current_bound: f64,
    /// Interior mass of blocks `1..n-1` over `M_n`; at most `M_{n-1}/M_n`.
    pub previous: f64,
    pub previous_bound: f64,
    /// Junction mass over `M_n`; at most `n·diam(X)/M_n`.
    pub junction: f64,
    pub junction_bound: f64,
    /// `1/n + 1/ratio + n·diam(X)/M_n`, the target the growth floor aims at.
    pub target: f64,
}

impl BoundaryCheck {
    pub fn bounds_hold(&self) -> bool {
        self.current <= self.current_bound + SPLIT_TOL
            && self.previous <= self.previous_bound + SPLIT_TOL
            && self.junction <= self.junction_bound + SPLIT_TOL
    }

    pub fn target_met(&self) -> bool {
        self.mean <= self.target
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticCertificate {
    pub splits: Vec<Split>,
    pub boundaries: Vec<BoundaryCheck>,
    pub growth_violations: Vec<GrowthViolation>,
    /// Boundary means are non-increasing in `n`.
    pub boundary_means_monotone: bool,
    /// The certificate rests on a finite growth surrogate.
    pub heuristic: bool,
    pub verdict: Verdict,
}

/// Recomputes the interior/junction/tail split at every `j` in `sample`
/// (every `j ∈ [1, H]` when `None`) from the blocks' own step errors and
/// compares it with direct prefix sums of the concatenation.
pub fn asymptotic_certificate(
    concat: &Concatenation,
    plan: &BlockPlan,
    sample: Option<&[usize]>,
) -> Result<AsymptoticCertificate> {
    let xi = &concat.xi;
    let h = xi.horizon();
    let direct = xi.error_prefix_sums();
    let offsets = plan.offsets();
    let n_blocks = plan.blocks.len();
    if offsets[n_blocks] != h + 1 {
        return Err(Error::param("plan", "the concatenation does not come from this plan"));
    }
    let block_sums: Vec<Vec<f64>> = plan.blocks.iter().map(|b| b.error_prefix_sums()).collect();
    let interior: Vec<f64> = block_sums.iter().map(|s| *s.last().unwrap()).collect();
    // cumulative interior and junction mass of the first n blocks
    let mut interior_before = vec![0.0];
    let mut junction_before = vec![0.0];
    for k in 0..n_blocks {
        interior_before.push(interior_before[k] + interior[k]);
        let jn = concat.junction_errors.get(k).copied().unwrap_or(0.0);
        junction_before.push(junction_before[k] + jn);
    }

    let all: Vec<usize>;
    let grid = match sample {
        Some(s) => s,
        None => {
            all = (1..=h).collect();
            &all
        }
    };
    let mut splits = Vec::with_capacity(grid.len());
    for &j in grid {
        if j == 0 || j > h {
            return Err(Error::range("j", j, format!("[1, {h}]")));
        }
        let n = offsets.partition_point(|&m| m <= j) - 1;
        // steps of block n+1 before j; the last block has only m steps
        let inside = (j - offsets[n]).min(plan.blocks.get(n).map_or(0, |b| b.horizon()));
        let tail = block_sums.get(n).map_or(0.0, |s| s[inside]);
        splits.push(Split {
            j,
            blocks: n,
            interior: interior_before[n],
            junction: junction_before[n],
            tail,
            direct: direct[j],
        });
    }

    let diam = xi.space().diameter();
    let mut boundaries = Vec::new();
    for n in 1..=n_blocks {
        let offset = offsets[n].min(h);
        let m = offset as f64;
        // the last block has no outgoing junction
        let junction_mass = junction_before[n.min(n_blocks - 1)];
        boundaries.push(BoundaryCheck {
            n,
            offset,
            mean: direct[offset] / m,
            current: interior[n - 1] / m,
            current_bound: 1.0 / n as f64,
            previous: interior_before[n - 1] / m,
            previous_bound: offsets[n - 1] as f64 / m,
            junction: junction_mass / m,
            junction_bound: n as f64 * diam / m,
            target: 1.0 / n as f64 + 1.0 / plan.growth.ratio + n as f64 * diam / m,
        });
    }
    let boundary_means_monotone = boundaries.windows(2).all(|w| w[1].mean <= w[0].mean);
    let growth_violations = plan.growth_violations();

    let params = [
        ("blocks", n_blocks as f64),
        ("horizon", h as f64),
        ("growth_ratio", plan.growth.ratio),
        ("growth_cap", plan.growth.cap as f64),
    ];
    let witness = if let Some(s) = splits.iter().find(|s| !s.matches()) {
        Some(Witness::Inequality {
            n: s.j,
            lhs: s.total(),
            rhs: s.direct,
        })
    } else if let Some(b) = boundaries.iter().find(|b| !b.bounds_hold() || !b.target_met()) {
        Some(Witness::PrefixMean {
            n: b.offset,
            mean: b.mean,
        })
    } else {
        growth_violations.first().map(|g| Witness::Value {
            index: g.block,
            value: g.length as f64,
        })
    };
    let verdict = match witness {
        None => Verdict::pass(Property::AsymptoticAveragePseudoOrbit, &params),
        Some(w) => Verdict::fail(Property::AsymptoticAveragePseudoOrbit, w, &params),
    };
    Ok(AsymptoticCertificate {
        splits,
        boundaries,
        growth_violations,
        boundary_means_monotone,
        heuristic: true,
        verdict,
    })
}

/// Builds block `k` of a plan for `system`: starting from a seeded point,
/// each step lands within `level_k` of the image under the word shifted by
/// the block's offset. Lengths are `m_k`; levels should satisfy `level_k < 1/k`.
pub fn noisy_blocks(system: &System, lengths: &[usize], levels: &[f64], seed: u64) -> Result<Vec<PseudoOrbit>> {
    if lengths.len() != levels.len() {
        return Err(Error::param("levels", "one level per block is required"));
    }
    if let Some(l) = levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(Error::param("levels", format!("must be nonnegative, got {l}")));
    }
    if lengths.contains(&0) {
        return Err(Error::param("lengths", "block lengths must be positive"));
    }
    let space = system.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset = 0;
    let mut blocks = Vec::with_capacity(lengths.len());
    for (&m, &level) in lengths.iter().zip(levels) {
        let shifted = system.shifted(offset);
        let mut points = vec![uniform_point(space, &mut rng)];
        for i in 0..m {
            let image = shifted.step(i, &points[i]);
            let dir = unit_direction(space.dimension(), &mut rng);
            let moved: Vec<f64> = image.iter().zip(&dir).map(|(c, d)| c + level * d).collect();
            points.push(space.project(&moved));
        }
        blocks.push(PseudoOrbit::new(shifted, points)?);
        offset += m + 1;
    }
    Ok(blocks)
}

//! Compact phase spaces with an exact diameter and deterministic ε-nets.
//!
//! Three kinds are supported: the closed unit disk in the plane, axis-aligned
//! boxes in any dimension, and the circle `ℝ/ℤ` with its geodesic metric
//! (points are represented by an angle-fraction in `[0, 1)`).

use std::collections::HashSet;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by membership tests on the boundary.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Default upper bound on the number of points a net may contain.
pub const DEFAULT_NET_CAP: usize = 1_000_000;

/// A point of a phase space, stored as its coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricSpace {
    /// The closed unit disk `{x² + y² ≤ 1}`.
    #[serde(rename = "unit-disk-2d")]
    UnitDisk,
    /// The product `∏ [lo_i, hi_i]`.
    #[serde(rename = "box")]
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// The circle `ℝ/ℤ` of circumference one.
    #[serde(rename = "circle-1d")]
    Circle,
}

impl MetricSpace {
    pub fn unit_box(dim: usize) -> Self {
        MetricSpace::Box {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let space = MetricSpace::Box { lo, hi };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if let MetricSpace::Box { lo, hi } = self {
            if lo.is_empty() {
                return Err(Error::param("space", "box must have at least one axis"));
            }
            if lo.len() != hi.len() {
                return Err(Error::param(
                    "space",
                    format!("box bounds have {} and {} axes", lo.len(), hi.len()),
                ));
            }
            for (axis, (l, h)) in lo.iter().zip(hi).enumerate() {
                if !(l.is_finite() && h.is_finite() && l <= h) {
                    return Err(Error::param(
                        "space",
                        format!("axis {axis} has invalid bounds [{l}, {h}]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricSpace::UnitDisk => "unit-disk-2d",
            MetricSpace::Box { .. } => "box",
            MetricSpace::Circle => "circle-1d",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            MetricSpace::UnitDisk => 2,
            MetricSpace::Box { lo, .. } => lo.len(),
            MetricSpace::Circle => 1,
        }
    }

    /// Exact diameter of the space.
    pub fn diameter(&self) -> f64 {
        match self {
            MetricSpace::UnitDisk => 2.0,
            MetricSpace::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| (h - l) * (h - l))
                .sum::<f64>()
                .sqrt(),
            MetricSpace::Circle => 0.5,
        }
    }

    pub fn distance(&self, p: &[f64], q: &[f64]) -> f64 {
        match self {
            MetricSpace::Circle => {
                let d = (p[0] - q[0]).rem_euclid(1.0);
                d.min(1.0 - d)
            }
            _ => p
                .iter()
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_tol(p, MEMBERSHIP_TOL)
    }

    pub fn contains_tol(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dimension() || p.iter().any(|c| !c.is_finite()) {
            return false;
        }
        match self {
            MetricSpace::UnitDisk => (p[0] * p[0] + p[1] * p[1]).sqrt() <= 1.0 + tol,
            MetricSpace::Box { lo, hi } => p
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(c, (l, h))| *c >= l - tol && *c <= h + tol),
            MetricSpace::Circle => p[0] >= -tol && p[0] < 1.0 + tol,
        }
    }

    /// Nearest point of the space (canonical representative on the circle).
    pub fn project(&self, p: &[f64]) -> Point {
        match self {
            MetricSpace::UnitDisk => {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if r > 1.0 {
                    Point(vec![p[0] / r, p[1] / r])
                } else {
                    Point(p.to_vec())
                }
            }
            MetricSpace::Box { lo, hi } => Point(
                p.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(c, (l, h))| c.clamp(*l, *h))
                    .collect(),
            ),
            MetricSpace::Circle => Point(vec![wrap_unit(p[0])]),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            MetricSpace::UnitDisk => Point(vec![0.0, 0.0]),
            MetricSpace::Box { lo, hi } => {
                Point(lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect())
            }
            MetricSpace::Circle => Point(vec![0.0]),
        }
    }

    /// Finite set of points such that every point of the space lies within
    /// `mesh` of one of them.
    ///
    /// Points come from an axis-aligned vertex grid of spacing
    /// `mesh · min(1, 2/√k)` enumerated lexicographically (first axis
    /// slowest). On the disk, grid vertices outside the disk are replaced by
    /// their radial projection, which never increases a distance to a disk
    /// point; duplicates keep their first position.
    pub fn net(&self, mesh: f64, cap: usize) -> Result<Vec<Point>> {
        if !(mesh > 0.0 && mesh.is_finite()) {
            return Err(Error::param("mesh", format!("must be positive, got {mesh}")));
        }
        if mesh >= self.diameter() {
            return Ok(vec![self.center()]);
        }
        let k = self.dimension();
        let spacing = mesh * (2.0 / (k as f64).sqrt()).min(1.0);

        let (lo, hi, periodic) = match self {
            MetricSpace::UnitDisk => (vec![-1.0, -1.0], vec![1.0, 1.0], false),
            MetricSpace::Box { lo, hi } => (lo.clone(), hi.clone(), false),
            MetricSpace::Circle => (vec![0.0], vec![1.0], true),
        };
        let axes: Vec<Vec<f64>> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| {
                let width = h - l;
                if width == 0.0 {
                    return vec![*l];
                }
                let intervals = ((width / spacing) - 1e-9).ceil().max(1.0) as usize;
                let count = if periodic { intervals } else { intervals + 1 };
                (0..count)
                    .map(|i| {
                        if !periodic && i == intervals {
                            *h
                        } else {
                            l + width * i as f64 / intervals as f64
                        }
                    })
                    .collect()
            })
            .collect();

        let required: u128 = axes.iter().map(|a| a.len() as u128).product();
        if required > cap as u128 {
            return Err(Error::Resource {
                what: "net",
                required,
                cap: cap as u128,
                advice: "increase the mesh or raise the net cap",
            });
        }

        let mut out = Vec::with_capacity(required as usize);
        let mut seen = HashSet::new();
        let mut index = vec![0usize; k];
        loop {
            let raw: Vec<f64> = index.iter().zip(&axes).map(|(i, a)| a[*i]).collect();
            let p = self.project(&raw);
            let key: Vec<u64> = p.iter().map(|c| c.to_bits()).collect();
            if seen.insert(key) {
                out.push(p);
            }
            // odometer increment, last axis fastest
            let mut axis = k;
            loop {
                if axis == 0 {
                    return Ok(out);
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < axes[axis].len() {
                    break;
                }
                index[axis] = 0;
            }
        }
    }
}

pub(crate) fn wrap_unit(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_gap(space: &MetricSpace, net: &[Point], samples: &[Point]) -> f64 {
        samples
            .iter()
            .map(|s| {
                net.iter()
                    .map(|p| space.distance(s, p))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    fn grid_samples(space: &MetricSpace, per_axis: usize) -> Vec<Point> {
        let (lo, hi) = match space {
            MetricSpace::UnitDisk => (vec![-1.0, -1.0], vec![1.0, 1.0]),
            MetricSpace::Box { lo, hi } => (lo.clone(), hi.clone()),
            MetricSpace::Circle => (vec![0.0], vec![0.999_999]),
        };
        let k = lo.len();
        let mut out = Vec::new();
        let total = per_axis.pow(k as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut c = vec![0.0; k];
            for axis in (0..k).rev() {
                let i = rem % per_axis;
                rem /= per_axis;
                c[axis] = lo[axis] + (hi[axis] - lo[axis]) * i as f64 / (per_axis - 1) as f64;
            }
            if space.contains(&c) {
                out.push(Point(c));
            }
        }
        out
    }

    #[test]
    fn diameters_are_exact() {
        assert_eq!(MetricSpace::UnitDisk.diameter(), 2.0);
        assert_eq!(MetricSpace::unit_box(1).diameter(), 1.0);
        assert_eq!(MetricSpace::Circle.diameter(), 0.5);
        let b = MetricSpace::new_box(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(b.diameter(), 5.0);
    }

    #[test]
    fn circle_distance_is_geodesic() {
        let c = MetricSpace::Circle;
        assert!((c.distance(&[0.05], &[0.95]) - 0.1).abs() < 1e-12);
        assert!((c.distance(&[0.0], &[0.5]) - 0.5).abs() < 1e-12);
        assert_eq!(c.distance(&[0.3], &[0.3]), 0.0);
    }

    #[test]
    fn unit_interval_net_at_half() {
        let net = MetricSpace::unit_box(1).net(0.5, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net, vec![Point(vec![0.0]), Point(vec![0.5]), Point(vec![1.0])]);
    }

    #[test]
    fn disk_net_with_mesh_two_is_the_origin() {
        let net = MetricSpace::UnitDisk.net(2.0, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net, vec![Point(vec![0.0, 0.0])]);
    }

    #[test]
    fn unit_square_net_quarter_mesh_covers() {
        let space = MetricSpace::unit_box(2);
        let net = space.net(0.25, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net.len(), 25);
        assert_eq!(net[0], Point(vec![0.0, 0.0]));
        assert_eq!(net[1], Point(vec![0.0, 0.25]));
        let gap = max_gap(&space, &net, &grid_samples(&space, 101));
        assert!(gap <= 0.25, "gap {gap}");
    }

    #[test]
    fn disk_and_circle_nets_cover() {
        for mesh in [0.3, 0.1, 0.05] {
            let net = MetricSpace::UnitDisk.net(mesh, DEFAULT_NET_CAP).unwrap();
            assert!(net.iter().all(|p| MetricSpace::UnitDisk.contains(p)));
            let gap = max_gap(&MetricSpace::UnitDisk, &net, &grid_samples(&MetricSpace::UnitDisk, 81));
            assert!(gap <= mesh, "mesh {mesh} gap {gap}");
        }
        let net = MetricSpace::Circle.net(0.05, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net.len(), 20);
        let gap = max_gap(&MetricSpace::Circle, &net, &grid_samples(&MetricSpace::Circle, 997));
        assert!(gap <= 0.05);
    }

    #[test]
    fn high_dimensional_net_shrinks_spacing() {
        let space = MetricSpace::unit_box(5);
        let net = space.net(0.6, DEFAULT_NET_CAP).unwrap();
        let gap = max_gap(&space, &net, &grid_samples(&space, 5));
        assert!(gap <= 0.6, "gap {gap}");
    }

    #[test]
    fn net_cap_is_enforced() {
        let err = MetricSpace::unit_box(3).net(0.001, 1000).unwrap_err();
        match err {
            Error::Resource { required, cap, .. } => {
                assert_eq!(cap, 1000);
                assert_eq!(required, 1001u128.pow(3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_box_is_rejected() {
        assert!(MetricSpace::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(MetricSpace::new_box(vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(MetricSpace::new_box(vec![], vec![]).is_err());
    }
}

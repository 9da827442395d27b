//! Generator maps drawn from a closed algebra of continuous maps, and the
//! families `f_1..f_m` they form (symbol `0` is always the identity).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{wrap_unit, MetricSpace, Point, MEMBERSHIP_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorMap {
    Identity,
    /// `out[i] = in[perm[i]]`.
    #[serde(rename = "coordinate-permutation")]
    Permutation { perm: Vec<usize> },
    /// `out = matrix · in + offset`.
    Affine {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// `out[i] = factors[i] · in[i]`.
    #[serde(rename = "componentwise-scale")]
    Scale { factors: Vec<f64> },
}

impl GeneratorMap {
    pub fn swap() -> Self {
        GeneratorMap::Permutation { perm: vec![1, 0] }
    }

    pub fn scale(factors: Vec<f64>) -> Self {
        GeneratorMap::Scale { factors }
    }

    /// Rotation of the circle by `angle` (fraction of a full turn).
    pub fn rotation(angle: f64) -> Self {
        GeneratorMap::Affine {
            matrix: vec![vec![1.0]],
            offset: vec![angle],
        }
    }

    /// Evaluates the linear formula without any wrapping.
    fn eval_raw(&self, p: &[f64]) -> Vec<f64> {
        match self {
            GeneratorMap::Identity => p.to_vec(),
            GeneratorMap::Permutation { perm } => perm.iter().map(|&i| p[i]).collect(),
            GeneratorMap::Affine { matrix, offset } => matrix
                .iter()
                .zip(offset)
                .map(|(row, b)| row.iter().zip(p).map(|(a, x)| a * x).sum::<f64>() + b)
                .collect(),
            GeneratorMap::Scale { factors } => p.iter().zip(factors).map(|(x, s)| x * s).collect(),
        }
    }

    /// Linear part and offset, for the self-map checks.
    fn affine_parts(&self, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        match self {
            GeneratorMap::Identity => (identity_matrix(dim), vec![0.0; dim]),
            GeneratorMap::Permutation { perm } => {
                let mut m = vec![vec![0.0; dim]; dim];
                for (row, &col) in perm.iter().enumerate() {
                    m[row][col] = 1.0;
                }
                (m, vec![0.0; dim])
            }
            GeneratorMap::Affine { matrix, offset } => (matrix.clone(), offset.clone()),
            GeneratorMap::Scale { factors } => {
                let mut m = identity_matrix(dim);
                for (i, f) in factors.iter().enumerate() {
                    m[i][i] = *f;
                }
                (m, vec![0.0; dim])
            }
        }
    }

    fn check_shape(&self, dim: usize) -> Result<()> {
        let bad = |reason: String| Err(Error::param("maps", reason));
        match self {
            GeneratorMap::Identity => Ok(()),
            GeneratorMap::Permutation { perm } => {
                let mut seen = vec![false; dim];
                if perm.len() != dim {
                    return bad(format!("permutation has length {} in dimension {dim}", perm.len()));
                }
                for &i in perm {
                    if i >= dim || seen[i] {
                        return bad(format!("{perm:?} is not a permutation of 0..{dim}"));
                    }
                    seen[i] = true;
                }
                Ok(())
            }
            GeneratorMap::Affine { matrix, offset } => {
                if matrix.len() != dim || offset.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return bad(format!("affine map must be {dim}x{dim} with a length-{dim} offset"));
                }
                if matrix.iter().flatten().chain(offset).any(|v| !v.is_finite()) {
                    return bad("affine map has non-finite entries".into());
                }
                Ok(())
            }
            GeneratorMap::Scale { factors } => {
                if factors.len() != dim || factors.iter().any(|f| !f.is_finite()) {
                    return bad(format!("scale needs {dim} finite factors"));
                }
                Ok(())
            }
        }
    }

    /// Checks that the map sends `space` into itself.
    ///
    /// Boxes: all corner images lie in the box (exact by convexity).
    /// Disk: `‖A‖₂ + ‖b‖ ≤ 1`, a sufficient condition.
    /// Circle: the linear coefficient is an integer so the map descends to `ℝ/ℤ`.
    pub fn check_self_map(&self, space: &MetricSpace) -> Result<()> {
        let dim = space.dimension();
        self.check_shape(dim)?;
        let (a, b) = self.affine_parts(dim);
        match space {
            MetricSpace::Box { lo, hi } => {
                if dim > 20 {
                    return Err(Error::param("maps", "corner check limited to 20 axes"));
                }
                for mask in 0u32..(1 << dim) {
                    let corner: Vec<f64> = (0..dim)
                        .map(|i| if mask & (1 << i) != 0 { hi[i] } else { lo[i] })
                        .collect();
                    let image = self.eval_raw(&corner);
                    if !space.contains(&image) {
                        return Err(Error::param(
                            "maps",
                            format!("{self:?} sends corner {corner:?} to {image:?}, outside the box"),
                        ));
                    }
                }
                Ok(())
            }
            MetricSpace::UnitDisk => {
                let norm = spectral_norm_2x2(&a);
                let shift = (b[0] * b[0] + b[1] * b[1]).sqrt();
                if norm + shift > 1.0 + MEMBERSHIP_TOL {
                    return Err(Error::param(
                        "maps",
                        format!("{self:?} may leave the unit disk (‖A‖ + ‖b‖ = {})", norm + shift),
                    ));
                }
                Ok(())
            }
            MetricSpace::Circle => {
                let coeff = a[0][0];
                if coeff.fract() != 0.0 {
                    return Err(Error::param(
                        "maps",
                        format!("circle maps need an integer coefficient, got {coeff}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn identity_matrix(dim: usize) -> Vec<Vec<f64>> {
    (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Largest singular value of a 2x2 matrix, in closed form.
fn spectral_norm_2x2(a: &[Vec<f64>]) -> f64 {
    let (p, q, r, s) = (a[0][0], a[0][1], a[1][0], a[1][1]);
    let t = p * p + q * q + r * r + s * s;
    let det = p * s - q * r;
    let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
    ((t + disc) / 2.0).sqrt()
}

/// The maps `f_1..f_m` on a common space. Symbol `0` resolves to the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct GeneratorFamily {
    space: MetricSpace,
    maps: Vec<GeneratorMap>,
}

#[derive(Serialize, Deserialize)]
struct RawFamily {
    space: MetricSpace,
    maps: Vec<GeneratorMap>,
}

impl TryFrom<RawFamily> for GeneratorFamily {
    type Error = Error;

    fn try_from(raw: RawFamily) -> Result<Self> {
        GeneratorFamily::new(raw.space, raw.maps)
    }
}

impl From<GeneratorFamily> for RawFamily {
    fn from(f: GeneratorFamily) -> Self {
        RawFamily {
            space: f.space,
            maps: f.maps,
        }
    }
}

impl GeneratorFamily {
    pub fn new(space: MetricSpace, maps: Vec<GeneratorMap>) -> Result<Self> {
        space.validate()?;
        if maps.is_empty() {
            return Err(Error::param("maps", "a family needs at least one generator"));
        }
        for map in &maps {
            map.check_self_map(&space)?;
        }
        Ok(GeneratorFamily { space, maps })
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn maps(&self) -> &[GeneratorMap] {
        &self.maps
    }

    /// Number of generators `m` (not counting the identity `f_0`).
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `f_symbol(p)` with range and domain checks.
    pub fn apply(&self, symbol: usize, p: &[f64]) -> Result<Point> {
        if symbol > self.maps.len() {
            return Err(Error::range("symbol", symbol, format!("[0, {}]", self.maps.len())));
        }
        if !self.space.contains(p) {
            return Err(Error::Domain {
                point: p.to_vec(),
                space: self.space.name().to_string(),
            });
        }
        Ok(self.apply_unchecked(symbol, p))
    }

    /// `f_symbol(p)` for a symbol already known to be in range.
    pub(crate) fn apply_unchecked(&self, symbol: usize, p: &[f64]) -> Point {
        if symbol == 0 {
            return Point::new(p.to_vec());
        }
        let mut out = self.maps[symbol - 1].eval_raw(p);
        if let MetricSpace::Circle = self.space {
            out[0] = wrap_unit(out[0]);
        }
        Point::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_family() -> GeneratorFamily {
        GeneratorFamily::new(
            MetricSpace::UnitDisk,
            vec![GeneratorMap::swap(), GeneratorMap::scale(vec![0.5, 0.5])],
        )
        .unwrap()
    }

    #[test]
    fn identity_symbol_returns_input() {
        let f = disk_family();
        assert_eq!(f.apply(0, &[0.3, 0.4]).unwrap(), Point::from([0.3, 0.4]));
    }

    #[test]
    fn swap_and_halving() {
        let f = disk_family();
        assert_eq!(f.apply(1, &[1.0, 0.0]).unwrap(), Point::from([0.0, 1.0]));
        assert_eq!(f.apply(2, &[1.0, 0.0]).unwrap(), Point::from([0.5, 0.0]));
    }

    #[test]
    fn out_of_range_symbol_and_point() {
        let f = disk_family();
        assert!(matches!(f.apply(3, &[0.0, 0.0]), Err(Error::Range { .. })));
        assert!(matches!(f.apply(1, &[1.0, 1.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn self_map_violations_are_rejected() {
        let r = GeneratorFamily::new(MetricSpace::UnitDisk, vec![GeneratorMap::scale(vec![1.5, 1.0])]);
        assert!(r.is_err());
        let r = GeneratorFamily::new(
            MetricSpace::unit_box(1),
            vec![GeneratorMap::Affine {
                matrix: vec![vec![0.5]],
                offset: vec![0.6],
            }],
        );
        assert!(r.is_err());
        let r = GeneratorFamily::new(MetricSpace::Circle, vec![GeneratorMap::scale(vec![0.5])]);
        assert!(r.is_err());
        let r = GeneratorFamily::new(MetricSpace::UnitDisk, vec![GeneratorMap::Permutation { perm: vec![0, 0] }]);
        assert!(r.is_err());
        assert!(GeneratorFamily::new(MetricSpace::UnitDisk, vec![]).is_err());
    }

    #[test]
    fn rotation_wraps_on_the_circle() {
        let f = GeneratorFamily::new(MetricSpace::Circle, vec![GeneratorMap::rotation(0.3)]).unwrap();
        let p = f.apply(1, &[0.9]).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn images_of_net_points_stay_in_space() {
        let families = vec![
            disk_family(),
            GeneratorFamily::new(
                MetricSpace::UnitDisk,
                vec![GeneratorMap::Affine {
                    matrix: vec![vec![0.0, -0.6], vec![0.6, 0.0]],
                    offset: vec![0.3, 0.1],
                }],
            )
            .unwrap(),
            GeneratorFamily::new(
                MetricSpace::new_box(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap(),
                vec![GeneratorMap::scale(vec![0.5, -1.0])],
            )
            .unwrap(),
            GeneratorFamily::new(MetricSpace::Circle, vec![GeneratorMap::rotation(0.71)]).unwrap(),
        ];
        for f in families {
            let net = f.space().net(0.1, 100_000).unwrap();
            for s in 0..=f.len() {
                for p in &net {
                    let q = f.apply(s, p).unwrap();
                    assert!(f.space().contains(&q), "{q:?}");
                }
            }
        }
    }

    #[test]
    fn spectral_norm_matches_known_values() {
        assert!((spectral_norm_2x2(&[vec![0.0, 1.0], vec![1.0, 0.0]]) - 1.0).abs() < 1e-12);
        assert!((spectral_norm_2x2(&[vec![3.0, 0.0], vec![4.0, 0.0]]) - 5.0).abs() < 1e-12);
    }
}

//! A generator family driven by a word: the action `f_w^n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::GeneratorFamily;
use crate::space::{MetricSpace, Point};
use crate::word::Word;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub struct System {
    family: GeneratorFamily,
    word: Word,
}

#[derive(Serialize, Deserialize)]
struct RawSystem {
    family: GeneratorFamily,
    word: Word,
}

impl TryFrom<RawSystem> for System {
    type Error = Error;

    fn try_from(raw: RawSystem) -> Result<Self> {
        System::new(raw.family, raw.word)
    }
}

impl From<System> for RawSystem {
    fn from(s: System) -> Self {
        RawSystem {
            family: s.family,
            word: s.word,
        }
    }
}

impl System {
    pub fn new(family: GeneratorFamily, word: Word) -> Result<Self> {
        if word.alphabet() != family.len() {
            return Err(Error::param(
                "word",
                format!(
                    "alphabet size {} does not match the {} generators",
                    word.alphabet(),
                    family.len()
                ),
            ));
        }
        Ok(System { family, word })
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn space(&self) -> &MetricSpace {
        self.family.space()
    }

    /// The same family driven by `j ↦ w_{j+offset}`.
    pub fn shifted(&self, offset: usize) -> System {
        System {
            family: self.family.clone(),
            word: self.word.shifted(offset),
        }
    }

    /// `f_{w_j}(p)`.
    pub fn step(&self, j: usize, p: &[f64]) -> Point {
        self.family.apply_unchecked(self.word.symbol_at(j), p)
    }

    /// `(z, f_w^1(z), …, f_w^{n-1}(z))`.
    pub fn orbit(&self, z: &[f64], n: usize) -> Result<Vec<Point>> {
        self.orbit_shifted(0, z, n)
    }

    /// Like [`System::orbit`] but composing `f_{w_k}, f_{w_{k+1}}, …`.
    pub fn orbit_shifted(&self, start: usize, z: &[f64], n: usize) -> Result<Vec<Point>> {
        if n == 0 {
            return Err(Error::param("n", "orbit length must be at least 1"));
        }
        if !self.space().contains(z) {
            return Err(Error::Domain {
                point: z.to_vec(),
                space: self.space().name().to_string(),
            });
        }
        let mut out = Vec::with_capacity(n);
        out.push(Point::new(z.to_vec()));
        for j in 0..n - 1 {
            let next = self.step(start + j, &out[j]);
            out.push(next);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::GeneratorMap;

    fn disk() -> System {
        System::new(
            GeneratorFamily::new(
                MetricSpace::UnitDisk,
                vec![GeneratorMap::swap(), GeneratorMap::scale(vec![0.5, 0.5])],
            )
            .unwrap(),
            Word::periodic(2, vec![1, 2]).unwrap(),
        )
        .unwrap()
    }

    fn pts(v: &[[f64; 2]]) -> Vec<Point> {
        v.iter().map(|p| Point::from(*p)).collect()
    }

    #[test]
    fn disk_orbit_of_one_zero() {
        let orbit = disk().orbit(&[1.0, 0.0], 5).unwrap();
        assert_eq!(
            orbit,
            pts(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.5], [0.5, 0.0], [0.25, 0.0]])
        );
    }

    #[test]
    fn orbit_of_length_one_is_the_start() {
        assert_eq!(disk().orbit(&[0.2, 0.1], 1).unwrap(), pts(&[[0.2, 0.1]]));
    }

    #[test]
    fn halving_on_the_interval() {
        let s = System::new(
            GeneratorFamily::new(MetricSpace::unit_box(1), vec![GeneratorMap::scale(vec![0.5])]).unwrap(),
            Word::constant(1, 1).unwrap(),
        )
        .unwrap();
        let o: Vec<f64> = s.orbit(&[1.0], 4).unwrap().iter().map(|p| p[0]).collect();
        assert_eq!(o, vec![1.0, 0.5, 0.25, 0.125]);
    }

    #[test]
    fn shifted_orbit_starts_at_the_given_symbol() {
        let o = disk().orbit_shifted(1, &[1.0, 0.0], 3).unwrap();
        assert_eq!(o, pts(&[[1.0, 0.0], [0.5, 0.0], [0.0, 0.5]]));
        assert_eq!(disk().orbit_shifted(0, &[0.3, 0.2], 6).unwrap(), disk().orbit(&[0.3, 0.2], 6).unwrap());
    }

    #[test]
    fn identity_only_family_is_stationary() {
        let s = System::new(
            GeneratorFamily::new(MetricSpace::UnitDisk, vec![GeneratorMap::Identity]).unwrap(),
            Word::constant(1, 1).unwrap(),
        )
        .unwrap();
        let o = s.orbit_shifted(17, &[0.1, -0.4], 10).unwrap();
        assert_eq!(o, vec![Point::from([0.1, -0.4]); 10]);
    }

    #[test]
    fn orbit_rejects_outside_start_and_zero_length() {
        assert!(disk().orbit(&[2.0, 0.0], 3).is_err());
        assert!(disk().orbit(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn mismatched_alphabet_is_rejected() {
        let f = GeneratorFamily::new(MetricSpace::UnitDisk, vec![GeneratorMap::swap()]).unwrap();
        assert!(System::new(f, Word::periodic(2, vec![1, 2]).unwrap()).is_err());
    }
}

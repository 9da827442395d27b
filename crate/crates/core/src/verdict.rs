use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    PseudoOrbit,
    ErgodicPseudoOrbit,
    AveragePseudoOrbit,
    WeakAsymptoticAveragePseudoOrbit,
    AsymptoticAveragePseudoOrbit,
    BlockQuality,
    CesaroNull,
    CesaroEquivalence,
    /// Tail maximum of the tracing prefix means is below `ε`.
    ShadowedOnAverage,
    /// Tail maximum of the tracing prefix means is below `tol`.
    AsymptoticallyShadowedOnAverage,
    /// Lower density of the hit set exceeds `α`.
    MAlphaShadowed,
    /// `Σ d(orbit, ξ) ≤ 4(M + Σ α_i)` at every prefix.
    TrackingBound,
}

/// Concrete evidence attached to a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// A single step error `e_index ≥ δ`.
    Step { index: usize, error: f64 },
    /// A window `[start, start+length)` whose mean step error is too large.
    Window { start: usize, length: usize, mean: f64 },
    /// A prefix of length `n` whose mean is too large.
    PrefixMean { n: usize, mean: f64 },
    /// An exceptional set whose upper density estimate is too large.
    ExceptionalDensity { upper_density: f64, count: usize },
    /// A value `a_index` that breaks a pointwise bound.
    Value { index: usize, value: f64 },
    /// An inequality `lhs ≤ rhs` that failed at prefix `n`.
    Inequality { n: usize, lhs: f64, rhs: f64 },
    /// Block `block` of a concatenation plan failed its own check.
    Block { block: usize, inner: Box<Verdict> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: Property,
    pub holds: bool,
    /// Always present when `holds` is false.
    pub witness: Option<Witness>,
    /// Every parameter needed to recompute the verdict.
    pub params: BTreeMap<String, f64>,
    /// True when only a sample of the required checks was performed.
    #[serde(default)]
    pub sampled: bool,
}

impl Verdict {
    pub fn pass(property: Property, params: &[(&str, f64)]) -> Self {
        Verdict {
            property,
            holds: true,
            witness: None,
            params: to_map(params),
            sampled: false,
        }
    }

    pub fn fail(property: Property, witness: Witness, params: &[(&str, f64)]) -> Self {
        Verdict {
            property,
            holds: false,
            witness: Some(witness),
            params: to_map(params),
            sampled: false,
        }
    }

    pub fn with_witness(mut self, witness: Witness) -> Self {
        self.witness = Some(witness);
        self
    }

    pub fn summary(&self) -> String {
        let name = serde_json::to_value(self.property)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        match &self.witness {
            Some(w) if !self.holds => format!("{name} fails, witness {w:?}"),
            _ => format!("{name} {}", if self.holds { "holds" } else { "fails" }),
        }
    }
}

fn to_map(params: &[(&str, f64)]) -> BTreeMap<String, f64> {
    params.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

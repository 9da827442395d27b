//! Infinite words `w ∈ {1..m}^ℕ` given by a finite rule.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum WordRule {
    Constant { symbol: usize },
    Periodic { pattern: Vec<usize> },
    /// Independent symbols drawn with the given weights; `symbol_at(j)` is
    /// random access into a ChaCha8 stream so queries never depend on order.
    SeededIid { weights: Vec<f64>, seed: u64 },
    /// `prefix` followed by `tail`, where the tail is indexed from the end of
    /// the prefix.
    ExplicitPrefix { prefix: Vec<usize>, tail: Box<WordRule> },
    /// `inner` with its first `offset` symbols dropped.
    Shifted { offset: usize, inner: Box<WordRule> },
}

impl WordRule {
    fn symbol_at(&self, j: usize) -> usize {
        match self {
            WordRule::Constant { symbol } => *symbol,
            WordRule::Periodic { pattern } => pattern[j % pattern.len()],
            WordRule::SeededIid { weights, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(2 * j as u128);
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                for (i, w) in weights.iter().enumerate() {
                    acc += w / total;
                    if u < acc {
                        return i + 1;
                    }
                }
                // u landed in the rounding gap after the last cumulative weight
                weights.iter().rposition(|w| *w > 0.0).unwrap() + 1
            }
            WordRule::ExplicitPrefix { prefix, tail } => match prefix.get(j) {
                Some(s) => *s,
                None => tail.symbol_at(j - prefix.len()),
            },
            WordRule::Shifted { offset, inner } => inner.symbol_at(j + offset),
        }
    }

    fn validate(&self, alphabet: usize) -> Result<()> {
        let check = |s: usize| {
            if s == 0 || s > alphabet {
                Err(Error::range("word symbol", s, format!("[1, {alphabet}]")))
            } else {
                Ok(())
            }
        };
        match self {
            WordRule::Constant { symbol } => check(*symbol),
            WordRule::Periodic { pattern } => {
                if pattern.is_empty() {
                    return Err(Error::param("word", "periodic pattern is empty"));
                }
                pattern.iter().try_for_each(|s| check(*s))
            }
            WordRule::SeededIid { weights, .. } => {
                if weights.len() != alphabet {
                    return Err(Error::param(
                        "word",
                        format!("{} weights for an alphabet of size {alphabet}", weights.len()),
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::param("word", "weights must be nonnegative with positive sum"));
                }
                Ok(())
            }
            WordRule::ExplicitPrefix { prefix, tail } => {
                prefix.iter().try_for_each(|s| check(*s))?;
                tail.validate(alphabet)
            }
            WordRule::Shifted { inner, .. } => inner.validate(alphabet),
        }
    }
}

/// A validated word over the alphabet `{1, …, m}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWord", into = "RawWord")]
pub struct Word {
    alphabet: usize,
    rule: WordRule,
}

#[derive(Serialize, Deserialize)]
struct RawWord {
    alphabet: usize,
    #[serde(flatten)]
    rule: WordRule,
}

impl TryFrom<RawWord> for Word {
    type Error = Error;

    fn try_from(raw: RawWord) -> Result<Self> {
        Word::new(raw.alphabet, raw.rule)
    }
}

impl From<Word> for RawWord {
    fn from(w: Word) -> Self {
        RawWord {
            alphabet: w.alphabet,
            rule: w.rule,
        }
    }
}

impl Word {
    pub fn new(alphabet: usize, rule: WordRule) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::param("word", "alphabet must be nonempty"));
        }
        rule.validate(alphabet)?;
        Ok(Word { alphabet, rule })
    }

    pub fn constant(alphabet: usize, symbol: usize) -> Result<Self> {
        Word::new(alphabet, WordRule::Constant { symbol })
    }

    pub fn periodic(alphabet: usize, pattern: Vec<usize>) -> Result<Self> {
        Word::new(alphabet, WordRule::Periodic { pattern })
    }

    pub fn seeded_iid(weights: Vec<f64>, seed: u64) -> Result<Self> {
        Word::new(weights.len(), WordRule::SeededIid { weights, seed })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn rule(&self) -> &WordRule {
        &self.rule
    }

    pub fn symbol_at(&self, j: usize) -> usize {
        self.rule.symbol_at(j)
    }

    pub fn prefix(&self, n: usize) -> Vec<usize> {
        (0..n).map(|j| self.symbol_at(j)).collect()
    }

    /// The word `j ↦ w_{j + offset}`.
    pub fn shifted(&self, offset: usize) -> Word {
        if offset == 0 {
            return self.clone();
        }
        let rule = match &self.rule {
            WordRule::Shifted { offset: o, inner } => WordRule::Shifted {
                offset: o + offset,
                inner: inner.clone(),
            },
            other => WordRule::Shifted {
                offset,
                inner: Box::new(other.clone()),
            },
        };
        Word {
            alphabet: self.alphabet,
            rule,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_and_constant() {
        let w = Word::periodic(2, vec![1, 2]).unwrap();
        assert_eq!(w.prefix(5), vec![1, 2, 1, 2, 1]);
        assert_eq!(Word::constant(3, 3).unwrap().prefix(3), vec![3, 3, 3]);
    }

    #[test]
    fn seeded_words_are_reproducible_and_random_access() {
        let w = Word::seeded_iid(vec![0.2, 0.3, 0.5], 42).unwrap();
        let forward = w.prefix(500);
        let backward: Vec<usize> = (0..500).rev().map(|j| w.symbol_at(j)).collect();
        assert!(forward.iter().rev().eq(backward.iter()));
        assert_eq!(forward, Word::seeded_iid(vec![0.2, 0.3, 0.5], 42).unwrap().prefix(500));
        assert!(forward.iter().all(|s| (1..=3).contains(s)));
        let other = Word::seeded_iid(vec![0.2, 0.3, 0.5], 43).unwrap().prefix(500);
        assert_ne!(forward, other);
        // frequencies roughly follow the weights
        let threes = forward.iter().filter(|s| **s == 3).count();
        assert!((150..350).contains(&threes), "{threes}");
    }

    #[test]
    fn zero_weight_symbols_never_appear() {
        let w = Word::seeded_iid(vec![0.0, 1.0], 7).unwrap();
        assert!(w.prefix(1000).iter().all(|s| *s == 2));
    }

    #[test]
    fn explicit_prefix_then_tail() {
        let w = Word::new(
            2,
            WordRule::ExplicitPrefix {
                prefix: vec![2, 2, 1],
                tail: Box::new(WordRule::Periodic { pattern: vec![1, 2] }),
            },
        )
        .unwrap();
        assert_eq!(w.prefix(7), vec![2, 2, 1, 1, 2, 1, 2]);
    }

    #[test]
    fn shifted_words_compose() {
        let w = Word::periodic(3, vec![1, 2, 3]).unwrap();
        let s = w.shifted(1).shifted(3);
        for j in 0..20 {
            assert_eq!(s.symbol_at(j), w.symbol_at(j + 4));
        }
    }

    #[test]
    fn invalid_words() {
        assert!(Word::constant(2, 0).is_err());
        assert!(Word::constant(2, 3).is_err());
        assert!(Word::periodic(2, vec![]).is_err());
        assert!(Word::new(2, WordRule::SeededIid { weights: vec![1.0], seed: 0 }).is_err());
        assert!(Word::seeded_iid(vec![0.0, 0.0], 0).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let w = Word::periodic(2, vec![1, 2]).unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"alphabet":2,"rule":"periodic","pattern":[1,2]}"#);
        let back: Word = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<Word>(r#"{"alphabet":2,"rule":"constant","symbol":5}"#).is_err());
    }
}

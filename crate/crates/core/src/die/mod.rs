//! Bounded integer-valued random variables with exact rational probabilities.

mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use parse::parse_die;

/// A finite distribution on the integers.
///
/// Values are strictly increasing, every probability is positive and the
/// probabilities sum to exactly one. There are always at least two values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Die {
    outcomes: Vec<(i64, BigRational)>,
}

impl Die {
    /// Builds a die, merging repeated values.
    pub fn new(outcomes: impl IntoIterator<Item = (i64, BigRational)>) -> Result<Self> {
        let mut merged: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (x, p) in outcomes {
            if !p.is_positive() {
                return Err(Error::NonPositiveProbability(x));
            }
            *merged.entry(x).or_insert_with(BigRational::zero) += p;
        }
        let total: BigRational = merged.values().sum();
        if !total.is_one() {
            return Err(Error::NotNormalized(total.to_string()));
        }
        if merged.len() < 2 {
            return Err(Error::TooFewValues(merged.len()));
        }
        Ok(Die { outcomes: merged.into_iter().collect() })
    }

    /// Builds a die from integer weights over their sum.
    pub fn from_weights(weights: &[(i64, u64)]) -> Result<Self> {
        let total: u64 = weights.iter().map(|&(_, w)| w).sum();
        if total == 0 {
            return Err(Error::TooFewValues(0));
        }
        Self::new(
            weights
                .iter()
                .map(|&(x, w)| (x, BigRational::new(BigInt::from(w), BigInt::from(total)))),
        )
    }

    pub fn outcomes(&self) -> &[(i64, BigRational)] {
        &self.outcomes
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        self.outcomes.iter().map(|(x, _)| *x)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_value(&self) -> i64 {
        self.outcomes[0].0
    }

    pub fn max_value(&self) -> i64 {
        self.outcomes[self.outcomes.len() - 1].0
    }

    pub fn prob(&self, value: i64) -> Option<&BigRational> {
        self.outcomes
            .binary_search_by_key(&value, |(x, _)| *x)
            .ok()
            .map(|i| &self.outcomes[i].1)
    }

    pub fn mean(&self) -> BigRational {
        self.outcomes
            .iter()
            .map(|(x, p)| p * BigInt::from(*x))
            .sum()
    }

    /// Least common multiple of the probability denominators.
    pub fn common_denominator(&self) -> BigInt {
        self.outcomes
            .iter()
            .fold(BigInt::one(), |acc, (_, p)| acc.lcm(p.denom()))
    }

    /// Distribution of `-X`.
    pub fn negate(&self) -> Die {
        Die {
            outcomes: self
                .outcomes
                .iter()
                .rev()
                .map(|(x, p)| (-x, p.clone()))
                .collect(),
        }
    }

    /// Distribution of `A - B` for independent rolls (PGF `A(z) B(1/z)`).
    pub fn difference(&self, other: &Die) -> Result<Die> {
        let mut acc: BTreeMap<i64, BigRational> = BTreeMap::new();
        for (x, p) in &self.outcomes {
            for (y, q) in &other.outcomes {
                let v = x.checked_sub(*y).ok_or(Error::Overflow("forming a difference die"))?;
                *acc.entry(v).or_insert_with(BigRational::zero) += p * q;
            }
        }
        Die::new(acc)
    }

    /// Rescales to an integer die with mean exactly zero: `q X - p` where
    /// `p/q` is the mean in lowest terms.
    pub fn canonicalize(&self) -> Result<CanonicalDie> {
        let mean = self.mean();
        let scale = mean
            .denom()
            .to_i64()
            .ok_or(Error::Overflow("canonicalizing (mean denominator)"))?;
        let offset = mean
            .numer()
            .to_i64()
            .ok_or(Error::Overflow("canonicalizing (mean numerator)"))?;
        let outcomes = self
            .outcomes
            .iter()
            .map(|(x, p)| {
                x.checked_mul(scale)
                    .and_then(|v| v.checked_sub(offset))
                    .map(|v| (v, p.clone()))
                    .ok_or(Error::Overflow("canonicalizing values"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CanonicalDie {
            die: Die { outcomes },
            scale,
            offset,
        })
    }

    pub fn is_symmetric(&self) -> bool {
        let m = self.mean();
        let two = BigInt::from(2);
        self.outcomes.iter().all(|(x, p)| {
            // mirror of x about the mean: 2m - x must be a value with the same probability
            let mirror = &m * &two - BigRational::from_integer(BigInt::from(*x));
            mirror.is_integer()
                && mirror
                    .to_integer()
                    .to_i64()
                    .and_then(|v| self.prob(v))
                    .is_some_and(|q| q == p)
        })
    }
}

impl fmt::Display for Die {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (x, p)) in self.outcomes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}/{}", x, p.numer(), p.denom())?;
        }
        Ok(())
    }
}

impl FromStr for Die {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_die(s)
    }
}

impl Serialize for Die {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Die {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_die(&s).map_err(serde::de::Error::custom)
    }
}

/// A mean-zero integer die together with the affine map it came from.
///
/// `die = scale * original - offset`, and `offset / scale` is the original
/// mean in lowest terms. Tilts are invariant under this map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalDie {
    pub die: Die,
    pub scale: i64,
    pub offset: i64,
}

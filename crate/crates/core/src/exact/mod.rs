//! Exact distributions of n-fold sums and exact tilts.
//!
//! The PMF of `X[n]` is held as integer numerators over `D^n`, where `D` is the
//! common probability denominator, stored only on the lattice `n*min + b*k`.

mod limbs;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::die::Die;
use crate::error::{Error, Result};
use crate::lattice::span_shift;
use crate::scalar::ratio_to_f64;

/// Resource limits for exact convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Peak bytes held by the two PMF buffers.
    pub max_bytes: u64,
    /// Maximum number of convolution steps.
    pub max_steps: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_bytes: 2 << 30, max_steps: 1_000_000 }
    }
}

impl Budget {
    pub fn with_megabytes(mb: u64) -> Self {
        Budget { max_bytes: mb.saturating_mul(1 << 20), ..Budget::default() }
    }
}

/// Exact PMF of an n-fold sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumPmf {
    pub n: u64,
    pub denominator: BigUint,
    /// Value of the first lattice point, `n * min`.
    pub min_value: i64,
    /// Lattice step (the span of the die).
    pub step: u64,
    /// Numerators on `min_value + step*k`; zero where the sum cannot land.
    pub numerators: Vec<BigUint>,
}

impl SumPmf {
    /// Support points with their numerators, skipping zeros.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &BigUint)> + '_ {
        self.numerators
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_zero())
            .map(|(k, w)| (self.min_value + (self.step as i64) * k as i64, w))
    }

    pub fn prob(&self, value: i64) -> BigRational {
        let off = value - self.min_value;
        if off < 0 || off % self.step as i64 != 0 {
            return BigRational::zero();
        }
        match self.numerators.get((off / self.step as i64) as usize) {
            Some(w) => BigRational::new(BigInt::from(w.clone()), BigInt::from(self.denominator.clone())),
            None => BigRational::zero(),
        }
    }

    pub fn total(&self) -> BigUint {
        self.numerators.iter().sum()
    }
}

/// Exact tilt at one index.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltValue {
    pub n: u64,
    pub tilt: BigRational,
    /// `sqrt(2 pi n) * tilt`.
    pub normalized: f64,
    /// `Pr(X[n] < n mu)`.
    pub prob_below: BigRational,
}

impl TiltValue {
    pub fn sign(&self) -> i8 {
        if self.tilt.is_zero() {
            0
        } else if self.tilt > BigRational::zero() {
            1
        } else {
            -1
        }
    }
}

/// Incremental convolution state for one die.
pub struct Convolver {
    /// (lattice offset, integer weight p*D)
    weights: Vec<(usize, u64)>,
    denom: u64,
    bits: u64,
    reach: usize,
    min: i64,
    span: u64,
    /// n (p - q min) / (q b) locates the mean on the lattice
    mean_num_per_n: BigInt,
    mean_den: BigInt,
    n: u64,
    width: usize,
    len: usize,
    data: Vec<u64>,
    denom_pow: BigUint,
    budget: Budget,
}

impl Convolver {
    pub fn new(d: &Die, budget: Budget) -> Result<Self> {
        let denom_big = d.common_denominator();
        let denom = denom_big
            .to_u64()
            .ok_or_else(|| Error::DenominatorTooLarge(denom_big.to_string()))?;
        let (span, _) = span_shift(d);
        let min = d.min_value();
        let weights = d
            .outcomes()
            .iter()
            .map(|(x, p)| {
                let w = (p * BigRational::from_integer(denom_big.clone())).to_integer();
                let off = ((*x as i128 - min as i128) / span as i128) as usize;
                (off, w.to_u64().expect("numerator bounded by denominator"))
            })
            .collect::<Vec<_>>();
        let reach = weights.last().map(|w| w.0).unwrap_or(0);
        let mean = d.mean();
        let q = mean.denom().clone();
        let mean_num_per_n = mean.numer() - &q * BigInt::from(min);
        let mean_den = q * BigInt::from(span);
        Ok(Convolver {
            weights,
            denom,
            bits: 64 - denom.leading_zeros() as u64,
            reach,
            min,
            span,
            mean_num_per_n,
            mean_den,
            n: 0,
            width: 1,
            len: 1,
            data: vec![1],
            denom_pow: BigUint::one(),
            budget,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn span(&self) -> u64 {
        self.span
    }

    fn width_for(&self, n: u64) -> usize {
        (n * self.bits).div_ceil(64) as usize + 1
    }

    /// Bytes needed to advance from `n - 1` to `n`.
    fn projected_bytes(&self, n: u64) -> u64 {
        let new_len = self.len as u64 + self.reach as u64 * (n - self.n);
        let cur = (self.len * self.width) as u64;
        (new_len * self.width_for(n) as u64 + cur) * 8
    }

    /// Advances from `X[n]` to `X[n+1]`.
    pub fn step(&mut self) -> Result<()> {
        let n = self.n + 1;
        if n > self.budget.max_steps {
            return Err(Error::BudgetExceeded { n, what: format!("step limit {}", self.budget.max_steps) });
        }
        let bytes = self.projected_bytes(n);
        if bytes > self.budget.max_bytes {
            return Err(Error::BudgetExceeded {
                n,
                what: format!("{bytes} bytes needed, limit {}", self.budget.max_bytes),
            });
        }
        let width = self.width_for(n);
        let len = self.len + self.reach;
        let mut next = vec![0u64; len * width];
        let (old, old_w, old_len) = (&self.data, self.width, self.len);
        let weights = &self.weights;
        next.par_chunks_mut(width).enumerate().with_min_len(128).for_each(|(k, out)| {
            for &(off, w) in weights {
                if k >= off && k - off < old_len {
                    let src = &old[(k - off) * old_w..(k - off + 1) * old_w];
                    limbs::mul_add(out, src, w);
                }
            }
        });
        self.data = next;
        self.width = width;
        self.len = len;
        self.n = n;
        self.denom_pow *= self.denom;
        Ok(())
    }

    /// Advances to index `n` (which must not be behind the current one).
    pub fn advance_to(&mut self, n: u64) -> Result<()> {
        if n < self.n {
            return Err(Error::InvalidArgument(format!("cannot rewind from {} to {n}", self.n)));
        }
        while self.n < n {
            self.step()?;
        }
        Ok(())
    }

    /// Lattice index range strictly below the mean, and the index equal to it.
    fn mean_split(&self) -> (usize, Option<usize>) {
        let num = &self.mean_num_per_n * BigInt::from(self.n);
        let (quo, rem) = num.div_rem(&self.mean_den);
        // num >= 0 because the mean is at least the minimum
        let quo = quo.to_usize().expect("mean index fits");
        if rem.is_zero() {
            (quo, Some(quo))
        } else {
            (quo + 1, None)
        }
    }

    /// Exact tilt at the current index.
    pub fn tilt(&self) -> TiltValue {
        let (below_end, eq) = self.mean_split();
        let below_end = below_end.min(self.len);
        let above_start = match eq {
            Some(k) => k + 1,
            None => below_end,
        }
        .min(self.len);
        let below = limbs::sum_entries(&self.data, self.width, 0..below_end);
        let above = limbs::sum_entries(&self.data, self.width, above_start..self.len);
        let den = BigInt::from(self.denom_pow.clone());
        let tilt = BigRational::new(BigInt::from(above) - BigInt::from(below.clone()), den.clone());
        let normalized = (2.0 * std::f64::consts::PI * self.n as f64).sqrt() * ratio_to_f64(&tilt);
        TiltValue { n: self.n, tilt, normalized, prob_below: BigRational::new(BigInt::from(below), den) }
    }

    pub fn pmf(&self) -> SumPmf {
        SumPmf {
            n: self.n,
            denominator: self.denom_pow.clone(),
            min_value: self.min * self.n as i64,
            step: self.span,
            numerators: self.data.chunks_exact(self.width).map(limbs::to_biguint).collect(),
        }
    }
}

pub fn sum_pmf(d: &Die, n: u64) -> Result<SumPmf> {
    sum_pmf_with(d, n, Budget::default())
}

pub fn sum_pmf_with(d: &Die, n: u64, budget: Budget) -> Result<SumPmf> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut c = Convolver::new(d, budget)?;
    c.advance_to(n)?;
    Ok(c.pmf())
}

pub fn tilt(d: &Die, n: u64) -> Result<TiltValue> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut c = Convolver::new(d, Budget::default())?;
    c.advance_to(n)?;
    Ok(c.tilt())
}

pub fn prob_below_mean(d: &Die, n: u64) -> Result<BigRational> {
    Ok(tilt(d, n)?.prob_below)
}

/// Exact tilts for `n_from..=n_to`, optionally only `n = residue (mod modulus)`.
pub fn tilt_series(d: &Die, n_from: u64, n_to: u64, filter: Option<(u64, u64)>) -> Result<Vec<TiltValue>> {
    tilt_series_with(d, n_from, n_to, filter, Budget::default())
}

pub fn tilt_series_with(
    d: &Die,
    n_from: u64,
    n_to: u64,
    filter: Option<(u64, u64)>,
    budget: Budget,
) -> Result<Vec<TiltValue>> {
    if n_from == 0 || n_from > n_to {
        return Err(Error::InvalidArgument(format!("bad range {n_from}..={n_to}")));
    }
    if let Some((_, 0)) = filter {
        return Err(Error::InvalidArgument("modulus must be positive".into()));
    }
    let mut c = Convolver::new(d, budget)?;
    let mut out = Vec::new();
    for n in n_from..=n_to {
        if filter.is_some_and(|(r, m)| n % m != r % m) {
            continue;
        }
        c.advance_to(n)?;
        out.push(c.tilt());
    }
    Ok(out)
}

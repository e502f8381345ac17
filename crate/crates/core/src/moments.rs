//! Exact central and absolute central moments.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::die::Die;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exact moments of a die about its mean.
///
/// `central[k]` is E(X - mu)^k and `absolute[k]` is E|X - mu|^k for k = 0..=4,
/// so `central[1] == 0` and `absolute[2] == central[2]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSet {
    pub mean: BigRational,
    pub central: [BigRational; 5],
    pub absolute: [BigRational; 5],
}

impl MomentSet {
    pub fn of(d: &Die) -> Result<Self> {
        let mean = d.mean();
        let mut central: [BigRational; 5] = Default::default();
        let mut absolute: [BigRational; 5] = Default::default();
        for (x, p) in d.outcomes() {
            let dev = BigRational::from_integer(BigInt::from(*x)) - &mean;
            let adev = dev.abs();
            let mut pow = p.clone();
            let mut apow = p.clone();
            for k in 0..5 {
                central[k] += &pow;
                absolute[k] += &apow;
                pow *= &dev;
                apow *= &adev;
            }
        }
        if central[2].is_zero() {
            return Err(Error::Degenerate);
        }
        Ok(MomentSet { mean, central, absolute })
    }

    pub fn mu(&self, k: usize) -> &BigRational {
        &self.central[k]
    }

    pub fn abs_mu(&self, k: usize) -> &BigRational {
        &self.absolute[k]
    }

    pub fn mu2(&self) -> &BigRational {
        &self.central[2]
    }

    pub fn mu3(&self) -> &BigRational {
        &self.central[3]
    }

    pub fn mu4(&self) -> &BigRational {
        &self.central[4]
    }

    /// Standard deviation.
    pub fn sigma<S: Real>(&self) -> S {
        S::from_ratio(&self.central[2]).sqrt()
    }

    /// Normalised central moment mu_k / sigma^k.
    pub fn nu<S: Real>(&self, k: usize) -> S {
        // nu_k = mu_k / mu_2^(k/2), evaluated in f64 then narrowed
        let mu2 = crate::scalar::ratio_to_f64(&self.central[2]);
        let muk = crate::scalar::ratio_to_f64(&self.central[k]);
        S::lit(muk / mu2.powf(k as f64 / 2.0))
    }

    /// Moments of `X / b` for a positive integer `b` (span normalisation).
    pub fn scaled(&self, b: u64) -> MomentSet {
        let b = BigRational::from_integer(BigInt::from(b));
        let mut central = self.central.clone();
        let mut absolute = self.absolute.clone();
        let mut f = BigRational::from_integer(BigInt::from(1));
        for k in 0..5 {
            central[k] = &central[k] / &f;
            absolute[k] = &absolute[k] / &f;
            f *= &b;
        }
        MomentSet { mean: &self.mean / &b, central, absolute }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::die::parse_die;
    use proptest::prelude::*;

    fn int(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    /// Direct summation oracle over (value, weight) pairs.
    fn raw_central(outcomes: &[(i64, f64)], k: i32) -> f64 {
        let mean: f64 = outcomes.iter().map(|(x, p)| *x as f64 * p).sum();
        outcomes.iter().map(|(x, p)| p * (*x as f64 - mean).powi(k)).sum()
    }

    #[test]
    fn x_moments() {
        let m = MomentSet::of(&parse_die("(2z^-3+z+z^5)/4").unwrap()).unwrap();
        assert_eq!(m.mean, int(0));
        assert_eq!(m.mu2(), &int(11));
        assert_eq!(m.mu3(), &int(18));
        assert_eq!(m.mu4(), &int(197));
        let o = [(-3, 0.5), (1, 0.25), (5, 0.25)];
        assert_eq!(raw_central(&o, 2), 11.0);
        assert_eq!(raw_central(&o, 3), 18.0);
        assert_eq!(raw_central(&o, 4), 197.0);
        assert_eq!(m.abs_mu(2), m.mu2());
        assert!((m.sigma::<f64>() - 11f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn y_variance() {
        let m = MomentSet::of(&parse_die("(9z^-8+1+8z^9)/18").unwrap()).unwrap();
        assert_eq!(m.mu2(), &int(68));
        assert_eq!(m.mu3(), &int(-4 * 64 + 4 * 81));
    }

    #[test]
    fn symmetric_die_has_zero_skew() {
        let m = MomentSet::of(&parse_die("-1:1/2,1:1/2").unwrap()).unwrap();
        assert!(m.mu3().is_zero());
        assert_eq!(m.nu::<f64>(3), 0.0);
    }

    #[test]
    fn span_scaling() {
        let m = MomentSet::of(&parse_die("(2z^-3+z+z^5)/4").unwrap()).unwrap();
        let s = m.scaled(4);
        assert_eq!(s.mu2(), &BigRational::new(11.into(), 16.into()));
        assert_eq!(s.nu::<f64>(3), m.nu::<f64>(3));
    }

    prop_compose! {
        fn small_die()(raw in prop::collection::btree_map(-6i64..=6, 1u64..=7, 2..=5)) -> Die {
            let w: Vec<(i64, u64)> = raw.into_iter().collect();
            Die::from_weights(&w).unwrap()
        }
    }

    proptest! {
        #[test]
        fn negation_flips_odd_moments(d in small_die()) {
            let m = MomentSet::of(&d).unwrap();
            let n = MomentSet::of(&d.negate()).unwrap();
            prop_assert_eq!(m.mu2(), n.mu2());
            prop_assert_eq!(m.mu4(), n.mu4());
            prop_assert_eq!(m.mu3(), &-n.mu3());
            prop_assert_eq!(&m.absolute, &n.absolute);
        }

        #[test]
        fn absolute_third_moment_dominates(d in small_die()) {
            let m = MomentSet::of(&d).unwrap();
            prop_assert!(m.abs_mu(3) >= &m.mu3().abs());
            let mean = d.mean();
            let one_sided = d.outcomes().iter().all(|(x, _)| int(*x) >= mean)
                || d.outcomes().iter().all(|(x, _)| int(*x) <= mean);
            prop_assert_eq!(m.abs_mu(3) == &m.mu3().abs(), one_sided);
            prop_assert_eq!(m.abs_mu(2), m.mu2());
        }
    }
}

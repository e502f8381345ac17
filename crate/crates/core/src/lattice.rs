//! Span, shift and span certificates.
//!
//! A certificate is a set of integers `c_x` on values of the die with
//! `sum c_x = 0` and `sum c_x x = b`. Its l1 norm `C` and the smallest
//! probability `m` on its support give the quadratic CF bound
//! `|f(t)| <= 1 - 8 m t^2 / (pi^2 C^2)` for the span-normalised die on `[-pi, pi]`.

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::die::Die;
use crate::moments::MomentSet;
use crate::scalar::Real;

/// Largest |c_x| tried by the exhaustive search.
pub const MAX_SEARCH_COEFFICIENT: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateTerm {
    pub value: i64,
    pub coefficient: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeStructure {
    pub span: u64,
    pub shift: u64,
    pub certificate: Vec<CertificateTerm>,
    /// l1 norm of the certificate.
    pub norm: u64,
    /// Smallest probability over the certificate's support.
    pub min_prob: BigRational,
}

/// Span `b` (gcd of value differences) and shift `a = min value mod b`.
pub fn span_shift(d: &Die) -> (u64, u64) {
    let lo = d.min_value();
    let b = d
        .values()
        .fold(0u64, |g, x| g.gcd(&(x as i128 - lo as i128).unsigned_abs().try_into().unwrap_or(u64::MAX)));
    let a = (lo as i128).rem_euclid(b as i128) as u64;
    (b, a)
}

/// Finds a certificate of small l1 norm.
///
/// Exhaustive over supports of two or three values with |c_x| <= 64, minimising
/// `C` and then maximising `m`; falls back to the extended-gcd construction.
pub fn certificate(d: &Die) -> LatticeStructure {
    let (b, a) = span_shift(d);
    let lo = d.min_value();
    // positions on the normalised lattice: (x - lo) / b
    let pos: Vec<i64> = d.values().map(|x| ((x as i128 - lo as i128) / b as i128) as i64).collect();
    let probs: Vec<&BigRational> = d.outcomes().iter().map(|(_, p)| p).collect();

    type Best = Option<(u64, BigRational, Vec<(usize, i64)>)>;
    let mut best: Best = None;
    let consider = |best: &mut Best, terms: Vec<(usize, i64)>| {
        let norm: u64 = terms.iter().map(|(_, c)| c.unsigned_abs()).sum();
        let m = terms.iter().map(|(i, _)| probs[*i]).min().unwrap().clone();
        let better = match best.as_ref() {
            None => true,
            Some((bn, bm, _)) => norm < *bn || (norm == *bn && &m > bm),
        };
        if better {
            *best = Some((norm, m, terms));
        }
    };

    let k = pos.len();
    for i in 0..k {
        for j in i + 1..k {
            if pos[j] - pos[i] == 1 {
                consider(&mut best, vec![(i, -1), (j, 1)]);
            }
        }
    }
    if best.is_none() {
        for i in 0..k {
            for j in i + 1..k {
                for l in j + 1..k {
                    // c_i (p_i - p_l) + c_j (p_j - p_l) = 1, c_l = -c_i - c_j
                    let di = pos[i] - pos[l];
                    let dj = pos[j] - pos[l];
                    for ci in -MAX_SEARCH_COEFFICIENT..=MAX_SEARCH_COEFFICIENT {
                        if ci == 0 {
                            continue;
                        }
                        let rest = 1 - ci * di;
                        if rest % dj != 0 {
                            continue;
                        }
                        let cj = rest / dj;
                        let cl = -ci - cj;
                        if cj == 0 || cl == 0 || cj.abs() > MAX_SEARCH_COEFFICIENT || cl.abs() > MAX_SEARCH_COEFFICIENT {
                            continue;
                        }
                        consider(&mut best, vec![(i, ci), (j, cj), (l, cl)]);
                    }
                }
            }
        }
    }
    let (norm, min_prob, terms) = best.unwrap_or_else(|| {
        let terms = bezout_certificate(&pos);
        let norm = terms.iter().map(|(_, c)| c.unsigned_abs()).sum();
        let m = terms.iter().map(|(i, _)| probs[*i]).min().unwrap().clone();
        (norm, m, terms)
    });
    let values: Vec<i64> = d.values().collect();
    let mut certificate: Vec<CertificateTerm> = terms
        .into_iter()
        .map(|(i, c)| CertificateTerm { value: values[i], coefficient: c })
        .collect();
    certificate.sort_by_key(|t| t.value);
    LatticeStructure { span: b, shift: a, certificate, norm, min_prob }
}

/// Extended-gcd certificate over all positions (gcd of positions is 1, pos[0] = 0).
fn bezout_certificate(pos: &[i64]) -> Vec<(usize, i64)> {
    let mut coef = vec![0i128; pos.len()];
    let mut g: i128 = 0;
    for (i, &p) in pos.iter().enumerate().skip(1) {
        let e = (g).extended_gcd(&(p as i128));
        for c in coef.iter_mut().take(i) {
            *c *= e.x;
        }
        coef[i] = e.y;
        g = e.gcd;
        if g < 0 {
            g = -g;
            coef.iter_mut().for_each(|c| *c = -*c);
        }
    }
    debug_assert_eq!(g, 1);
    coef[0] = -coef[1..].iter().sum::<i128>();
    coef.iter()
        .enumerate()
        .filter(|(_, c)| **c != 0)
        .map(|(i, &c)| (i, i64::try_from(c).expect("certificate coefficient fits in i64")))
        .collect()
}

impl LatticeStructure {
    /// Exact validity: `sum c = 0` and `sum c (x - a) / b = 1`.
    pub fn is_valid_for(&self, d: &Die) -> bool {
        let sum: i128 = self.certificate.iter().map(|t| t.coefficient as i128).sum();
        let dot: i128 = self
            .certificate
            .iter()
            .map(|t| t.coefficient as i128 * t.value as i128)
            .sum();
        let support_ok = self.certificate.iter().all(|t| d.prob(t.value).is_some() && t.coefficient != 0);
        let norm: u64 = self.certificate.iter().map(|t| t.coefficient.unsigned_abs()).sum();
        sum == 0 && dot == self.span as i128 && support_ok && norm == self.norm && self.norm >= 2 && self.min_prob.is_positive()
    }
}

/// Quadratic CF bound coefficients from a certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfQuadratic<S> {
    /// `8 m / (pi^2 C^2)`: `|f_norm(t)| <= 1 - d_cert t^2` on `[-pi, pi]`.
    pub d_cert: S,
    /// `16 b^2 m / (pi C sigma)^2 = 2 d_cert b^2 / sigma^2`.
    pub r: S,
}

pub fn cf_quadratic_coefficient<S: Real>(ls: &LatticeStructure, ms: &MomentSet) -> CfQuadratic<S> {
    let m = S::from_ratio(&ls.min_prob);
    let c = S::from_u64(ls.norm).unwrap();
    let b = S::from_u64(ls.span).unwrap();
    let pi = S::PI();
    let d_cert = S::lit(8.0) * m / (pi * pi * c * c);
    let sigma = ms.sigma::<S>();
    let r = S::lit(16.0) * b * b * m / ((pi * c * sigma) * (pi * c * sigma));
    CfQuadratic { d_cert, r }
}

//! Explicit error bounds for the one-term lattice Edgeworth approximation of
//! the tilt and of `Pr(X[n] < 0)`, and the n1/n2 searches built on them.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::cf::TailEnvelope;
use crate::die::Die;
use crate::error::{Error, Result};
use crate::lattice::{cf_quadratic_coefficient, LatticeStructure};
use crate::moments::MomentSet;
use crate::scalar::Real;

/// Largest n examined by the n2 search unless overridden.
pub const DEFAULT_SEARCH_CAP: u64 = 1_000_000_000;

/// Constants shared by every residue class of a mean-zero die.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalConstants<S> {
    pub span: u64,
    pub shift: u64,
    pub sigma: S,
    pub mu2: S,
    pub nu3: S,
    pub nu4: S,
    pub p0: S,
    pub p1: S,
    pub q1: S,
    pub q2: S,
    pub q4: S,
    /// Certificate coefficient `8m/(pi^2 C^2)` of the span-normalised CF.
    pub d_cert: S,
    /// `16 b^2 m / (pi C sigma)^2`.
    pub r: S,
    pub n_min: u64,
    /// Which of `4 q1`, `1/q1`, `81 b^4/(q1 pi^4 mu2^2)` sets `n_min`.
    pub n_min_constraint: &'static str,
    #[serde(skip)]
    mu2_exact: BigRational,
    #[serde(skip)]
    mu3_exact: BigRational,
}

impl<S: Real> GlobalConstants<S> {
    /// Standard deviation of the span-normalised die.
    pub fn sigma_norm(&self) -> S {
        self.sigma / S::from_u64(self.span).unwrap()
    }

    /// `r` for a span-normalised quadratic coefficient `k`: `2 k b^2 / sigma^2`.
    pub fn r_from_normalized(&self, k: S) -> S {
        let b = S::from_u64(self.span).unwrap();
        S::lit(2.0) * k * b * b / (self.sigma * self.sigma)
    }
}

/// Per-residue quantities; `residue` is `n mod b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassConstants<S> {
    pub residue: u64,
    pub beta: S,
    pub q3: S,
    pub q5: S,
    pub l_tilt: S,
    pub l_minus: S,
    /// `l_tilt` is exactly zero (checked in rational arithmetic).
    pub l_is_zero: bool,
}

pub fn global_constants<S: Real>(d: &Die, ls: &LatticeStructure, ms: &MomentSet) -> Result<GlobalConstants<S>> {
    if !ms.mean.is_zero() {
        return Err(Error::InvalidArgument(format!("die {d} has mean {}, canonicalize it first", ms.mean)));
    }
    let b = S::from_u64(ls.span).unwrap();
    let sigma = ms.sigma::<S>();
    let mu2 = S::from_ratio(ms.mu2());
    let nu3 = ms.nu::<S>(3);
    let nu4 = ms.nu::<S>(4);
    let pi = S::PI();
    let p0 = S::E() - S::one();
    let p1 = S::lit(3.0) * (pi - S::lit(3.0)) / (pi * pi * pi);
    let q1 = S::lit(0.2) + nu4 / S::lit(24.0);
    let q2 = p0 * q1 / S::lit(2.0) + b * b * p1 / mu2;
    let q4 = nu3.abs() / S::lit(6.0);
    let cq = cf_quadratic_coefficient::<S>(ls, ms);
    let floors = [
        (S::lit(4.0) * q1, "4 q1"),
        (S::one() / q1, "1/q1"),
        (S::lit(81.0) * b.powi(4) / (q1 * pi.powi(4) * mu2 * mu2), "81 b^4/(q1 pi^4 mu2^2)"),
    ];
    let (floor, n_min_constraint) = floors
        .iter()
        .copied()
        .fold((S::zero(), floors[0].1), |acc, f| if f.0 > acc.0 { f } else { acc });
    Ok(GlobalConstants {
        span: ls.span,
        shift: ls.shift,
        sigma,
        mu2,
        nu3,
        nu4,
        p0,
        p1,
        q1,
        q2,
        q4,
        d_cert: cq.d_cert,
        r: cq.r,
        n_min: floor.ceil().to_u64().unwrap().max(1),
        n_min_constraint,
        mu2_exact: ms.mu2().clone(),
        mu3_exact: ms.mu3().clone(),
    })
}

pub fn class_constants<S: Real>(gc: &GlobalConstants<S>, c: u64) -> Result<ClassConstants<S>> {
    let b = gc.span;
    if c >= b {
        return Err(Error::InvalidArgument(format!("residue {c} not in [0, {b})")));
    }
    let ca = ((c as u128 * gc.shift as u128) % b as u128) as u64;
    let neg_ca = (b - ca) % b;
    let lattice = neg_ca as i64 - ca as i64;
    let half_b = S::from_u64(b).unwrap() / S::lit(2.0);
    let beta = (half_b - S::from_u64(ca).unwrap()) / gc.sigma;
    let q3 = beta.abs();
    let q4 = gc.q4;
    let q5 = q3.powi(3) / S::lit(6.0)
        + S::lit(1.5) * q3 * q3 * q4
        + S::lit(7.5) * q3 * q4 * q4
        + S::lit(17.5) * q4.powi(3);
    let l_tilt = S::from_i64(lattice).unwrap() / gc.sigma - gc.nu3 / S::lit(3.0);
    let l_minus = beta - gc.nu3 / S::lit(6.0);
    // lattice/sigma = mu3/(3 sigma^3)  <=>  3 lattice mu2 = mu3
    let l_is_zero = BigRational::from_integer(BigInt::from(3 * lattice)) * &gc.mu2_exact == gc.mu3_exact;
    Ok(ClassConstants { residue: c, beta, q3, q5, l_tilt, l_minus, l_is_zero })
}

/// Source of the characteristic-function tail term.
#[derive(Debug, Clone, Copy)]
pub enum TailSource<'a, S> {
    /// Quadratic bound `|f(t)| <= 1 - r sigma^2 t^2 / 2` in the unscaled variable.
    Quadratic(S),
    Envelope(&'a TailEnvelope<S>),
}

impl<S: Real> TailSource<'_, S> {
    /// Tilt-form tail term; the CDF form is half of it.
    pub fn tilt_term(&self, gc: &GlobalConstants<S>, n: u64) -> S {
        let nn = S::from_u64(n).unwrap();
        match *self {
            TailSource::Quadratic(r) => (-nn * r / S::lit(2.0)).exp() / (nn * r),
            TailSource::Envelope(env) => env.integral_bound(n, S::one() / gc.sigma_norm()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    Cert,
    Optimal,
    Envelope,
}

impl TailMode {
    pub const ALL: [TailMode; 3] = [TailMode::Cert, TailMode::Optimal, TailMode::Envelope];
}

impl fmt::Display for TailMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailMode::Cert => "cert",
            TailMode::Optimal => "optimal",
            TailMode::Envelope => "envelope",
        })
    }
}

impl FromStr for TailMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cert" => Ok(TailMode::Cert),
            "optimal" => Ok(TailMode::Optimal),
            "envelope" => Ok(TailMode::Envelope),
            _ => Err(Error::InvalidArgument(format!("unknown tail mode '{s}'"))),
        }
    }
}

/// The seven terms of the tilt error bound at one n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerms<S> {
    pub n: u64,
    /// `2 q2 / n`
    pub principal: S,
    /// CF tail term (`e^{-nr/2}/(nr)` or its envelope replacement)
    pub tail: S,
    /// `2 q5 / (sqrt(2 pi) n^{3/2})`
    pub skew: S,
    /// the four `e^{-eta}` terms
    pub rest: [S; 4],
}

impl<S: Real> BoundTerms<S> {
    pub fn rest_sum(&self) -> S {
        self.rest.iter().copied().fold(S::zero(), |a, b| a + b)
    }

    /// Sum of all terms with upward slack.
    pub fn total(&self) -> S {
        (self.principal + self.tail + self.skew + self.rest_sum()) * (S::one() + S::slack())
    }

    /// Every term multiplied by `sqrt(2 pi n)`.
    pub fn scaled(&self) -> BoundTerms<S> {
        let k = (S::lit(2.0) * S::PI() * S::from_u64(self.n).unwrap()).sqrt();
        BoundTerms {
            n: self.n,
            principal: self.principal * k,
            tail: self.tail * k,
            skew: self.skew * k,
            rest: self.rest.map(|r| r * k),
        }
    }
}

fn check_n<S: Real>(gc: &GlobalConstants<S>, cc: &ClassConstants<S>, n: u64) -> Result<()> {
    if n % gc.span != cc.residue {
        return Err(Error::WrongClass { n, residue: cc.residue, span: gc.span });
    }
    if n < gc.n_min {
        return Err(Error::BelowValidityFloor { n, floor: gc.n_min, constraint: gc.n_min_constraint });
    }
    Ok(())
}

/// Term-by-term tilt error bound at `n` with `s = (q1 n)^{-1/4}` and `eta = n s^2 / 2`.
pub fn bound_terms<S: Real>(
    gc: &GlobalConstants<S>,
    cc: &ClassConstants<S>,
    n: u64,
    tail: &TailSource<'_, S>,
) -> Result<BoundTerms<S>> {
    check_n(gc, cc, n)?;
    let nn = S::from_u64(n).unwrap();
    let pi = S::PI();
    let two = S::lit(2.0);
    let eta = (nn / gc.q1).sqrt() / two;
    let root4 = (gc.q1 * nn).powf(S::lit(0.25));
    let damp = (-eta).exp();
    Ok(BoundTerms {
        n,
        principal: two * gc.q2 / nn,
        tail: tail.tilt_term(gc, n),
        skew: two * cc.q5 / ((two * pi).sqrt() * nn.powf(S::lit(1.5))),
        rest: [
            damp * (S::one() + gc.p0) / eta,
            damp * S::lit(4.0) * gc.p0 * gc.q1 / nn,
            damp * (cc.q3 + gc.q4) / (eta * pi * root4),
            damp * two * gc.q4 / (pi * root4),
        ],
    })
}

/// Bound on `|T_n - L/sqrt(2 pi n)|` using the certificate tail.
pub fn error_bound_tilt<S: Real>(gc: &GlobalConstants<S>, cc: &ClassConstants<S>, n: u64) -> Result<S> {
    error_bound_tilt_with(gc, cc, n, &TailSource::Quadratic(gc.r))
}

pub fn error_bound_tilt_with<S: Real>(
    gc: &GlobalConstants<S>,
    cc: &ClassConstants<S>,
    n: u64,
    tail: &TailSource<'_, S>,
) -> Result<S> {
    Ok(bound_terms(gc, cc, n, tail)?.total())
}

/// Largest admissible split point `min(1, pi sigma_norm / 3, (q1 n)^{-1/4})`.
pub fn s_max<S: Real>(gc: &GlobalConstants<S>, n: u64) -> S {
    let nn = S::from_u64(n).unwrap();
    S::one()
        .min(S::PI() * gc.sigma_norm() / S::lit(3.0))
        .min((gc.q1 * nn).powf(S::lit(-0.25)))
}

/// Bound on `|Pr(X[n] < 0) - (1/2 - L_minus/sqrt(2 pi n))|` with certificate tail.
pub fn error_bound_cdf<S: Real>(gc: &GlobalConstants<S>, cc: &ClassConstants<S>, n: u64, s: S) -> Result<S> {
    error_bound_cdf_with(gc, cc, n, s, &TailSource::Quadratic(gc.r))
}

pub fn error_bound_cdf_with<S: Real>(
    gc: &GlobalConstants<S>,
    cc: &ClassConstants<S>,
    n: u64,
    s: S,
    tail: &TailSource<'_, S>,
) -> Result<S> {
    if n == 0 || n % gc.span != cc.residue {
        return Err(Error::WrongClass { n, residue: cc.residue, span: gc.span });
    }
    let max = s_max(gc, n);
    if !(s > S::zero() && s <= max * (S::one() + S::slack())) {
        return Err(Error::SplitPointTooLarge { s: s.as_f64(), max: max.as_f64() });
    }
    let nn = S::from_u64(n).unwrap();
    let pi = S::PI();
    let two = S::lit(2.0);
    let pq = gc.p0 * gc.q1;
    let ns2 = nn * s * s;
    let inner = pq * s * s + S::one() / ns2 + two * pq / nn + (cc.q3 + gc.q4) / (pi * nn * s) + gc.q4 * s / pi;
    let total = gc.q2 / nn
        + tail.tilt_term(gc, n) / two
        + cc.q5 / ((two * pi).sqrt() * nn.powf(S::lit(1.5)))
        + (-ns2 / two).exp() * inner;
    Ok(total * (S::one() + S::slack()))
}

/// `ceil(8 pi q2^2 / L^2)`: below this the principal term alone exceeds `|L|`.
pub fn n1<S: Real>(gc: &GlobalConstants<S>, cc: &ClassConstants<S>) -> Result<u64> {
    if cc.l_is_zero {
        return Err(Error::SymmetricUndetermined(cc.residue));
    }
    let v = S::lit(8.0) * S::PI() * gc.q2 * gc.q2 / (cc.l_tilt * cc.l_tilt);
    Ok(v.ceil().to_u64().unwrap_or(u64::MAX))
}

fn first_in_class(c: u64, b: u64, at_least: u64) -> u64 {
    let lo = at_least.max(1);
    let r = lo % b;
    let n = if r <= c { lo + (c - r) } else { lo + (b - r) + c };
    if n == 0 {
        b
    } else {
        n
    }
}

/// Index from which every scaled term of the bound is nonincreasing in `n`.
///
/// `sqrt(n) e^{-eta}` needs `n >= 4 q1`; `sqrt(n) h^n` needs `n >= 1/(2|ln h|)`;
/// all other scaled terms decrease for every n.
pub fn domination_start<S: Real>(gc: &GlobalConstants<S>, tail: &TailSource<'_, S>) -> Result<u64> {
    let mut start = (S::lit(4.0) * gc.q1).ceil().to_u64().unwrap().max(gc.n_min);
    if let TailSource::Envelope(env) = tail {
        if !env.decays() {
            return Err(Error::InvalidArgument("envelope reaches 1 away from the origin".into()));
        }
        for h in env.decay_heights() {
            let t = (S::one() / (S::lit(2.0) * h.ln().abs())).ceil();
            start = start.max(t.to_u64().unwrap_or(u64::MAX));
        }
    }
    Ok(start)
}

/// Smallest class index `n >= n_min` such that `sqrt(2 pi m) EB(m) < |L|` for all
/// class indices `m >= n`.
pub fn n2<S: Real>(gc: &GlobalConstants<S>, cc: &ClassConstants<S>, tail: &TailSource<'_, S>) -> Result<u64> {
    n2_with_cap(gc, cc, tail, DEFAULT_SEARCH_CAP)
}

pub fn n2_with_cap<S: Real>(
    gc: &GlobalConstants<S>,
    cc: &ClassConstants<S>,
    tail: &TailSource<'_, S>,
    cap: u64,
) -> Result<u64> {
    if cc.l_is_zero {
        return Err(Error::SymmetricUndetermined(cc.residue));
    }
    let b = gc.span;
    let c = cc.residue;
    let target = cc.l_tilt.abs();
    let good = |n: u64| -> Result<bool> { Ok(bound_terms(gc, cc, n, tail)?.scaled().total() < target) };

    let start = first_in_class(c, b, domination_start(gc, tail)?);
    if start > cap {
        return Err(Error::SearchCapExceeded(cap));
    }
    if good(start)? {
        let floor = first_in_class(c, b, gc.n_min);
        let mut n = start;
        while n >= floor + b && good(n - b)? {
            n -= b;
        }
        return Ok(n);
    }
    // bracket in units of b, then bisect on the monotone region
    let mut lo = start;
    let mut step = b;
    let hi = loop {
        let cand = lo.checked_add(step).filter(|&v| v <= cap).ok_or(Error::SearchCapExceeded(cap))?;
        if good(cand)? {
            break cand;
        }
        lo = cand;
        step = step.saturating_mul(2);
    };
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > b {
        let mid = lo + ((hi - lo) / b / 2) * b;
        if good(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::die::parse_die;
    use crate::lattice::certificate;
    use std::f64::consts::PI;

    fn setup(s: &str) -> (GlobalConstants<f64>, Vec<ClassConstants<f64>>) {
        let d = parse_die(s).unwrap().canonicalize().unwrap().die;
        let ls = certificate(&d);
        let ms = MomentSet::of(&d).unwrap();
        let gc = global_constants::<f64>(&d, &ls, &ms).unwrap();
        let cc = (0..gc.span).map(|c| class_constants(&gc, c).unwrap()).collect();
        (gc, cc)
    }

    #[test]
    fn named_constants() {
        let (gc, _) = setup("(2z^-3+z+z^5)/4");
        assert!((gc.p0 - 1.71828).abs() < 1e-5);
        assert!((gc.p1 - 0.0136997).abs() < 1e-7);
        // direct formula oracle
        let nu4 = 197.0 / 121.0;
        assert!((gc.q1 - (0.2 + nu4 / 24.0)).abs() < 1e-15);
        let q2 = (std::f64::consts::E - 1.0) * gc.q1 / 2.0 + 16.0 * 3.0 * (PI - 3.0) / PI.powi(3) / 11.0;
        assert!((gc.q2 - q2).abs() < 1e-15);
        assert!((gc.q1 - 0.267837).abs() < 1e-6 && (gc.q2 - 0.250037).abs() < 1e-6);
    }

    #[test]
    fn x_leading_constants_and_n1() {
        let (gc, cc) = setup("(2z^-3+z+z^5)/4");
        let l: Vec<f64> = cc.iter().map(|c| c.l_tilt).collect();
        for (got, want) in l.iter().zip([-0.16446, 0.43856, -0.16446, -0.76748]) {
            assert!((got - want).abs() < 1e-4, "{got} {want}");
        }
        let n1s: Vec<u64> = cc.iter().map(|c| n1(&gc, c).unwrap()).collect();
        assert_eq!(n1s, vec![59, 9, 59, 3]);
        assert!((cc[1].l_tilt - (2.0 / 11f64.sqrt() - gc.nu3 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn x_n2_cert() {
        let (gc, cc) = setup("(2z^-3+z+z^5)/4");
        let tail = TailSource::Quadratic(gc.r);
        let n2s: Vec<u64> = cc.iter().map(|c| n2(&gc, c, &tail).unwrap()).collect();
        assert_eq!(n2s, vec![72, 37, 70, 27]);
        for (c, &n) in cc.iter().zip(&n2s) {
            assert_eq!(n % 4, c.residue);
            let before = n - 4;
            if before >= gc.n_min {
                assert!(bound_terms(&gc, c, before, &tail).unwrap().scaled().total() >= c.l_tilt.abs());
            }
        }
    }

    #[test]
    fn y_error_table_rows() {
        let (gc, cc) = setup("(9z^-8+1+8z^9)/18");
        assert!((cc[0].l_tilt + 0.040422).abs() < 1e-6);
        let tail = TailSource::Quadratic(gc.r);
        let total = |n| bound_terms(&gc, &cc[0], n, &tail).unwrap().scaled().total();
        assert!((total(681) - 1128.1634).abs() < 1e-3);
        assert!(total(182023) >= cc[0].l_tilt.abs());
        assert!(total(182024) < cc[0].l_tilt.abs());
        assert_eq!(n1(&gc, &cc[0]).unwrap(), 682);
        assert_eq!(n2(&gc, &cc[0], &tail).unwrap(), 182024);
    }

    #[test]
    fn floor_and_class_errors() {
        let (gc, cc) = setup("(2z^-3+z+z^5)/4");
        assert!(matches!(error_bound_tilt(&gc, &cc[1], 2), Err(Error::WrongClass { .. })));
        assert!(gc.n_min > 1);
        assert!(matches!(error_bound_tilt(&gc, &cc[1], 1), Err(Error::BelowValidityFloor { .. })));
        assert!(matches!(error_bound_cdf(&gc, &cc[1], 101, 2.0), Err(Error::SplitPointTooLarge { .. })));
    }

    #[test]
    fn cdf_bound_halves_tilt_bound_at_s_max() {
        let (gc, cc) = setup("(9z^-8+1+8z^9)/18");
        for n in [500u64, 5000, 50_000] {
            let s = s_max(&gc, n);
            assert_eq!(s, (gc.q1 * n as f64).powf(-0.25));
            let cdf = error_bound_cdf(&gc, &cc[0], n, s).unwrap();
            let tilt = error_bound_tilt(&gc, &cc[0], n).unwrap();
            assert!((2.0 * cdf - tilt).abs() <= 1e-12 * tilt);
        }
    }

    #[test]
    fn cdf_bound_grows_as_s_shrinks() {
        let (gc, cc) = setup("(9z^-8+1+8z^9)/18");
        let n = 800;
        let mut prev = 0.0;
        for k in (1..=10).rev() {
            let s = s_max(&gc, n) * k as f64 / 10.0;
            let v = error_bound_cdf(&gc, &cc[0], n, s).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn symmetric_die_is_undetermined() {
        let (gc, cc) = setup("0:1/2,1:1/2");
        assert_eq!(gc.span, 2);
        for c in &cc {
            assert!(c.l_is_zero);
            assert!(matches!(n1(&gc, c), Err(Error::SymmetricUndetermined(_))));
        }
    }

    #[test]
    fn negation_mirrors_classes() {
        let (gc, cc) = setup("(2z^-3+z+z^5)/4");
        let (gn, cn) = setup("(2z^3+z^-1+z^-5)/4");
        // T_n(-X) = -T_n(X) at the same index, hence the same residue
        for c in 0..gc.span {
            let m = &cn[c as usize];
            assert!((m.q3 - cc[c as usize].q3).abs() < 1e-15);
            assert!((m.q5 - cc[c as usize].q5).abs() < 1e-15);
            assert!((m.l_tilt + cc[c as usize].l_tilt).abs() < 1e-12);
        }
        assert_eq!(gn.n_min, gc.n_min);
    }

    #[test]
    fn f32_constants_track_f64() {
        let d = parse_die("(9z^-8+1+8z^9)/18").unwrap();
        let ls = certificate(&d);
        let ms = MomentSet::of(&d).unwrap();
        let g32 = global_constants::<f32>(&d, &ls, &ms).unwrap();
        let g64 = global_constants::<f64>(&d, &ls, &ms).unwrap();
        assert!((g32.q2 as f64 - g64.q2).abs() < 1e-6);
        let c32 = class_constants(&g32, 0).unwrap();
        assert!((c32.l_tilt as f64 + 0.040422).abs() < 1e-5);
    }
}

//! Characteristic functions of span-normalised dice: evaluation, peak
//! profiles, certified minima of `(1 - |f|)/t^2` and tail envelopes.
//!
//! All certified quantities rely on the Lipschitz bound
//! `| |f(t)| - |f(u)| | <= M |t - u|` with `M = E|X - mu| / b`.

mod envelope;
mod quad;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use serde::Serialize;

use crate::die::Die;
use crate::lattice::span_shift;
use crate::moments::MomentSet;
use crate::scalar::Real;

pub use envelope::{build_envelope, tail_integral_bound, EnvelopePiece, TailEnvelope};
pub use quad::{gauss_kronrod, prob_below_mean_quadrature};

/// `sum p_x exp(i t x)` over the raw values of `d`.
pub fn cf_eval<S: Real>(d: &Die, t: S) -> Complex<S> {
    let mut re = S::zero();
    let mut im = S::zero();
    for (x, p) in d.outcomes() {
        let p = S::from_ratio(p);
        let (s, c) = (t * S::from_i64(*x).unwrap()).sin_cos();
        re = re + p * c;
        im = im + p * s;
    }
    Complex::new(re, im)
}

/// CF of `(X - mu) / b`, which has period `2 pi` in modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCf<S> {
    /// (centred position, probability)
    terms: Vec<(S, S)>,
    /// Upper bound on `E|X - mu| / b`.
    pub lipschitz: S,
    /// Standard deviation of the normalised die.
    pub sigma: S,
    pub mu2: S,
    pub span: u64,
}

impl<S: Real> NormalizedCf<S> {
    pub fn new(d: &Die) -> Self {
        let (span, _) = span_shift(d);
        let ms = MomentSet::of(d).expect("a die has at least two values").scaled(span);
        let mean = d.mean();
        let b = BigRational::from_integer(BigInt::from(span));
        let terms = d
            .outcomes()
            .iter()
            .map(|(x, p)| {
                let pos = (BigRational::from_integer(BigInt::from(*x)) - &mean) / &b;
                (S::from_ratio(&pos), S::from_ratio(p))
            })
            .collect();
        let m = S::from_ratio(ms.abs_mu(1));
        NormalizedCf {
            terms,
            lipschitz: m * (S::one() + S::slack()) + S::slack(),
            sigma: ms.sigma(),
            mu2: S::from_ratio(ms.mu2()),
            span,
        }
    }

    pub fn eval(&self, t: S) -> Complex<S> {
        let mut re = S::zero();
        let mut im = S::zero();
        for &(x, p) in &self.terms {
            let (s, c) = (t * x).sin_cos();
            re = re + p * c;
            im = im + p * s;
        }
        Complex::new(re, im)
    }

    pub fn abs(&self, t: S) -> S {
        self.eval(t).norm()
    }

    /// Upper bound on `|f|` over `[t - w/2, t + w/2]`, from a sample at `t`.
    pub fn cell_bound(&self, t: S, w: S) -> S {
        self.abs(t) + self.lipschitz * w / S::lit(2.0) + S::slack()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak<S> {
    pub t: S,
    pub height: S,
}

/// Local maxima of `|f|` on `[0, pi]` for the span-normalised die.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfProfile<S> {
    pub lipschitz: S,
    pub sigma: S,
    pub span: u64,
    /// Ordered by `t`; the first entry is always the origin `(0, 1)`.
    pub peaks: Vec<Peak<S>>,
    #[serde(skip)]
    pub cf: NormalizedCf<S>,
}

impl<S: Real> CfProfile<S> {
    /// Peaks other than the origin.
    pub fn interior(&self) -> &[Peak<S>] {
        &self.peaks[1..]
    }
}

fn golden_max<S: Real>(f: impl Fn(S) -> S, mut a: S, mut b: S, tol: S) -> S {
    let g = S::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (a + b) / S::lit(2.0)
}

pub fn peak_profile<S: Real>(d: &Die) -> CfProfile<S> {
    let cf = NormalizedCf::<S>::new(d);
    profile_of(&cf)
}

pub fn profile_of<S: Real>(cf: &NormalizedCf<S>) -> CfProfile<S> {
    let pi = S::PI();
    let step_max = S::lit(1e-3).min(S::one() / (S::lit(4.0) * cf.lipschitz));
    let cells = (pi / step_max).ceil().to_usize().unwrap().max(16);
    let h = pi / S::from_usize(cells).unwrap();
    let vals: Vec<S> = (0..=cells).map(|i| cf.abs(S::from_usize(i).unwrap() * h)).collect();
    let tol = S::lit(1e-9).max(S::epsilon() * S::lit(16.0));
    let mut peaks = vec![Peak { t: S::zero(), height: S::one() }];
    for i in 1..=cells {
        let left = vals[i - 1];
        let is_peak = if i == cells { vals[i] > left } else { vals[i] > left && vals[i] >= vals[i + 1] };
        if !is_peak {
            continue;
        }
        let lo = S::from_usize(i - 1).unwrap() * h;
        let hi = (S::from_usize(i + 1).unwrap() * h).min(pi);
        let t = golden_max(|t| cf.abs(t), lo, hi, tol);
        let (t, height) = if i == cells && cf.abs(pi) >= cf.abs(t) { (pi, cf.abs(pi)) } else { (t, cf.abs(t)) };
        peaks.push(Peak { t, height });
    }
    CfProfile { lipschitz: cf.lipschitz, sigma: cf.sigma, span: cf.span, peaks, cf: cf.clone() }
}

#[derive(PartialEq)]
struct Cell {
    lb: f64,
    lo: f64,
    hi: f64,
}

impl Eq for Cell {}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on the lower bound
        other.lb.total_cmp(&self.lb)
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Certified lower bound on `min (1 - |f(t)|)/t^2` over `(0, pi]` for the
/// span-normalised die, within about `1e-7` of the true minimum.
pub fn r_optimal<S: Real>(d: &Die) -> S {
    let cf = NormalizedCf::<f64>::new(d);
    let (span, _) = span_shift(d);
    let ms = MomentSet::of(d).expect("a die has at least two values").scaled(span);
    S::lit(r_optimal_of(&cf, &ms, 1e-7))
}

fn r_optimal_of(cf: &NormalizedCf<f64>, ms: &MomentSet, tol: f64) -> f64 {
    let m = cf.lipschitz;
    let slack = <f64 as Real>::slack();
    let mu2 = cf.mu2;
    let mu4 = crate::scalar::ratio_to_f64(ms.mu4()) * (1.0 + 1e-12);
    let amu3 = crate::scalar::ratio_to_f64(ms.abs_mu(3)) * (1.0 + 1e-12);
    // (1 - |f|)/t^2 >= mu2/2 - mu4 t^2/24 - amu3^2 t^4 / (72 (1 - mu2 t^2/2)), decreasing in t
    let small_t = |t: f64| {
        let u = 1.0 - mu2 * t * t / 2.0;
        if u <= 0.5 {
            return f64::NEG_INFINITY;
        }
        mu2 / 2.0 - mu4 * t * t / 24.0 - amu3 * amu3 * t.powi(4) / (72.0 * u) - slack
    };
    let mut best_upper = f64::INFINITY;
    let bound = |lo: f64, hi: f64, best_upper: &mut f64| -> f64 {
        let tc = (lo + hi) / 2.0;
        let a = cf.abs(tc);
        *best_upper = best_upper.min((1.0 - a) / (tc * tc));
        let num = 1.0 - a - m * (hi - lo) / 2.0 - slack;
        let lip = if num >= 0.0 {
            num / (hi * hi)
        } else if lo > 0.0 {
            num / (lo * lo)
        } else {
            f64::NEG_INFINITY
        };
        if lo == 0.0 {
            lip.max(small_t(hi))
        } else {
            lip
        }
    };
    let pi = std::f64::consts::PI;
    let start = 1024;
    let mut heap = BinaryHeap::new();
    for i in 0..start {
        let lo = pi * i as f64 / start as f64;
        let hi = if i + 1 == start { pi } else { pi * (i + 1) as f64 / start as f64 };
        let lb = bound(lo, hi, &mut best_upper);
        heap.push(Cell { lb, lo, hi });
    }
    let mut pops = 0u64;
    while let Some(cell) = heap.pop() {
        pops += 1;
        if best_upper - cell.lb <= tol || pops > 4_000_000 || cell.hi - cell.lo < 1e-13 {
            return cell.lb;
        }
        let mid = (cell.lo + cell.hi) / 2.0;
        for (lo, hi) in [(cell.lo, mid), (mid, cell.hi)] {
            let lb = bound(lo, hi, &mut best_upper);
            heap.push(Cell { lb, lo, hi });
        }
    }
    unreachable!("heap never empties")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::die::parse_die;
    use crate::lattice::{certificate, cf_quadratic_coefficient, CfQuadratic};
    use std::f64::consts::PI;

    fn y() -> Die {
        parse_die("(9z^-8+1+8z^9)/18").unwrap()
    }

    fn coin() -> Die {
        parse_die("0:1/2,1:1/2").unwrap()
    }

    #[test]
    fn eval_basics() {
        let z: Complex<f64> = cf_eval(&y(), 0.0);
        assert!((z.re - 1.0).abs() < 1e-15 && z.im.abs() < 1e-15);
        let cf = NormalizedCf::<f64>::new(&y());
        assert!((cf.abs(4.0 * PI / 17.0) - 0.99645).abs() < 5e-6);
        assert!(NormalizedCf::<f64>::new(&coin()).abs(PI) < 1e-15);
        // raw and normalised moduli agree for span 1
        let t = 0.77;
        assert!((cf_eval::<f64>(&y(), t).norm() - cf.abs(t)).abs() < 1e-14);
    }

    #[test]
    fn periodicity() {
        let cf = NormalizedCf::<f64>::new(&parse_die("(2z^-3+z+z^5)/4").unwrap());
        for i in 0..50 {
            let t = -3.0 + 0.13 * i as f64;
            assert!((cf.abs(t) - cf.abs(t + 2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn y_peaks() {
        let p = peak_profile::<f64>(&y());
        let expect = [1.0, 0.88989, 0.99645, 0.89769, 0.98621, 0.91204, 0.97048, 0.93078, 0.95118];
        assert_eq!(p.peaks.len(), 9);
        for (pk, e) in p.peaks.iter().zip(expect) {
            assert!((pk.height - e).abs() < 1e-4, "{} vs {e}", pk.height);
        }
        let top = p.interior().iter().max_by(|a, b| a.height.total_cmp(&b.height)).unwrap();
        assert!((top.t - 4.0 * PI / 17.0).abs() < 1e-7);
    }

    #[test]
    fn coin_has_no_interior_peaks() {
        let p = peak_profile::<f64>(&coin());
        assert_eq!(p.peaks.len(), 1);
    }

    #[test]
    fn r_optimal_values() {
        let r: f64 = r_optimal(&y());
        assert!((r - 0.0055834).abs() < 1e-4, "{r}");
        let cf = NormalizedCf::<f64>::new(&y());
        let sampled = (1..=200_000)
            .map(|i| i as f64 * PI / 200_000.0)
            .map(|t| (1.0 - cf.abs(t)) / (t * t))
            .fold(f64::INFINITY, f64::min);
        assert!(r <= sampled && sampled - r < 1e-5, "{r} {sampled}");

        let r: f64 = r_optimal(&coin());
        assert!(r <= 1.0 / (PI * PI) && 1.0 / (PI * PI) - r < 1e-6, "{r}");
    }

    #[test]
    fn r_optimal_dominates_certificate() {
        for s in ["(9z^-8+1+8z^9)/18", "(2z^-3+z+z^5)/4", "0:1/2,1:1/2", "-7:1/9,-3:2/9,-2:1/9,1:2/9,2:1/9,5:1/9,6:1/9"] {
            let d = parse_die(s).unwrap();
            let c = d.canonicalize().unwrap().die;
            let cq: CfQuadratic<f64> = cf_quadratic_coefficient(&certificate(&c), &MomentSet::of(&c).unwrap());
            // X attains d_cert at t = pi, so allow the search tolerance
            assert!(r_optimal::<f64>(&c) >= cq.d_cert - 1e-7, "{s}");
        }
    }

    #[test]
    fn f32_profile_is_close() {
        let p = peak_profile::<f32>(&y());
        assert_eq!(p.peaks.len(), 9);
        assert!((p.peaks[2].height - 0.99645).abs() < 1e-4);
    }
}

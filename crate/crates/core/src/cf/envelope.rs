//! Certified piecewise upper envelopes of `|f|` on `[s_low, pi]`.

use rayon::prelude::*;
use serde::Serialize;

use super::{CfProfile, NormalizedCf};
use crate::scalar::Real;

/// Grid sizes beyond this coarsen `delta` instead.
const MAX_CELLS: usize = 60_000_000;
const MAX_HALVINGS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvelopePiece<S> {
    Constant { a: S, b: S, h: S },
    /// `h0 (1 - kappa (t - t0)^2)` on `[a, b]`.
    Parabola { a: S, b: S, h0: S, t0: S, kappa: S },
}

impl<S: Real> EnvelopePiece<S> {
    pub fn bounds(&self) -> (S, S) {
        match *self {
            EnvelopePiece::Constant { a, b, .. } | EnvelopePiece::Parabola { a, b, .. } => (a, b),
        }
    }

    pub fn value(&self, t: S) -> S {
        match *self {
            EnvelopePiece::Constant { h, .. } => h,
            EnvelopePiece::Parabola { h0, t0, kappa, .. } => h0 * (S::one() - kappa * (t - t0) * (t - t0)),
        }
    }

    /// Minimum over `[lo, hi]` (both pieces are concave).
    pub fn min_on(&self, lo: S, hi: S) -> S {
        self.value(lo).min(self.value(hi))
    }

    /// Height that governs decay in `n`.
    pub fn decay_height(&self) -> S {
        match *self {
            EnvelopePiece::Constant { h, .. } => h,
            EnvelopePiece::Parabola { h0, .. } => h0,
        }
    }

    fn is_origin_cap(&self) -> bool {
        matches!(*self, EnvelopePiece::Parabola { t0, .. } if t0 == S::zero())
    }

    /// Upper bound on the integral of `piece(t)^n / t` over `[max(a, from), b]`.
    pub fn integral_bound(&self, n: u64, from: S) -> S {
        let (a, b) = self.bounds();
        let a = a.max(from);
        if a >= b {
            return S::zero();
        }
        let nn = S::from_u64(n).unwrap();
        let v = match *self {
            EnvelopePiece::Constant { h, .. } => h.powf(nn) * (b / a).ln(),
            EnvelopePiece::Parabola { h0, t0, kappa, .. } => {
                // (1 - u)^n <= exp(-n u) on the cap
                let c = nn * kappa;
                if t0 == S::zero() {
                    h0.powf(nn) * (-c * a * a).exp() / (S::lit(2.0) * c * a * a)
                } else {
                    h0.powf(nn) / a * (b - a).min((S::PI() / c).sqrt())
                }
            }
        };
        v * (S::one() + S::slack())
    }
}

/// Piecewise upper bound on `|f|` over `[s_low, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEnvelope<S> {
    pub s_low: S,
    /// Certification grid step.
    pub delta: S,
    /// Height of the constant part.
    pub level: S,
    pub pieces: Vec<EnvelopePiece<S>>,
    /// Number of curvature halvings needed before certification passed.
    pub halvings: u32,
    /// True when certification failed and a constant envelope was used.
    pub fallback: bool,
}

impl<S: Real> TailEnvelope<S> {
    /// The single parabola `1 - kappa t^2` on `[s_low, pi]`.
    pub fn quadratic(kappa: S, s_low: S) -> Self {
        TailEnvelope {
            s_low,
            delta: S::zero(),
            level: S::zero(),
            pieces: vec![EnvelopePiece::Parabola { a: s_low, b: S::PI(), h0: S::one(), t0: S::zero(), kappa }],
            halvings: 0,
            fallback: false,
        }
    }

    /// Constant `h` on `[s_low, pi]`.
    pub fn constant(h: S, s_low: S) -> Self {
        TailEnvelope {
            s_low,
            delta: S::zero(),
            level: h,
            pieces: vec![EnvelopePiece::Constant { a: s_low, b: S::PI(), h }],
            halvings: 0,
            fallback: false,
        }
    }

    pub fn value(&self, t: S) -> S {
        self.pieces
            .iter()
            .filter(|p| {
                let (a, b) = p.bounds();
                a <= t && t <= b
            })
            .map(|p| p.value(t))
            .fold(S::neg_infinity(), S::max)
    }

    fn min_on(&self, lo: S, hi: S) -> S {
        self.pieces
            .iter()
            .filter(|p| {
                let (a, b) = p.bounds();
                a <= hi && lo <= b
            })
            .map(|p| {
                let (a, b) = p.bounds();
                p.min_on(lo.max(a), hi.min(b))
            })
            .fold(S::infinity(), S::min)
    }

    /// Upper bound on the integral of `env(t)^n / t` over `[s, pi]`.
    pub fn integral_bound(&self, n: u64, s: S) -> S {
        self.pieces.iter().map(|p| p.integral_bound(n, s)).fold(S::zero(), |a, b| a + b)
    }

    /// Every decay height is below one, so the tail integral tends to zero.
    pub fn decays(&self) -> bool {
        self.pieces.iter().all(|p| p.is_origin_cap() || p.decay_height() < S::one())
    }

    /// Heights `h < 1` whose `h^n sqrt(n)` factors appear in the tail integral.
    pub fn decay_heights(&self) -> Vec<S> {
        self.pieces.iter().filter(|p| !p.is_origin_cap()).map(|p| p.decay_height()).collect()
    }
}

/// `(1/2) * integral_s^pi env(t)^n dt / t`, which bounds the tail contribution
/// `2 (1/2pi) (pi/2) integral |f|^n / t` with the `D(t) <= pi/2` factor folded in.
pub fn tail_integral_bound<S: Real>(env: &TailEnvelope<S>, n: u64, s: S) -> S {
    env.integral_bound(n, s) / S::lit(2.0)
}

struct Cap<S> {
    t0: S,
    h0: S,
    kappa: S,
}

/// Builds and certifies an envelope: constant at the second-highest local
/// maximum on `[s_low, pi]` (counting the value at `s_low`), with parabolic
/// caps over the cells that rise above it.
pub fn build_envelope<S: Real>(profile: &CfProfile<S>, s_low: S) -> TailEnvelope<S> {
    let cf = &profile.cf;
    let pi = S::PI();
    let two = S::lit(2.0);
    let slack = S::slack();
    let m = cf.lipschitz;

    let floor = S::epsilon() * S::lit(4096.0);
    let mut delta = (S::lit(1e-6) / m).max(floor);
    let mut cells = ((pi - s_low) / delta).ceil().to_usize().unwrap().max(1);
    if cells > MAX_CELLS {
        cells = MAX_CELLS;
    }
    delta = (pi - s_low) / S::from_usize(cells).unwrap();
    let half = m * delta / two;

    let mut heights: Vec<S> = profile.interior().iter().filter(|p| p.t > s_low).map(|p| p.height).collect();
    heights.push(cf.abs(s_low));
    heights.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let second = if heights.len() > 1 { heights[1] } else { heights[0] };
    let level = second + half + two * slack;

    let centres: Vec<(S, S)> = std::iter::once((S::zero(), S::one()))
        .chain(profile.interior().iter().map(|p| (p.t, (p.height + m * delta + two * slack).min(S::one()))))
        .collect();

    let (hot, max_need) = scan(cf, s_low, delta, cells, half, level - slack / two);

    let mut caps: Vec<Cap<S>> = Vec::new();
    let mut owner: Vec<usize> = Vec::with_capacity(hot.len());
    let mut ok = true;
    for &(t, need) in &hot {
        let (ci, _) = centres
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 .0 - t).abs().partial_cmp(&(y.1 .0 - t).abs()).unwrap())
            .unwrap();
        let (t0, h0) = centres[ci];
        let k = match caps.iter().position(|c| c.t0 == t0) {
            Some(k) => k,
            None => {
                caps.push(Cap { t0, h0, kappa: S::infinity() });
                caps.len() - 1
            }
        };
        owner.push(k);
        if need >= h0 {
            ok = false;
            continue;
        }
        let d = (t - t0).abs() + delta / two;
        let kappa = (S::one() - need / h0) / (d * d);
        caps[k].kappa = caps[k].kappa.min(kappa);
    }
    for c in &mut caps {
        c.kappa = c.kappa * (S::one() - S::lit(1e-9));
    }
    caps.sort_by(|a, b| a.t0.partial_cmp(&b.t0).unwrap());

    if ok {
        for halvings in 0..=MAX_HALVINGS {
            let pieces = assemble(&caps, s_low, level);
            let env = TailEnvelope { s_low, delta, level, pieces, halvings, fallback: false };
            if certify(&env, &hot, delta, level - slack / two) {
                return env;
            }
            for c in &mut caps {
                c.kappa = c.kappa / two;
            }
        }
    }
    let h = max_need.max(level).min(S::one());
    TailEnvelope { s_low, delta, level: h, pieces: vec![EnvelopePiece::Constant { a: s_low, b: pi, h }], halvings: MAX_HALVINGS, fallback: true }
}

/// Samples cell midpoints; returns cells whose bound exceeds `threshold`, and the largest bound.
fn scan<S: Real>(cf: &NormalizedCf<S>, s_low: S, delta: S, cells: usize, half: S, threshold: S) -> (Vec<(S, S)>, S) {
    const CHUNK: usize = 1 << 15;
    let chunks = cells.div_ceil(CHUNK);
    let parts: Vec<(Vec<(S, S)>, S)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut hot = Vec::new();
            let mut max = S::zero();
            for i in c * CHUNK..((c + 1) * CHUNK).min(cells) {
                let t = s_low + (S::from_usize(i).unwrap() + S::lit(0.5)) * delta;
                let need = cf.abs(t) + half + S::slack();
                max = max.max(need);
                if need > threshold {
                    hot.push((t, need));
                }
            }
            (hot, max)
        })
        .collect();
    let max = parts.iter().map(|p| p.1).fold(S::zero(), S::max);
    (parts.into_iter().flat_map(|p| p.0).collect(), max)
}

fn assemble<S: Real>(caps: &[Cap<S>], s_low: S, level: S) -> Vec<EnvelopePiece<S>> {
    let pi = S::PI();
    let two = S::lit(2.0);
    let mut spans: Vec<(S, S, &Cap<S>)> = caps
        .iter()
        .filter(|c| c.h0 > level)
        .map(|c| {
            let w = ((S::one() - level / c.h0) / c.kappa).sqrt();
            ((c.t0 - w).max(s_low), (c.t0 + w).min(pi), c)
        })
        .filter(|(a, b, _)| a < b)
        .collect();
    for i in 1..spans.len() {
        if spans[i - 1].1 > spans[i].0 {
            let mid = (spans[i - 1].2.t0 + spans[i].2.t0) / two;
            spans[i - 1].1 = spans[i - 1].1.min(mid);
            spans[i].0 = spans[i].0.max(mid);
        }
    }
    let mut pieces = Vec::new();
    let mut at = s_low;
    for (a, b, c) in spans {
        if a >= b {
            continue;
        }
        if a > at {
            pieces.push(EnvelopePiece::Constant { a: at, b: a, h: level });
        }
        pieces.push(EnvelopePiece::Parabola { a, b, h0: c.h0, t0: c.t0, kappa: c.kappa });
        at = b;
    }
    if at < pi {
        pieces.push(EnvelopePiece::Constant { a: at, b: pi, h: level });
    }
    pieces
}

/// Checks the envelope against every hot cell, and that it never dips below
/// `floor` (which bounds all other cells).
fn certify<S: Real>(env: &TailEnvelope<S>, hot: &[(S, S)], delta: S, floor: S) -> bool {
    let half = delta / S::lit(2.0);
    let pieces_ok = env.pieces.iter().all(|p| {
        let (a, b) = p.bounds();
        p.min_on(a, b) >= floor && p.decay_height() <= S::one()
    });
    let covered = env.pieces.first().is_some_and(|p| p.bounds().0 <= env.s_low)
        && env.pieces.last().is_some_and(|p| p.bounds().1 >= S::PI())
        && env.pieces.windows(2).all(|w| w[0].bounds().1 >= w[1].bounds().0);
    pieces_ok
        && covered
        && hot
            .par_iter()
            .all(|&(t, need)| env.min_on((t - half).max(env.s_low), (t + half).min(S::PI())) >= need)
}

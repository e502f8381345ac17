//! Certified arrival proofs: an explicit bound settles the sign for `n >= n2`
//! and an exact scan settles everything below.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bound_terms, class_constants, global_constants, n1, n2_with_cap, ClassConstants, GlobalConstants, TailMode,
    TailSource, DEFAULT_SEARCH_CAP,
};
use crate::cf::{build_envelope, profile_of, r_optimal, CfProfile, NormalizedCf, TailEnvelope};
use crate::die::{CanonicalDie, Die};
use crate::error::{Error, Result};
use crate::exact::{Budget, Convolver, TiltValue};
use crate::lattice::{certificate, LatticeStructure};
use crate::moments::MomentSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Proven,
    SymmetricUndetermined,
    ScanBudgetExceeded,
    SearchCapExceeded,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct N2Values {
    pub cert: Option<u64>,
    pub optimal: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<u64>,
}

impl N2Values {
    pub fn get(&self, mode: TailMode) -> Option<u64> {
        match mode {
            TailMode::Cert => self.cert,
            TailMode::Optimal => self.optimal,
            TailMode::Envelope => self.envelope,
        }
    }

    /// Mode with the smallest n2 (ties go to the simpler tail).
    pub fn best(&self) -> Option<(TailMode, u64)> {
        TailMode::ALL
            .iter()
            .filter_map(|&m| self.get(m).map(|n| (m, n)))
            .min_by_key(|&(_, n)| n)
    }
}

/// An exact tilt in audit form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactTilt {
    pub n: u64,
    /// `numerator/denominator` in lowest terms.
    pub tilt: String,
    pub normalized: f64,
}

impl From<&TiltValue> for ExactTilt {
    fn from(t: &TiltValue) -> Self {
        ExactTilt { n: t.n, tilt: format!("{}/{}", t.tilt.numer(), t.tilt.denom()), normalized: t.normalized }
    }
}

/// Scaled bound decomposition at one n (every column times `sqrt(2 pi n)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: u64,
    pub total: f64,
    pub principal: f64,
    pub tail: f64,
    pub skew: f64,
    pub rest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub die: String,
    pub class: u64,
    #[serde(rename = "L")]
    pub l: f64,
    pub l_minus: f64,
    pub n1: Option<u64>,
    pub n2: N2Values,
    /// Tail mode whose n2 bounds the scan.
    pub tail_mode: Option<TailMode>,
    pub proven_n0: Option<u64>,
    pub zero_tilts: Vec<u64>,
    pub scan_max: u64,
    pub status: Status,
    /// Last scanned index whose exact tilt does not have the sign of L.
    pub last_disagreement: Option<ExactTilt>,
    pub bound_decomposition_at: Vec<BoundRow>,
}

#[derive(Debug, Clone)]
pub struct ProofOptions {
    pub budget: Budget,
    /// Force a tail mode instead of taking the smallest n2.
    pub tail: Option<TailMode>,
    pub search_cap: u64,
    /// Indices at which to report the bound decomposition.
    pub decomposition_at: Vec<u64>,
}

impl Default for ProofOptions {
    fn default() -> Self {
        ProofOptions { budget: Budget::default(), tail: None, search_cap: DEFAULT_SEARCH_CAP, decomposition_at: Vec::new() }
    }
}

/// Everything derived from a die that the proofs and the CLI need.
#[derive(Debug, Clone)]
pub struct DieAnalysis {
    pub die: Die,
    pub canonical: CanonicalDie,
    pub lattice: LatticeStructure,
    pub moments: MomentSet,
    pub globals: GlobalConstants<f64>,
    pub classes: Vec<ClassConstants<f64>>,
    pub profile: CfProfile<f64>,
    /// Certified `min (1 - |f|)/t^2` of the span-normalised CF.
    pub r_opt: f64,
    /// Tail envelope on `[1/sigma_norm, pi]`, when that interval is non-empty.
    pub envelope: Option<TailEnvelope<f64>>,
}

impl DieAnalysis {
    pub fn new(d: &Die) -> Result<Self> {
        let canonical = d.canonicalize()?;
        let c = &canonical.die;
        let lattice = certificate(c);
        let moments = MomentSet::of(c)?;
        let globals = global_constants::<f64>(c, &lattice, &moments)?;
        let classes = (0..globals.span).map(|r| class_constants(&globals, r)).collect::<Result<Vec<_>>>()?;
        let profile = profile_of(&NormalizedCf::<f64>::new(c));
        let r_opt = r_optimal::<f64>(c);
        let s_low = 1.0 / globals.sigma_norm();
        let envelope = (s_low < std::f64::consts::PI).then(|| build_envelope(&profile, s_low));
        Ok(DieAnalysis { die: d.clone(), canonical, lattice, moments, globals, classes, profile, r_opt, envelope })
    }

    pub fn span(&self) -> u64 {
        self.globals.span
    }

    pub fn tail_source(&self, mode: TailMode) -> Option<TailSource<'_, f64>> {
        match mode {
            TailMode::Cert => Some(TailSource::Quadratic(self.globals.r)),
            TailMode::Optimal => Some(TailSource::Quadratic(self.globals.r_from_normalized(self.r_opt))),
            TailMode::Envelope => self.envelope.as_ref().filter(|e| e.decays()).map(TailSource::Envelope),
        }
    }

    /// n2 for one class and mode; `None` when the mode is unavailable.
    pub fn n2(&self, c: u64, mode: TailMode, cap: u64) -> Result<Option<u64>> {
        let cc = &self.classes[c as usize];
        match self.tail_source(mode) {
            Some(t) => n2_with_cap(&self.globals, cc, &t, cap).map(Some),
            None => Ok(None),
        }
    }

    pub fn bound_row(&self, c: u64, n: u64, mode: TailMode) -> Result<BoundRow> {
        let tail = self
            .tail_source(mode)
            .ok_or_else(|| Error::InvalidArgument(format!("tail mode {mode} unavailable")))?;
        let t = bound_terms(&self.globals, &self.classes[c as usize], n, &tail)?.scaled();
        Ok(BoundRow { n, total: t.total(), principal: t.principal, tail: t.tail, skew: t.skew, rest: t.rest_sum() })
    }

    fn first_index(&self, c: u64) -> u64 {
        if c == 0 {
            self.span()
        } else {
            c
        }
    }

    fn skeleton(&self, c: u64, opts: &ProofOptions) -> Result<ClassReport> {
        let cc = &self.classes[c as usize];
        let mut report = ClassReport {
            die: self.die.to_string(),
            class: c,
            l: cc.l_tilt,
            l_minus: cc.l_minus,
            n1: None,
            n2: N2Values::default(),
            tail_mode: None,
            proven_n0: None,
            zero_tilts: Vec::new(),
            scan_max: 0,
            status: Status::SymmetricUndetermined,
            last_disagreement: None,
            bound_decomposition_at: Vec::new(),
        };
        if cc.l_is_zero {
            return Ok(report);
        }
        report.n1 = Some(n1(&self.globals, cc)?);
        let modes: Vec<TailMode> = match opts.tail {
            Some(m) => vec![m],
            None => TailMode::ALL.to_vec(),
        };
        for m in TailMode::ALL {
            let v = match self.n2(c, m, opts.search_cap) {
                Ok(v) => v,
                Err(Error::SearchCapExceeded(_)) => None,
                Err(e) => return Err(e),
            };
            match m {
                TailMode::Cert => report.n2.cert = v,
                TailMode::Optimal => report.n2.optimal = v,
                TailMode::Envelope => report.n2.envelope = v,
            }
        }
        let chosen = modes
            .iter()
            .filter_map(|&m| report.n2.get(m).map(|n| (m, n)))
            .min_by_key(|&(_, n)| n);
        match chosen {
            Some((m, _)) => {
                report.tail_mode = Some(m);
                report.status = Status::ScanBudgetExceeded;
            }
            None => report.status = Status::SearchCapExceeded,
        }
        let mode = report.tail_mode.unwrap_or(TailMode::Cert);
        for &n in &opts.decomposition_at {
            if n % self.span() == c {
                if let Ok(row) = self.bound_row(c, n, mode) {
                    report.bound_decomposition_at.push(row);
                }
            }
        }
        Ok(report)
    }

    /// Proves every residue class with one convolution sweep.
    pub fn prove_all(&self, opts: &ProofOptions) -> Result<Vec<ClassReport>> {
        let b = self.span();
        let mut reports = (0..b).map(|c| self.skeleton(c, opts)).collect::<Result<Vec<_>>>()?;
        let target: Vec<Option<u64>> = reports
            .iter()
            .map(|r| r.tail_mode.and_then(|m| r.n2.get(m)))
            .collect();
        let scan_to = target.iter().flatten().copied().max().unwrap_or(0);
        let mut last_bad: Vec<Option<TiltValue>> = vec![None; b as usize];
        let mut conv = Convolver::new(&self.canonical.die, opts.budget)?;
        for n in 1..=scan_to {
            let c = (n % b) as usize;
            let Some(t2) = target[c] else { continue };
            if n > t2 {
                continue;
            }
            if let Err(e) = conv.advance_to(n) {
                return match e {
                    Error::BudgetExceeded { .. } => {
                        self.finish(&mut reports, &target, &last_bad, n - 1);
                        Ok(reports)
                    }
                    e => Err(e),
                };
            }
            let tv = conv.tilt();
            let want = if reports[c].l > 0.0 { 1 } else { -1 };
            if tv.tilt.is_zero() {
                reports[c].zero_tilts.push(n);
            }
            if tv.sign() != want {
                if n == t2 {
                    return Err(Error::BoundViolation(n));
                }
                last_bad[c] = Some(tv);
            }
        }
        self.finish(&mut reports, &target, &last_bad, scan_to);
        Ok(reports)
    }

    fn finish(&self, reports: &mut [ClassReport], target: &[Option<u64>], last_bad: &[Option<TiltValue>], reached: u64) {
        let b = self.span();
        for (c, r) in reports.iter_mut().enumerate() {
            let Some(t2) = target[c] else { continue };
            let bad = last_bad[c].as_ref();
            r.last_disagreement = bad.map(ExactTilt::from);
            if reached >= t2 {
                r.scan_max = t2;
                r.status = Status::Proven;
                r.proven_n0 = Some(bad.map_or(self.first_index(c as u64), |t| t.n + b));
            } else {
                let back = (reached + b - c as u64) % b;
                r.scan_max = reached.saturating_sub(back);
            }
        }
    }

    pub fn prove_class(&self, c: u64, opts: &ProofOptions) -> Result<ClassReport> {
        if c >= self.span() {
            return Err(Error::InvalidArgument(format!("class {c} not in [0, {})", self.span())));
        }
        let b = self.span();
        let mut report = self.skeleton(c, opts)?;
        let Some(t2) = report.tail_mode.and_then(|m| report.n2.get(m)) else { return Ok(report) };
        let want = if report.l > 0.0 { 1 } else { -1 };
        let mut conv = Convolver::new(&self.canonical.die, opts.budget)?;
        let mut last_bad: Option<TiltValue> = None;
        let mut n = self.first_index(c);
        while n <= t2 {
            match conv.advance_to(n) {
                Ok(()) => {}
                Err(Error::BudgetExceeded { .. }) => {
                    report.scan_max = n.saturating_sub(b);
                    report.last_disagreement = last_bad.as_ref().map(ExactTilt::from);
                    return Ok(report);
                }
                Err(e) => return Err(e),
            }
            let tv = conv.tilt();
            if tv.tilt.is_zero() {
                report.zero_tilts.push(n);
            }
            if tv.sign() != want {
                if n == t2 {
                    return Err(Error::BoundViolation(n));
                }
                last_bad = Some(tv);
            }
            n += b;
        }
        report.scan_max = t2;
        report.status = Status::Proven;
        report.proven_n0 = Some(last_bad.as_ref().map_or(self.first_index(c), |t| t.n + b));
        report.last_disagreement = last_bad.as_ref().map(ExactTilt::from);
        Ok(report)
    }
}

pub fn prove_class(d: &Die, c: u64) -> Result<ClassReport> {
    DieAnalysis::new(d)?.prove_class(c, &ProofOptions::default())
}

pub fn prove_all(d: &Die) -> Result<Vec<ClassReport>> {
    DieAnalysis::new(d)?.prove_all(&ProofOptions::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    First,
    Second,
}

/// Asymptotic comparison of two dice through the tilt of their difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub first: Die,
    pub second: Die,
    pub difference: Die,
    pub reports: Vec<ClassReport>,
    /// Per class: which die wins `Pr(A[n] > B[n]) > Pr(B[n] > A[n])` for all large n.
    pub winners: Vec<Option<Winner>>,
}

pub fn dominance(a: &Die, b: &Die) -> Result<Dominance> {
    dominance_with(a, b, &ProofOptions::default())
}

pub fn dominance_with(a: &Die, b: &Die, opts: &ProofOptions) -> Result<Dominance> {
    let difference = a.difference(b)?;
    let reports = DieAnalysis::new(&difference)?.prove_all(opts)?;
    let winners = reports
        .iter()
        .map(|r| match r.status {
            Status::SymmetricUndetermined => None,
            _ if r.l > 0.0 => Some(Winner::First),
            _ => Some(Winner::Second),
        })
        .collect();
    Ok(Dominance { first: a.clone(), second: b.clone(), difference, reports, winners })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::die::parse_die;

    #[test]
    fn x_all_classes() {
        let a = DieAnalysis::new(&parse_die("(2z^-3+z+z^5)/4").unwrap()).unwrap();
        let reports = a.prove_all(&ProofOptions::default()).unwrap();
        assert_eq!(reports.len(), 4);
        let n0: Vec<_> = reports.iter().map(|r| r.proven_n0).collect();
        assert_eq!(n0, vec![Some(4), Some(5), Some(6), Some(3)]);
        assert_eq!(reports[2].zero_tilts, vec![2]);
        assert!(reports.iter().all(|r| r.status == Status::Proven));
        for r in &reports {
            let single = a.prove_class(r.class, &ProofOptions::default()).unwrap();
            assert_eq!(&single, r);
        }
    }

    #[test]
    fn forced_mode_is_respected() {
        let a = DieAnalysis::new(&parse_die("(2z^-3+z+z^5)/4").unwrap()).unwrap();
        let opts = ProofOptions { tail: Some(TailMode::Cert), ..ProofOptions::default() };
        let r = a.prove_class(1, &opts).unwrap();
        assert_eq!(r.tail_mode, Some(TailMode::Cert));
        assert_eq!(r.scan_max, 37);
        assert_eq!(r.proven_n0, Some(5));
    }

    #[test]
    fn symmetric_dice() {
        let r = prove_all(&parse_die("0:1/2,1:1/2").unwrap()).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|r| r.status == Status::SymmetricUndetermined && r.proven_n0.is_none()));
        let x = parse_die("(2z^-3+z+z^5)/4").unwrap();
        let d = dominance(&x, &x).unwrap();
        assert!(d.winners.iter().all(Option::is_none));
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let a = DieAnalysis::new(&parse_die("(2z^-3+z+z^5)/4").unwrap()).unwrap();
        let opts = ProofOptions { budget: Budget { max_bytes: 1 << 30, max_steps: 2 }, ..ProofOptions::default() };
        let r = a.prove_all(&opts).unwrap();
        assert!(r.iter().all(|r| r.status == Status::ScanBudgetExceeded));
        assert!(r.iter().all(|r| r.n2.cert.is_some()));
        let r = a.prove_class(1, &opts).unwrap();
        assert_eq!(r.status, Status::ScanBudgetExceeded);
        assert_eq!(r.scan_max, 1);
    }

    #[test]
    fn report_json_round_trips() {
        let a = DieAnalysis::new(&parse_die("(2z^-3+z+z^5)/4").unwrap()).unwrap();
        let opts = ProofOptions { decomposition_at: vec![37, 41], ..ProofOptions::default() };
        let r = a.prove_class(1, &opts).unwrap();
        assert_eq!(r.bound_decomposition_at.len(), 2);
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"L\":"));
        let back: ClassReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tilt_core::{
    bound_terms, dominance, error_bound_cdf, parse_die, prob_below_mean, s_max, scalar::ratio_to_f64, DieAnalysis,
    ProofOptions, Status, TailMode, Winner,
};

const X: &str = "(2z^-3+z+z^5)/4";
const Y: &str = "(9z^-8+1+8z^9)/18";
const A: &str = "(z^2+z^6+z^7)/3";
const B: &str = "(z^1+z^5+z^9)/3";
const C: &str = "(z^3+z^4+z^8)/3";

#[test]
fn y_bound_holds_beyond_n2_in_every_mode() {
    let a = DieAnalysis::new(&parse_die(Y).unwrap()).unwrap();
    let cc = &a.classes[0];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for mode in TailMode::ALL {
        let tail = a.tail_source(mode).unwrap();
        let n2 = a.n2(0, mode, u64::MAX).unwrap().unwrap();
        let before = bound_terms(&a.globals, cc, n2 - 1, &tail).unwrap().scaled().total();
        assert!(before >= cc.l_tilt.abs(), "{mode}: n2 - 1 already good");
        for _ in 0..100 {
            let n = n2 + rng.gen_range(1..=10_000_000u64);
            let t = bound_terms(&a.globals, cc, n, &tail).unwrap().scaled().total();
            assert!(t < cc.l_tilt.abs(), "{mode} at {n}: {t}");
        }
    }
}

#[test]
fn y_cdf_form_soundness() {
    let y = parse_die(Y).unwrap();
    let a = DieAnalysis::new(&y).unwrap();
    let cc = &a.classes[0];
    for n in (100..=800).step_by(50) {
        let below = ratio_to_f64(&prob_below_mean(&y, n).unwrap());
        let approx = 0.5 - cc.l_minus / (2.0 * std::f64::consts::PI * n as f64).sqrt();
        let eb = error_bound_cdf(&a.globals, cc, n, s_max(&a.globals, n)).unwrap();
        assert!((below - approx).abs() <= eb, "n = {n}");
    }
}

#[test]
fn proofs_have_no_gap() {
    for s in [X, Y, "-1:1/3,0:1/6,2:1/2", "0:3/8,3:1/4,7:3/8"] {
        let a = DieAnalysis::new(&parse_die(s).unwrap()).unwrap();
        for r in a.prove_all(&ProofOptions::default()).unwrap() {
            if r.status != Status::Proven {
                continue;
            }
            let mode = r.tail_mode.unwrap();
            let n2 = r.n2.get(mode).unwrap();
            assert_eq!(n2 % a.span(), r.class, "{s}");
            assert_eq!(r.scan_max, n2);
            let n0 = r.proven_n0.unwrap();
            assert_eq!(n0 % a.span(), r.class);
            assert!(n0 <= n2);
            if let Some(e) = &r.last_disagreement {
                assert_eq!(e.n + a.span(), n0);
            }
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let a = DieAnalysis::new(&parse_die(X).unwrap()).unwrap();
    let opts = ProofOptions { decomposition_at: vec![40, 41], ..ProofOptions::default() };
    let one = serde_json::to_string(&a.prove_all(&opts).unwrap()).unwrap();
    let b = DieAnalysis::new(&parse_die(X).unwrap()).unwrap();
    let two = serde_json::to_string(&b.prove_all(&opts).unwrap()).unwrap();
    assert_eq!(one, two);
}

#[test]
fn report_counts() {
    let y = DieAnalysis::new(&parse_die(Y).unwrap()).unwrap();
    assert_eq!(y.span(), 1);
    // a coin on {0, 1} canonicalises to {-1, 1}: two classes, both undetermined
    let coin = DieAnalysis::new(&parse_die("3:1/2,4:1/2").unwrap()).unwrap();
    let r = coin.prove_all(&ProofOptions::default()).unwrap();
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|r| r.status == Status::SymmetricUndetermined));
}

#[test]
fn nontransitive_dominance() {
    let (a, b, c) = (parse_die(A).unwrap(), parse_die(B).unwrap(), parse_die(C).unwrap());
    assert_eq!(a.difference(&b).unwrap(), b.difference(&c).unwrap());
    let ab = dominance(&a, &b).unwrap();
    assert_eq!(ab.winners, vec![Some(Winner::First)]);
    assert!((ab.reports[0].l - 0.03331).abs() < 1e-5);
    let ca = dominance(&c, &a).unwrap();
    assert_eq!(ca.winners, vec![Some(Winner::Second)]);
    assert!((ca.reports[0].l + 0.14028).abs() < 1e-5);
    // C - A is the negation of A - C
    let ac = dominance(&a, &c).unwrap();
    assert_eq!(ac.winners, vec![Some(Winner::First)]);
    assert_eq!(ac.reports[0].proven_n0, ca.reports[0].proven_n0);
}

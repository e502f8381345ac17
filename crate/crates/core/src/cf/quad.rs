//! Quadrature of the integral representation of `Pr(X[n] < mean)`.

use num_complex::Complex;

use crate::die::Die;
use crate::error::Result;
use crate::lattice::span_shift;

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = (a + b) / 2.0;
    let h = (b - a) / 2.0;
    let fc = f(c);
    let mut k = fc * WK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XK[j];
        let s = f(c - x) + f(c + x);
        k += WK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration to absolute tolerance `tol`.
pub fn gauss_kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, whole: (f64, f64), depth: u32) -> f64 {
        let (v, err) = whole;
        if err <= tol || depth == 0 {
            return v;
        }
        let m = (a + b) / 2.0;
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        rec(f, a, m, tol / 2.0, l, depth - 1) + rec(f, m, b, tol / 2.0, r, depth - 1)
    }
    let whole = gk15(&f, a, b);
    rec(&f, a, b, tol, whole, 40)
}

/// `1/2 - I0` where `I0 = (1/pi) int_0^pi Im(e^{i alpha t} f(t)^n) D(t)/t dt`,
/// `f` the CF of the canonical die divided by its span and `D(t) = (t/2)/sin(t/2)`.
pub fn prob_below_mean_quadrature(d: &Die, n: u64) -> Result<f64> {
    let c = d.canonicalize()?.die;
    let (b, a) = span_shift(&c);
    let alpha = 0.5 - ((n as u128 * a as u128) % b as u128) as f64 / b as f64;
    let terms: Vec<(f64, f64)> = c
        .outcomes()
        .iter()
        .map(|(x, p)| (*x as f64 / b as f64, crate::scalar::ratio_to_f64(p)))
        .collect();
    let integrand = |t: f64| {
        let f: Complex<f64> = terms.iter().map(|&(x, p)| Complex::from_polar(p, t * x)).sum();
        let z = Complex::from_polar(1.0, alpha * t) * f.powu(n as u32);
        z.im * 0.5 / (t / 2.0).sin()
    };
    let i0 = gauss_kronrod(integrand, 0.0, std::f64::consts::PI, 1e-13) / std::f64::consts::PI;
    Ok(0.5 - i0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::die::parse_die;

    #[test]
    fn integrates_polynomials_exactly() {
        let v = gauss_kronrod(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14);
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        let v = gauss_kronrod(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-14);
        assert!((v - 2.0).abs() < 1e-13);
    }

    #[test]
    fn small_cases() {
        let x = parse_die("(2z^-3+z+z^5)/4").unwrap();
        assert!((prob_below_mean_quadrature(&x, 1).unwrap() - 0.5).abs() < 1e-12);
        assert!((prob_below_mean_quadrature(&x, 3).unwrap() - 0.59375).abs() < 1e-12);
        let coin = parse_die("0:1/2,1:1/2").unwrap();
        assert!((prob_below_mean_quadrature(&coin, 2).unwrap() - 0.25).abs() < 1e-12);
        let y = parse_die("(9z^-8+1+8z^9)/18").unwrap();
        assert!((prob_below_mean_quadrature(&y, 2).unwrap() - (0.25 + 1.0 / 18.0)).abs() < 1e-12);
    }
}

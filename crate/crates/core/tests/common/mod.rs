//! Shared test oracles, independent of the library's implementation paths.

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// Standard normal CDF through the Maclaurin series of erf; a fully
/// independent route, accurate to ~1e-15 for |x| <= 3.
pub fn phi_series(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let mut term = z;
    let mut sum = z;
    let mut n = 0u32;
    loop {
        n += 1;
        let nf = f64::from(n);
        term *= -z * z / nf;
        let add = term / (2.0 * nf + 1.0);
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-3) || n > 300 {
            break;
        }
    }
    0.5 + sum / std::f64::consts::PI.sqrt()
}

/// Brute-force integral of Phi(u) Phi(-x - u) du over the real line.
pub fn g_integral_oracle(x: f64) -> f64 {
    let span = 12.0 + x.abs();
    let f = |u: f64| pairprobit::std_normal_cdf(u) * pairprobit::std_normal_cdf(-x - u);
    adaptive_simpson(&f, -span, span, 1e-10)
}

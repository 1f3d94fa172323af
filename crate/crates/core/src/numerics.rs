//! Scalar special functions and Gauss-Hermite quadrature.
//!
//! Everything here is a pure function of its arguments. Quadrature rules are
//! built once per order, cached, and immutable afterwards.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::erf::{erf, erfc, erfcx};
use crate::error::{Error, Result};

pub const SQRT_PI: f64 = 1.772453850905516;

/// Standard normal CDF, accurate to ~1 ulp including the far tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// log of the standard normal CDF, finite for every finite argument.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x >= -1.0 {
        std_normal_cdf(x).ln()
    } else {
        // Phi(x) = exp(-w^2) * erfcx(w) / 2 with w = -x/sqrt(2)
        let w = -x * std::f64::consts::FRAC_1_SQRT_2;
        -w * w + erfcx(w).ln() - std::f64::consts::LN_2
    }
}

/// Inverse standard normal CDF (Acklam's rational approximation polished by
/// one Halley step), used only to seed scalar searches and for quantiles.
pub fn std_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile needs p in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Halley step against the high-accuracy CDF.
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// G(x) = -sqrt(pi) * x * Phi(-x/sqrt(2)) + exp(-x^2/4).
///
/// Positive for every finite x. For x >= 0 the two terms nearly cancel, so
/// the scaled form exp(-x^2/4) * (1 - sqrt(pi)/2 * x * erfcx(x/2)) is used;
/// it is the same closed form with the exponential factored out.
pub fn g_function(x: f64) -> f64 {
    if x >= 0.0 {
        (-0.25 * x * x).exp() * g_scaled(x)
    } else {
        // Both terms are positive here; the direct form is exact.
        -SQRT_PI * x * (0.5 * erfc(0.5 * x)) + (-0.25 * x * x).exp()
    }
}

/// dG/dx = -sqrt(pi) * Phi(-x/sqrt(2)).
pub fn g_prime(x: f64) -> f64 {
    -0.5 * SQRT_PI * erfc(0.5 * x)
}

// G(x) * exp(x^2/4) for x >= 0. Behaves like 2/x^2 as x grows.
fn g_scaled(x: f64) -> f64 {
    let h = 1.0 - 0.5 * SQRT_PI * x * erfcx(0.5 * x);
    if h > 0.0 {
        h
    } else {
        // Only reachable once 2/x^2 drops below machine epsilon.
        2.0 / (x * x)
    }
}

/// log G(x), finite for every finite x (G itself underflows past x ~ 55).
pub fn ln_g(x: f64) -> f64 {
    if x <= 0.0 {
        g_function(x).ln()
    } else {
        -0.25 * x * x + g_scaled(x).ln()
    }
}

/// G'(x)/G(x), computed in scaled form so the exponentials cancel.
pub(crate) fn g_log_derivative(x: f64) -> f64 {
    if x <= 0.0 {
        g_prime(x) / g_function(x)
    } else {
        -0.5 * SQRT_PI * erfcx(0.5 * x) / g_scaled(x)
    }
}

/// K(s) = G(s) + G(-s) = 2 G(|s|) + sqrt(pi) |s|; even, minimum 2 at s = 0.
pub(crate) fn k_value(s: f64) -> f64 {
    let a = s.abs();
    2.0 * g_function(a) + SQRT_PI * a
}

/// K'(s)/K(s) with K'(s) = sqrt(pi) * erf(s/2).
pub(crate) fn k_log_derivative(s: f64) -> f64 {
    SQRT_PI * erf(0.5 * s) / k_value(s)
}

/// Gauss-Hermite rule for the weight exp(-t^2): nodes strictly increasing,
/// weights positive and summing to sqrt(pi).
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    order: u32,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Approximates the integral of f against exp(-t^2).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

pub const MAX_QUAD_ORDER: u32 = 128;

/// Returns the cached order-m Gauss-Hermite rule, exact for polynomials of
/// degree 2m-1. Orders outside 1..=128 are rejected.
pub fn gauss_hermite(order: u32) -> Result<Arc<QuadratureRule>> {
    if order == 0 || order > MAX_QUAD_ORDER {
        return Err(Error::QuadratureOrder { order });
    }
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    Ok(Arc::clone(
        guard
            .entry(order)
            .or_insert_with(|| Arc::new(compute_gauss_hermite(order as usize))),
    ))
}

// Orthonormal (physicists') Hermite values at z: returns (p_n(z), derivative
// helper sqrt(2n) * p_{n-1}(z)).
fn hermite_eval(n: usize, z: f64) -> (f64, f64) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

// Newton iteration on the orthonormal recurrence, largest root inward
// (Numerical Recipes initial guesses). Valid well past order 128.
fn compute_gauss_hermite(n: usize) -> QuadratureRule {
    let m = (n + 1) / 2;
    let mut pos = vec![0.0f64; m]; // roots in decreasing order
    let mut wts = vec![0.0f64; m];
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => {
                let anu = 2.0 * nf + 1.0;
                anu.sqrt() - 1.85575 * anu.powf(-1.0 / 6.0)
            }
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * pos[0],
            3 => 1.91 * z - 0.91 * pos[1],
            _ => 2.0 * z - pos[i - 2],
        };
        let mut converged = false;
        for _ in 0..200 {
            let (p1, pp) = hermite_eval(n, z);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 3e-14 * (1.0 + z.abs()) {
                converged = true;
                break;
            }
        }
        assert!(converged, "Gauss-Hermite Newton stalled at order {n}");
        // The middle root of an odd-order rule is exactly zero.
        if n % 2 == 1 && i == m - 1 && z.abs() < 1e-10 {
            z = 0.0;
        }
        let (_, pp) = hermite_eval(n, z);
        pos[i] = z;
        wts[i] = 2.0 / (pp * pp);
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..m {
        if pos[i] > 0.0 {
            nodes.push(-pos[i]);
            weights.push(wts[i]);
        }
    }
    if n % 2 == 1 {
        nodes.push(0.0);
        weights.push(wts[m - 1]);
    }
    for i in (0..m).rev() {
        if pos[i] > 0.0 {
            nodes.push(pos[i]);
            weights.push(wts[i]);
        }
    }
    debug_assert_eq!(nodes.len(), n);
    QuadratureRule {
        order: n as u32,
        nodes,
        weights,
    }
}

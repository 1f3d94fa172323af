//! Point estimators: the conditional MLE, the random-effects (Heckman) ML,
//! conditional logit, IPW, and the closed-form ATE expressions.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_identifiability, Dataset, IdentifiabilityReport, Theta};
use crate::model::{dlog_one_minus_p, dlog_p, ln_one_minus_p, ln_p};
use crate::numerics::{gauss_hermite, ln_std_normal_cdf, std_normal_cdf, SQRT_PI};
use crate::optim::{maximize, OptimOptions, OptimOutcome};

/// Shared fit configuration. Defaults match the documented tolerances.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub grad_tol: f64,
    pub step_tol: f64,
    pub max_iterations: usize,
    /// Gauss-Hermite order for the random-effects likelihood.
    pub quad_order: u32,
    /// Propensity-score truncation bounds for IPW.
    pub trim: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            step_tol: 1e-12,
            max_iterations: 200,
            quad_order: 40,
            trim: (0.01, 0.99),
        }
    }
}

const SEPARATION_BOUND: f64 = 50.0;

/// Output of the conditional MLE and conditional-logit fits.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub theta_hat: Theta,
    /// Standard errors (beta components first, lambda last); attached by the
    /// inference layer when requested.
    pub se: Option<Vec<f64>>,
    /// sqrt of the discordant-pair count.
    pub k_n: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub identifiability: IdentifiabilityReport,
    pub warnings: Vec<String>,
}

/// Output of the random-effects probit ML fit.
#[derive(Debug, Clone, Serialize)]
pub struct HeckmanResult {
    pub beta_hat: Vec<f64>,
    pub lambda_hat: f64,
    /// Group-effect standard deviation (never negative).
    pub sigma_hat: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
}

// One discordant contribution with a multiplicity; covariate-free datasets
// collapse to at most four of these.
struct DiscTerm {
    weight: f64,
    y_a: bool,
    d: bool,
    dx: Vec<f64>,
}

fn discordant_terms(data: &Dataset) -> Vec<DiscTerm> {
    if data.k() == 0 {
        let mut counts = [[0usize; 2]; 2]; // [y_a][d]
        for p in data.pairs().iter().filter(|p| p.discordant()) {
            counts[usize::from(p.y_a())][usize::from(p.d())] += 1;
        }
        let mut terms = Vec::new();
        for ya in 0..2 {
            for d in 0..2 {
                if counts[ya][d] > 0 {
                    terms.push(DiscTerm {
                        weight: counts[ya][d] as f64,
                        y_a: ya == 1,
                        d: d == 1,
                        dx: Vec::new(),
                    });
                }
            }
        }
        terms
    } else {
        data.pairs()
            .iter()
            .filter(|p| p.discordant())
            .map(|p| DiscTerm {
                weight: 1.0,
                y_a: p.y_a(),
                d: p.d(),
                dx: p.covariate_difference(),
            })
            .collect()
    }
}

fn term_index(flat: &[f64], term: &DiscTerm) -> f64 {
    let k = flat.len() - 1;
    let mut s = flat[k] * if term.d { -1.0 } else { 1.0 };
    for (b, dx) in flat[..k].iter().zip(&term.dx) {
        s += b * dx;
    }
    s
}

fn separation_warning(out: &OptimOutcome) -> Vec<String> {
    if out.separated {
        vec![format!(
            "separation: parameter magnitude exceeded {SEPARATION_BOUND}; discordance may be one-sided"
        )]
    } else {
        Vec::new()
    }
}

// The likelihood supremum sits on the boundary when every observed
// discordant outcome is fitted as near-certain; the gradient then vanishes
// long before the parameter bound is reached.
const SEPARATION_PROB: f64 = 0.99;

/// Maximizes the discordant-pair conditional likelihood by damped Newton
/// ascent from theta = 0, with the analytic score.
pub fn fit_conditional_mle(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    if data.discordant_count() == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    let k = data.k();
    let terms = discordant_terms(data);

    let ll = |flat: &[f64]| -> f64 {
        terms
            .iter()
            .map(|t| {
                let s = term_index(flat, t);
                t.weight * if t.y_a { ln_p(s) } else { ln_one_minus_p(s) }
            })
            .sum()
    };
    let grad = |flat: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; k + 1];
        for t in &terms {
            let s = term_index(flat, t);
            let c = t.weight * if t.y_a { dlog_p(s) } else { dlog_one_minus_p(s) };
            for j in 0..k {
                g[j] += c * t.dx[j];
            }
            g[k] += c * if t.d { -1.0 } else { 1.0 };
        }
        g
    };

    let out = maximize(
        ll,
        grad,
        vec![0.0; k + 1],
        &OptimOptions {
            grad_tol: opts.grad_tol,
            step_tol: opts.step_tol,
            max_iterations: opts.max_iterations,
            bound: SEPARATION_BOUND,
            bound_dims: k + 1,
        },
    );

    let mut warnings = separation_warning(&out);
    let mut converged = out.converged;
    let min_fitted = terms
        .iter()
        .map(|t| {
            let s = term_index(&out.x, t);
            (if t.y_a { ln_p(s) } else { ln_one_minus_p(s) }).exp()
        })
        .fold(f64::INFINITY, f64::min);
    if min_fitted >= SEPARATION_PROB {
        warnings.push(format!(
            "separation: every observed discordant outcome is fitted with probability >= {SEPARATION_PROB}; the maximum lies on the boundary"
        ));
        converged = false;
    }
    Ok(EstimateResult {
        theta_hat: Theta::from_flat(&out.x),
        se: None,
        k_n: data.k_n(),
        loglik: out.value,
        iterations: out.iterations,
        converged,
        identifiability: check_identifiability(data),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Random-effects (Heckman) maximum likelihood
// ---------------------------------------------------------------------------

struct HeckTerm {
    weight: f64,
    y_a: bool,
    y_b: bool,
    d: bool,
    x_a: Vec<f64>,
    x_b: Vec<f64>,
}

fn heckman_terms(data: &Dataset) -> Vec<HeckTerm> {
    if data.k() == 0 {
        let mut counts = [[[0usize; 2]; 2]; 2]; // [y_a][y_b][d]
        for p in data.pairs() {
            counts[usize::from(p.y_a())][usize::from(p.y_b())][usize::from(p.d())] += 1;
        }
        let mut terms = Vec::new();
        for ya in 0..2 {
            for yb in 0..2 {
                for d in 0..2 {
                    if counts[ya][yb][d] > 0 {
                        terms.push(HeckTerm {
                            weight: counts[ya][yb][d] as f64,
                            y_a: ya == 1,
                            y_b: yb == 1,
                            d: d == 1,
                            x_a: Vec::new(),
                            x_b: Vec::new(),
                        });
                    }
                }
            }
        }
        terms
    } else {
        data.pairs()
            .iter()
            .map(|p| HeckTerm {
                weight: 1.0,
                y_a: p.y_a(),
                y_b: p.y_b(),
                d: p.d(),
                x_a: p.x_a().to_vec(),
                x_b: p.x_b().to_vec(),
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Per-pair log-likelihood pieces under tau ~ N(0, sigma^2), integrated by
// Gauss-Hermite after the substitution tau = sqrt(2) sigma t.
struct HeckKernel<'a> {
    terms: &'a [HeckTerm],
    k: usize,
    nodes: &'a [f64],
    ln_weights: Vec<f64>,
}

impl<'a> HeckKernel<'a> {
    fn new(terms: &'a [HeckTerm], k: usize, rule: &'a crate::numerics::QuadratureRule) -> Self {
        Self {
            terms,
            k,
            nodes: rule.nodes(),
            ln_weights: rule.weights().iter().map(|w| w.ln()).collect(),
        }
    }

    fn args(&self, params: &[f64], t: &HeckTerm) -> (f64, f64, f64, f64) {
        let (beta, rest) = params.split_at(self.k);
        let lambda = rest[0];
        let base_a = dot(beta, &t.x_a) + lambda * f64::from(u8::from(t.d));
        let base_b = dot(beta, &t.x_b) + lambda * f64::from(u8::from(!t.d));
        let qa = if t.y_a { 1.0 } else { -1.0 };
        let qb = if t.y_b { 1.0 } else { -1.0 };
        (base_a, base_b, qa, qb)
    }

    fn loglik(&self, params: &[f64]) -> f64 {
        let sigma = params[self.k + 1].exp();
        let scale = std::f64::consts::SQRT_2 * sigma;
        let mut ll = 0.0;
        for t in self.terms {
            let (base_a, base_b, qa, qb) = self.args(params, t);
            let mut max_term = f64::NEG_INFINITY;
            let mut terms_j = Vec::with_capacity(self.nodes.len());
            for (j, &node) in self.nodes.iter().enumerate() {
                let tau = scale * node;
                let v = self.ln_weights[j]
                    + ln_std_normal_cdf(qa * (base_a + tau))
                    + ln_std_normal_cdf(qb * (base_b + tau));
                terms_j.push(v);
                if v > max_term {
                    max_term = v;
                }
            }
            let sum: f64 = terms_j.iter().map(|v| (v - max_term).exp()).sum();
            ll += t.weight * (max_term + sum.ln() - SQRT_PI.ln());
        }
        ll
    }

    fn grad(&self, params: &[f64]) -> Vec<f64> {
        let k = self.k;
        let sigma = params[k + 1].exp();
        let scale = std::f64::consts::SQRT_2 * sigma;
        let ln_norm_const = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let mills = |u: f64| (-0.5 * u * u - ln_norm_const - ln_std_normal_cdf(u)).exp();
        let mut g = vec![0.0; k + 2];
        let mut lnvals = Vec::with_capacity(self.nodes.len());
        for t in self.terms {
            let (base_a, base_b, qa, qb) = self.args(params, t);
            lnvals.clear();
            let mut max_term = f64::NEG_INFINITY;
            for (j, &node) in self.nodes.iter().enumerate() {
                let tau = scale * node;
                let v = self.ln_weights[j]
                    + ln_std_normal_cdf(qa * (base_a + tau))
                    + ln_std_normal_cdf(qb * (base_b + tau));
                lnvals.push(v);
                if v > max_term {
                    max_term = v;
                }
            }
            let denom: f64 = lnvals.iter().map(|v| (v - max_term).exp()).sum();
            for (j, &node) in self.nodes.iter().enumerate() {
                let omega = t.weight * (lnvals[j] - max_term).exp() / denom;
                let tau = scale * node;
                let ma = qa * mills(qa * (base_a + tau));
                let mb = qb * mills(qb * (base_b + tau));
                for i in 0..k {
                    g[i] += omega * (ma * t.x_a[i] + mb * t.x_b[i]);
                }
                g[k] += omega
                    * (ma * f64::from(u8::from(t.d)) + mb * f64::from(u8::from(!t.d)));
                g[k + 1] += omega * (ma + mb) * tau; // d tau / d eta = tau
            }
        }
        g
    }
}

/// Log-likelihood of the random-effects probit model at given parameters,
/// with the group effect integrated out by Gauss-Hermite quadrature.
pub fn heckman_loglik(
    data: &Dataset,
    beta: &[f64],
    lambda: f64,
    sigma: f64,
    quad_order: u32,
) -> Result<f64> {
    if beta.len() != data.k() {
        return Err(Error::DimensionMismatch {
            expected: data.k(),
            got: beta.len(),
        });
    }
    if sigma < 0.0 {
        return Err(Error::NonFinite { what: "sigma" });
    }
    let rule = gauss_hermite(quad_order)?;
    let terms = heckman_terms(data);
    let kernel = HeckKernel::new(&terms, data.k(), &rule);
    let mut params = beta.to_vec();
    params.push(lambda);
    // ln(0) = -inf collapses the quadrature onto tau = 0, which is exactly
    // the degenerate sigma = 0 model; guard with a representable floor.
    params.push(if sigma > 0.0 { sigma.ln() } else { -745.0 });
    Ok(kernel.loglik(&params))
}

/// Maximizes the random-effects likelihood over (beta, lambda, log sigma)
/// jointly, reporting sigma on the natural scale.
pub fn fit_heckman_ml(data: &Dataset, opts: &FitOptions) -> Result<HeckmanResult> {
    if data.len() < 2 {
        return Err(Error::Precondition(
            "random-effects fit needs at least two pairs".to_string(),
        ));
    }
    let rule = gauss_hermite(opts.quad_order)?;
    let k = data.k();
    let terms = heckman_terms(data);
    let kernel = HeckKernel::new(&terms, k, &rule);

    let out = maximize(
        |p| kernel.loglik(p),
        |p| kernel.grad(p),
        vec![0.0; k + 2],
        &OptimOptions {
            grad_tol: opts.grad_tol,
            step_tol: opts.step_tol,
            max_iterations: opts.max_iterations,
            bound: SEPARATION_BOUND,
            bound_dims: k + 1,
        },
    );

    Ok(HeckmanResult {
        beta_hat: out.x[..k].to_vec(),
        lambda_hat: out.x[k],
        sigma_hat: out.x[k + 1].exp(),
        loglik: out.value,
        converged: out.converged,
        iterations: out.iterations,
    })
}

// ---------------------------------------------------------------------------
// Conditional logit (CML)
// ---------------------------------------------------------------------------

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Conditional-logit MLE on discordant pairs. The pair member recorded
/// first (subject A, the exposed member in paired study layouts) anchors the
/// index: P(Y_A = 1 | discordant) = logistic(lambda + beta'(x_a - x_b)), so
/// a covariate-free balanced sample gives lambda = 0 and, with every A
/// treated, the closed form lambda = log(n10 / n01).
pub fn fit_cml_logit(data: &Dataset) -> Result<EstimateResult> {
    if data.discordant_count() == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    let k = data.k();
    struct LogitTerm {
        weight: f64,
        y_a: bool,
        dx_ab: Vec<f64>, // x_a - x_b
    }
    let mut terms: Vec<LogitTerm> = Vec::new();
    if k == 0 {
        let n10 = data
            .pairs()
            .iter()
            .filter(|p| p.discordant() && p.y_a())
            .count();
        let n01 = data.discordant_count() - n10;
        if n10 > 0 {
            terms.push(LogitTerm {
                weight: n10 as f64,
                y_a: true,
                dx_ab: Vec::new(),
            });
        }
        if n01 > 0 {
            terms.push(LogitTerm {
                weight: n01 as f64,
                y_a: false,
                dx_ab: Vec::new(),
            });
        }
    } else {
        for p in data.pairs().iter().filter(|p| p.discordant()) {
            terms.push(LogitTerm {
                weight: 1.0,
                y_a: p.y_a(),
                dx_ab: p.x_a().iter().zip(p.x_b()).map(|(a, b)| a - b).collect(),
            });
        }
    }

    let index = |flat: &[f64], t: &LogitTerm| -> f64 {
        flat[k] + dot(&flat[..k], &t.dx_ab)
    };
    let ll = |flat: &[f64]| -> f64 {
        terms
            .iter()
            .map(|t| {
                let m = index(flat, t);
                -t.weight * softplus(if t.y_a { -m } else { m })
            })
            .sum()
    };
    let grad = |flat: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; k + 1];
        for t in &terms {
            let m = index(flat, t);
            let p = 1.0 / (1.0 + (-m).exp());
            let c = t.weight * (f64::from(u8::from(t.y_a)) - p);
            for j in 0..k {
                g[j] += c * t.dx_ab[j];
            }
            g[k] += c;
        }
        g
    };

    let opts = FitOptions::default();
    let out = maximize(
        ll,
        grad,
        vec![0.0; k + 1],
        &OptimOptions {
            grad_tol: opts.grad_tol,
            step_tol: opts.step_tol,
            max_iterations: opts.max_iterations,
            bound: SEPARATION_BOUND,
            bound_dims: k + 1,
        },
    );
    if out.separated {
        return Err(Error::Separation);
    }
    let min_fitted = terms
        .iter()
        .map(|t| {
            let m = index(&out.x, t);
            1.0 / (1.0 + (if t.y_a { -m } else { m }).exp())
        })
        .fold(f64::INFINITY, f64::min);
    if min_fitted >= SEPARATION_PROB {
        return Err(Error::Separation);
    }

    Ok(EstimateResult {
        theta_hat: Theta::from_flat(&out.x),
        se: None,
        k_n: data.k_n(),
        loglik: out.value,
        iterations: out.iterations,
        converged: out.converged,
        identifiability: check_identifiability(data),
        warnings: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// IPW and the naive contrast
// ---------------------------------------------------------------------------

/// Individual-level view of the pairs; used only by the IPW estimator.
#[derive(Debug, Clone)]
pub struct UnpairedSample {
    records: Vec<(bool, Vec<f64>, bool)>, // (y, x, d)
    k: usize,
}

impl UnpairedSample {
    pub fn new(records: Vec<(bool, Vec<f64>, bool)>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::EmptyDataset);
        };
        let k = first.1.len();
        for r in &records {
            if r.1.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: r.1.len(),
                });
            }
        }
        Ok(Self { records, k })
    }

    /// Splits each pair into two records: A keeps d, B receives 1 - d.
    pub fn from_pairs(data: &Dataset) -> Self {
        let mut records = Vec::with_capacity(2 * data.len());
        for p in data.pairs() {
            records.push((p.y_a(), p.x_a().to_vec(), p.d()));
            records.push((p.y_b(), p.x_b().to_vec(), !p.d()));
        }
        Self {
            records,
            k: data.k(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[(bool, Vec<f64>, bool)] {
        &self.records
    }
}

// Newton-Raphson logistic regression of d on (1, x); returns coefficients
// with the intercept first.
fn fit_logistic_propensity(sample: &UnpairedSample) -> Result<Vec<f64>> {
    use nalgebra::{Cholesky, DMatrix, DVector};
    let n = sample.records.len();
    let p = sample.k + 1;
    let mut z = DMatrix::zeros(n, p);
    let mut d = DVector::zeros(n);
    for (i, (_, x, di)) in sample.records.iter().enumerate() {
        z[(i, 0)] = 1.0;
        for (j, v) in x.iter().enumerate() {
            z[(i, j + 1)] = *v;
        }
        d[i] = f64::from(u8::from(*di));
    }
    let mut coef = DVector::zeros(p);
    for _ in 0..100 {
        let eta = &z * &coef;
        let probs = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let score = z.transpose() * (&d - &probs);
        if score.amax() < 1e-8 {
            return Ok(coef.iter().copied().collect());
        }
        let w = probs.map(|pi| (pi * (1.0 - pi)).max(1e-12));
        let mut zw = z.clone();
        for i in 0..n {
            for j in 0..p {
                zw[(i, j)] *= w[i];
            }
        }
        let info = z.transpose() * zw;
        let Some(ch) = Cholesky::new(info) else {
            return Err(Error::PropensityDegenerate(
                "singular information matrix in the propensity fit".to_string(),
            ));
        };
        coef += ch.solve(&score);
        if coef.amax() > 30.0 {
            return Err(Error::PropensityDegenerate(
                "propensity model separates the treatment groups".to_string(),
            ));
        }
    }
    Err(Error::PropensityDegenerate(
        "propensity fit did not converge".to_string(),
    ))
}

/// Horvitz-Thompson inverse-probability-weighted ATE with a logistic
/// propensity model on the individual-level covariates; fitted propensities
/// are truncated to `opts.trim`.
pub fn ipw_ate(sample: &UnpairedSample, opts: &FitOptions) -> Result<f64> {
    let n_treated = sample.records.iter().filter(|r| r.2).count();
    if n_treated == 0 || n_treated == sample.records.len() {
        return Err(Error::PropensityDegenerate(
            "a treatment group is empty".to_string(),
        ));
    }
    let coef = fit_logistic_propensity(sample)?;
    let (lo, hi) = opts.trim;
    let n = sample.records.len() as f64;
    let mut treated_sum = 0.0;
    let mut control_sum = 0.0;
    for (y, x, d) in &sample.records {
        let eta = coef[0] + dot(&coef[1..], x);
        let e = (1.0 / (1.0 + (-eta).exp())).clamp(lo, hi);
        let yf = f64::from(u8::from(*y));
        if *d {
            treated_sum += yf / e;
        } else {
            control_sum += yf / (1.0 - e);
        }
    }
    Ok((treated_sum - control_sum) / n)
}

/// The difference-in-means contrast of treated and control outcomes,
/// averaged over pairs: (1/n) sum (y_a - y_b)(2d - 1). Always in [-1, 1].
pub fn naive_ate(data: &Dataset) -> f64 {
    let n = data.len() as f64;
    data.pairs()
        .iter()
        .map(|p| {
            let diff = f64::from(u8::from(p.y_a())) - f64::from(u8::from(p.y_b()));
            diff * if p.d() { 1.0 } else { -1.0 }
        })
        .sum::<f64>()
        / n
}

/// Population ATE when the group effect is N(mu_tau, sigma_tau^2), with
/// sigma_tau the standard deviation:
/// Phi((lambda - mu)/sqrt(1 + sigma^2)) - Phi(-mu/sqrt(1 + sigma^2)).
pub fn ate_closed_form_normal(lambda: f64, mu_tau: f64, sigma_tau: f64) -> f64 {
    let denom = (1.0 + sigma_tau * sigma_tau).sqrt();
    std_normal_cdf((lambda - mu_tau) / denom) - std_normal_cdf(-mu_tau / denom)
}

/// Population ATE under a two-component normal mixture for the group effect.
pub fn ate_closed_form_mixture(
    lambda: f64,
    p: f64,
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    sigma2: f64,
) -> f64 {
    p * ate_closed_form_normal(lambda, mu1, sigma1)
        + (1.0 - p) * ate_closed_form_normal(lambda, mu2, sigma2)
}

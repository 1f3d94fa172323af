//! Asymptotic variance plug-in, Wald tests, and treatment odds ratios
//! against a supplied group-effect law.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimateResult;
use crate::model::{conditional_loglik_grad, pair_index, Dataset, Theta};
use crate::model::{ln_one_minus_p, ln_p};
use crate::numerics::{g_log_derivative, k_value, std_normal_cdf, std_normal_pdf};

/// Law of the pair-level group effect tau.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TauDistribution {
    Uniform { low: f64, high: f64 },
    /// Parameterized by the variance, matching how scenario grids are quoted.
    Normal { mean: f64, variance: f64 },
    StudentT { df: f64 },
    Cauchy,
    NormalMixture {
        weight: f64,
        mean1: f64,
        variance1: f64,
        mean2: f64,
        variance2: f64,
    },
}

impl TauDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && high > low,
            Self::Normal { mean, variance } => mean.is_finite() && *variance >= 0.0,
            Self::StudentT { df } => *df > 0.0,
            Self::Cauchy => true,
            Self::NormalMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } => {
                (0.0..=1.0).contains(weight)
                    && mean1.is_finite()
                    && mean2.is_finite()
                    && *variance1 >= 0.0
                    && *variance2 >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDistribution(self.to_string()))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::{Cauchy, Distribution, StandardNormal, StudentT};
        match self {
            Self::Uniform { low, high } => rng.gen_range(*low..*high),
            Self::Normal { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Self::StudentT { df } => StudentT::new(*df).expect("validated df").sample(rng),
            Self::Cauchy => Cauchy::new(0.0, 1.0).expect("unit cauchy").sample(rng),
            Self::NormalMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } => {
                let z: f64 = StandardNormal.sample(rng);
                if rng.gen::<f64>() < *weight {
                    mean1 + variance1.sqrt() * z
                } else {
                    mean2 + variance2.sqrt() * z
                }
            }
        }
    }

    /// Parses the textual form used by scenario files and CLI flags:
    /// `uniform(a,b)`, `normal(mean,variance)`, `t(df)`, `cauchy`,
    /// `mixture(p,mean1,variance1,mean2,variance2)`.
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        let bad = || Error::InvalidDistribution(text.to_string());
        let (name, args) = match s.find('(') {
            Some(i) => {
                let inner = s[i + 1..].trim_end();
                let inner = inner.strip_suffix(')').ok_or_else(bad)?;
                let args: Vec<f64> = if inner.trim().is_empty() {
                    Vec::new()
                } else {
                    inner
                        .split(',')
                        .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                        .collect::<Result<_>>()?
                };
                (s[..i].trim().to_ascii_lowercase(), args)
            }
            None => (s.to_ascii_lowercase(), Vec::new()),
        };
        let dist = match (name.as_str(), args.as_slice()) {
            ("uniform", [a, b]) => Self::Uniform { low: *a, high: *b },
            ("normal", [m, v]) => Self::Normal {
                mean: *m,
                variance: *v,
            },
            ("t" | "student_t", [df]) => Self::StudentT { df: *df },
            ("cauchy", []) => Self::Cauchy,
            ("mixture" | "normal_mixture", [p, m1, v1, m2, v2]) => Self::NormalMixture {
                weight: *p,
                mean1: *m1,
                variance1: *v1,
                mean2: *m2,
                variance2: *v2,
            },
            _ => return Err(bad()),
        };
        dist.validate()?;
        Ok(dist)
    }
}

impl std::fmt::Display for TauDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            Self::Normal { mean, variance } => write!(f, "normal({mean},{variance})"),
            Self::StudentT { df } => write!(f, "t({df})"),
            Self::Cauchy => write!(f, "cauchy"),
            Self::NormalMixture {
                weight,
                mean1,
                variance1,
                mean2,
                variance2,
            } => write!(f, "mixture({weight},{mean1},{variance1},{mean2},{variance2})"),
        }
    }
}

/// Plug-in covariance for k_n (theta_hat - theta) and the derived standard
/// errors of theta_hat.
#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// c_hat * Sigma_hat^{-1}; symmetric positive semi-definite.
    pub covariance: DMatrix<f64>,
    /// Standard errors of theta_hat (beta components first, lambda last):
    /// sqrt(diag(covariance)) / k_n.
    pub se: Vec<f64>,
    pub c_hat: f64,
    pub sigma_hat_matrix: DMatrix<f64>,
}

const SIGMA_RANK_TOL: f64 = 1e-10;

/// Plug-in estimate of the asymptotic covariance: Sigma and c are sample
/// averages over all pairs (the expectations run over the covariate and
/// treatment law, not only the discordant pairs).
pub fn asymptotic_variance(theta_hat: &Theta, data: &Dataset) -> Result<InferenceResult> {
    let k = data.k();
    if theta_hat.beta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: theta_hat.beta.len(),
        });
    }
    if data.len() < k + 2 {
        return Err(Error::Precondition(format!(
            "need at least {} pairs for a {}-dimensional covariance",
            k + 2,
            k + 1
        )));
    }
    if data.discordant_count() == 0 {
        return Err(Error::NoDiscordantPairs);
    }

    let dim = k + 1;
    let n = data.len() as f64;
    let mut sigma = DMatrix::zeros(dim, dim);
    let mut c_hat = 0.0;
    for pair in data.pairs() {
        let s = pair_index(theta_hat, pair);
        let kv = k_value(s);
        c_hat += kv;
        // K (dp/dtheta)(dp/dtheta)' / (p(1-p)) = K p(1-p) D^2 grad_s grad_s'
        // with D = d/ds log(p/(1-p)) = G'(s)/G(s) + G'(-s)/G(-s).
        let d_logodds = g_log_derivative(s) + g_log_derivative(-s);
        let p_times_q = (ln_p(s) + ln_one_minus_p(s)).exp();
        let w = kv * p_times_q * d_logodds * d_logodds;
        let mut gs = DVector::zeros(dim);
        for j in 0..k {
            gs[j] = pair.x_b()[j] - pair.x_a()[j];
        }
        gs[k] = if pair.d() { -1.0 } else { 1.0 };
        sigma.ger(w, &gs, &gs, 1.0);
    }
    sigma /= n;
    c_hat /= n;

    let svd = sigma.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let min_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !(max_sv > 0.0) || min_sv <= SIGMA_RANK_TOL * max_sv {
        return Err(Error::SingularSigma);
    }
    let inv = sigma
        .clone()
        .try_inverse()
        .ok_or(Error::SingularSigma)?;
    let mut covariance = inv * c_hat;
    // Enforce exact symmetry lost to rounding in the inverse.
    for i in 0..dim {
        for j in 0..i {
            let avg = 0.5 * (covariance[(i, j)] + covariance[(j, i)]);
            covariance[(i, j)] = avg;
            covariance[(j, i)] = avg;
        }
    }
    let k_n = data.k_n();
    let se = (0..dim)
        .map(|j| covariance[(j, j)].max(0.0).sqrt() / k_n)
        .collect();
    Ok(InferenceResult {
        covariance,
        se,
        c_hat,
        sigma_hat_matrix: sigma,
    })
}

/// Standard errors from the observed information of the conditional
/// log-likelihood (inverse negative Hessian at theta_hat). Reported next to
/// the plug-in values when the two disagree.
pub fn observed_info_se(theta_hat: &Theta, data: &Dataset) -> Result<Vec<f64>> {
    let dim = theta_hat.dim();
    let flat = theta_hat.flat();
    let g0 = conditional_loglik_grad(theta_hat, data)?;
    let mut hess = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let h = 1e-6 * (1.0 + flat[j].abs());
        let mut up = flat.clone();
        up[j] += h;
        let gp = conditional_loglik_grad(&Theta::from_flat(&up), data)?;
        for i in 0..dim {
            hess[(i, j)] = (gp[i] - g0[i]) / h;
        }
    }
    for i in 0..dim {
        for j in 0..i {
            let avg = 0.5 * (hess[(i, j)] + hess[(j, i)]);
            hess[(i, j)] = avg;
            hess[(j, i)] = avg;
        }
    }
    let info = -hess;
    let inv = info.try_inverse().ok_or(Error::SingularSigma)?;
    Ok((0..dim).map(|j| inv[(j, j)].max(0.0).sqrt()).collect())
}

/// Two-sided Wald test of theta_j = 0: z = theta_j / se_j,
/// p = 2 (1 - Phi(|z|)).
pub fn wald_test(
    estimate: &EstimateResult,
    inference: &InferenceResult,
    component: usize,
) -> Result<(f64, f64)> {
    let flat = estimate.theta_hat.flat();
    if component >= flat.len() || component >= inference.se.len() {
        return Err(Error::Precondition(format!(
            "component {component} out of range for a {}-parameter fit",
            flat.len()
        )));
    }
    let se = inference.se[component];
    if !(se > 0.0) {
        return Err(Error::Precondition(
            "standard error is not positive".to_string(),
        ));
    }
    let z = flat[component] / se;
    let p = 2.0 * (1.0 - std_normal_cdf(z.abs()));
    Ok((z, p))
}

/// Odds of success under treatment vs control at the same group effect:
/// integral of Phi(tau + lambda) f(tau) over integral of Phi(tau) f(tau).
///
/// Exact closed forms for normal, mixture and uniform laws; Student-t and
/// Cauchy use tangent-substitution adaptive quadrature (the density
/// normalizer cancels in the ratio).
pub fn treatment_odds(lambda: f64, tau: &TauDistribution) -> Result<f64> {
    if !lambda.is_finite() {
        return Err(Error::NonFinite { what: "lambda" });
    }
    tau.validate()?;
    let normal_mean = |shift: f64, mean: f64, variance: f64| {
        std_normal_cdf((shift + mean) / (1.0 + variance).sqrt())
    };
    match tau {
        TauDistribution::Normal { mean, variance } => {
            Ok(normal_mean(lambda, *mean, *variance) / normal_mean(0.0, *mean, *variance))
        }
        TauDistribution::NormalMixture {
            weight,
            mean1,
            variance1,
            mean2,
            variance2,
        } => {
            let mix = |shift: f64| {
                weight * normal_mean(shift, *mean1, *variance1)
                    + (1.0 - weight) * normal_mean(shift, *mean2, *variance2)
            };
            Ok(mix(lambda) / mix(0.0))
        }
        TauDistribution::Uniform { low, high } => {
            // integral of Phi is z Phi(z) + phi(z).
            let big_phi = |z: f64| z * std_normal_cdf(z) + std_normal_pdf(z);
            let mean_over = |shift: f64| (big_phi(high + shift) - big_phi(low + shift)) / (high - low);
            Ok(mean_over(lambda) / mean_over(0.0))
        }
        TauDistribution::StudentT { df } => odds_by_quadrature(lambda, *df),
        TauDistribution::Cauchy => odds_by_quadrature(lambda, 1.0),
    }
}

// E[Phi(tau + shift)] up to the density normalizer, via tau = sqrt(df) tan(u).
fn odds_by_quadrature(lambda: f64, df: f64) -> Result<f64> {
    let scale = df.sqrt();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mean_over = |shift: f64| {
        let f = |u: f64| u.cos().powf(df - 1.0) * std_normal_cdf(scale * u.tan() + shift);
        adaptive_simpson(&f, -half_pi, half_pi, 1e-11)
    };
    Ok(mean_over(lambda)? / mean_over(0.0)?)
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(h: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
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
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(m - a, fa, flm, fm);
        let right = simpson(b - m, fm, frm, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::NonIntegrable);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    rec(f, a, b, fa, fm, fb, simpson(b - a, fa, fm, fb), tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_conditional_mle, FitOptions};
    use crate::model::MatchedPair;
    use crate::numerics::{gauss_hermite, SQRT_PI};

    fn k0_dataset(n10: usize, n01: usize, n11: usize) -> Dataset {
        let mut pairs = Vec::new();
        for _ in 0..n10 {
            pairs.push(MatchedPair::no_covariates(true, false, true));
        }
        for _ in 0..n01 {
            pairs.push(MatchedPair::no_covariates(false, true, true));
        }
        for _ in 0..n11 {
            pairs.push(MatchedPair::no_covariates(true, true, true));
        }
        Dataset::new(pairs).unwrap()
    }

    #[test]
    fn scalar_sigma_hand_value_at_zero() {
        // k = 0, lambda = 0: p = 1/2, K = 2, dp/dlambda = sqrt(pi)/4, so
        // Sigma = pi/2, c = 2, covariance = 4/pi.
        let data = k0_dataset(4, 4, 2);
        let theta = Theta::zero(0);
        let inf = asymptotic_variance(&theta, &data).unwrap();
        assert!((inf.sigma_hat_matrix[(0, 0)] - std::f64::consts::PI / 2.0).abs() < 1e-12);
        assert!((inf.c_hat - 2.0).abs() < 1e-12);
        let want_cov = 4.0 / std::f64::consts::PI;
        assert!((inf.covariance[(0, 0)] - want_cov).abs() < 1e-12);
        let want_se = want_cov.sqrt() / (8.0f64).sqrt();
        assert!((inf.se[0] - want_se).abs() < 1e-12);
    }

    #[test]
    fn plug_in_matches_binomial_curvature() {
        // With k = 0 and every pair treated, both variance routes reduce to
        // p(1-p) / (k_n^2 p'(s)^2); they must agree.
        let data = k0_dataset(12, 2, 17);
        let fit = fit_conditional_mle(&data, &FitOptions::default()).unwrap();
        let plug = asymptotic_variance(&fit.theta_hat, &data).unwrap();
        let obs = observed_info_se(&fit.theta_hat, &data).unwrap();
        assert!(
            (plug.se[0] - obs[0]).abs() < 1e-5 * plug.se[0],
            "{} vs {}",
            plug.se[0],
            obs[0]
        );
    }

    #[test]
    fn duplication_halves_standard_errors() {
        let base = k0_dataset(9, 3, 5);
        let theta = Theta::new(vec![], 0.4).unwrap();
        let inf1 = asymptotic_variance(&theta, &base).unwrap();
        let mut pairs = base.pairs().to_vec();
        for _ in 0..3 {
            pairs.extend(base.pairs().iter().cloned());
        }
        let quad = Dataset::new(pairs).unwrap();
        let inf4 = asymptotic_variance(&theta, &quad).unwrap();
        assert!((inf4.c_hat - inf1.c_hat).abs() < 1e-12);
        assert!(
            (inf4.covariance[(0, 0)] - inf1.covariance[(0, 0)]).abs()
                < 1e-12 * inf1.covariance[(0, 0)]
        );
        assert!((inf4.se[0] - 0.5 * inf1.se[0]).abs() < 1e-12);
    }

    #[test]
    fn covariance_symmetric_nonnegative_diagonal() {
        let pairs = vec![
            MatchedPair::new(true, false, true, vec![0.1], vec![0.9]).unwrap(),
            MatchedPair::new(false, true, false, vec![-0.2], vec![0.4]).unwrap(),
            MatchedPair::new(true, false, false, vec![0.8], vec![-0.3]).unwrap(),
            MatchedPair::new(false, false, true, vec![0.5], vec![0.5]).unwrap(),
        ];
        let data = Dataset::new(pairs).unwrap();
        let theta = Theta::new(vec![0.2], -0.1).unwrap();
        let inf = asymptotic_variance(&theta, &data).unwrap();
        for i in 0..2 {
            assert!(inf.covariance[(i, i)] >= 0.0);
            for j in 0..2 {
                assert_eq!(inf.covariance[(i, j)], inf.covariance[(j, i)]);
            }
        }
    }

    #[test]
    fn singular_sigma_detected() {
        // One covariate that never varies within pairs and identical
        // treatment rows make Sigma singular.
        let pairs = vec![
            MatchedPair::new(true, false, true, vec![1.0], vec![1.0]).unwrap(),
            MatchedPair::new(false, true, true, vec![2.0], vec![2.0]).unwrap(),
            MatchedPair::new(true, false, true, vec![0.5], vec![0.5]).unwrap(),
        ];
        let data = Dataset::new(pairs).unwrap();
        let theta = Theta::new(vec![0.0], 0.0).unwrap();
        assert!(matches!(
            asymptotic_variance(&theta, &data),
            Err(Error::SingularSigma)
        ));
    }

    #[test]
    fn wald_test_values() {
        let data = k0_dataset(9, 3, 2);
        let fit = fit_conditional_mle(&data, &FitOptions::default()).unwrap();
        let inf = asymptotic_variance(&fit.theta_hat, &data).unwrap();
        let (z, p) = wald_test(&fit, &inf, 0).unwrap();
        assert!((z - fit.theta_hat.lambda / inf.se[0]).abs() < 1e-14);
        assert!((p - 2.0 * (1.0 - std_normal_cdf(z.abs()))).abs() < 1e-15);
        assert!(wald_test(&fit, &inf, 5).is_err());
    }

    #[test]
    fn wald_arithmetic_examples() {
        // z = 0.617 / sqrt(0.1377) and z = 0.9992 / sqrt(0.1733).
        let z1: f64 = 0.617 / 0.1377f64.sqrt();
        assert!((z1 - 1.6627).abs() < 1e-3);
        assert!((2.0 * (1.0 - std_normal_cdf(z1)) - 0.0963).abs() < 5e-4);
        let z2: f64 = 0.9992 / 0.1733f64.sqrt();
        assert!((z2 - 2.4003).abs() < 1e-3);
        assert!((2.0 * (1.0 - std_normal_cdf(z2)) - 0.0164).abs() < 5e-4);
    }

    #[test]
    fn odds_identity_at_zero() {
        let laws = [
            TauDistribution::Normal {
                mean: 0.3,
                variance: 2.0,
            },
            TauDistribution::Uniform {
                low: -4.0,
                high: 4.0,
            },
            TauDistribution::Cauchy,
            TauDistribution::StudentT { df: 3.0 },
            TauDistribution::NormalMixture {
                weight: 0.5,
                mean1: -6.0,
                variance1: 9.0,
                mean2: 6.0,
                variance2: 9.0,
            },
        ];
        for law in laws {
            assert_eq!(treatment_odds(0.0, &law).unwrap(), 1.0, "{law}");
        }
    }

    #[test]
    fn odds_monotone_in_lambda() {
        let laws = [
            TauDistribution::Normal {
                mean: 0.0,
                variance: 0.5,
            },
            TauDistribution::Cauchy,
            TauDistribution::Uniform {
                low: -2.0,
                high: 2.0,
            },
        ];
        for law in laws {
            let mut prev = treatment_odds(-1.5, &law).unwrap();
            for i in 1..=10 {
                let l = -1.5 + 0.3 * f64::from(i);
                let cur = treatment_odds(l, &law).unwrap();
                assert!(cur > prev, "{law} at {l}");
                prev = cur;
            }
        }
    }

    #[test]
    fn normal_odds_match_quadrature() {
        // Closed-form identity against a 64-node Gauss-Hermite evaluation.
        let rule = gauss_hermite(64).unwrap();
        for &(mean, variance) in &[(0.0, 0.1257), (0.4, 1.0), (-0.7, 3.0)] {
            for &lambda in &[0.25, 0.9992, 2.0] {
                let sd = f64::sqrt(variance);
                let gh = |shift: f64| {
                    rule.integrate(|t| {
                        std_normal_cdf(mean + std::f64::consts::SQRT_2 * sd * t + shift)
                    }) / SQRT_PI
                };
                let quad = gh(lambda) / gh(0.0);
                let law = TauDistribution::Normal { mean, variance };
                let closed = treatment_odds(lambda, &law).unwrap();
                assert!(
                    (quad - closed).abs() <= 1e-10,
                    "mean={mean} var={variance} lambda={lambda}: {quad} vs {closed}"
                );
            }
        }
    }

    #[test]
    fn student_t_odds_against_dense_grid() {
        // Independent oracle: brute-force Riemann sum on the tangent scale.
        let df = 3.0;
        let lambda = 0.8;
        let n = 400_000;
        let h = std::f64::consts::PI / n as f64;
        let brute = |shift: f64| {
            let mut acc = 0.0;
            for i in 0..n {
                let u = -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h;
                acc += u.cos().powf(df - 1.0)
                    * std_normal_cdf(df.sqrt() * u.tan() + shift)
                    * h;
            }
            acc
        };
        let want = brute(lambda) / brute(0.0);
        let got = treatment_odds(lambda, &TauDistribution::StudentT { df }).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn tau_parse_roundtrip() {
        let cases = [
            "uniform(-4,4)",
            "normal(0,3.2899)",
            "t(1)",
            "cauchy",
            "mixture(0.5,-6,9,6,9)",
        ];
        for c in cases {
            let d = TauDistribution::parse(c).unwrap();
            let again = TauDistribution::parse(&d.to_string()).unwrap();
            assert_eq!(d, again, "{c}");
        }
        assert!(TauDistribution::parse("normal(0)").is_err());
        assert!(TauDistribution::parse("uniform(4,-4)").is_err());
        assert!(TauDistribution::parse("gamma(2,3)").is_err());
        assert!(TauDistribution::parse("t(0)").is_err());
    }
}

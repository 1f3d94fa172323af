//! Matched-pair domain types, the discordant-pair conditional probability,
//! and the identifiability diagnostics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    g_function, g_log_derivative, k_log_derivative, k_value, ln_g, SQRT_PI,
};

/// One matched pair: subject A receives treatment `d`, subject B receives
/// `1 - d`. Covariate vectors share the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    y_a: bool,
    y_b: bool,
    d: bool,
    x_a: Vec<f64>,
    x_b: Vec<f64>,
}

impl MatchedPair {
    pub fn new(y_a: bool, y_b: bool, d: bool, x_a: Vec<f64>, x_b: Vec<f64>) -> Result<Self> {
        if x_a.len() != x_b.len() {
            return Err(Error::DimensionMismatch {
                expected: x_a.len(),
                got: x_b.len(),
            });
        }
        if x_a.iter().chain(&x_b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "covariates" });
        }
        Ok(Self { y_a, y_b, d, x_a, x_b })
    }

    pub fn no_covariates(y_a: bool, y_b: bool, d: bool) -> Self {
        Self {
            y_a,
            y_b,
            d,
            x_a: Vec::new(),
            x_b: Vec::new(),
        }
    }

    pub fn y_a(&self) -> bool {
        self.y_a
    }

    pub fn y_b(&self) -> bool {
        self.y_b
    }

    pub fn d(&self) -> bool {
        self.d
    }

    pub fn x_a(&self) -> &[f64] {
        &self.x_a
    }

    pub fn x_b(&self) -> &[f64] {
        &self.x_b
    }

    pub fn dim(&self) -> usize {
        self.x_a.len()
    }

    /// Exactly one positive outcome in the pair.
    pub fn discordant(&self) -> bool {
        self.y_a != self.y_b
    }

    /// The same pair with the roles of A and B exchanged (outcomes and
    /// covariates swapped, treatment complemented).
    pub fn swapped(&self) -> Self {
        Self {
            y_a: self.y_b,
            y_b: self.y_a,
            d: !self.d,
            x_a: self.x_b.clone(),
            x_b: self.x_a.clone(),
        }
    }

    /// x_b - x_a.
    pub fn covariate_difference(&self) -> Vec<f64> {
        self.x_b
            .iter()
            .zip(&self.x_a)
            .map(|(b, a)| b - a)
            .collect()
    }
}

/// An ordered collection of matched pairs with a common covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pairs: Vec<MatchedPair>,
    k: usize,
}

impl Dataset {
    pub fn new(pairs: Vec<MatchedPair>) -> Result<Self> {
        let Some(first) = pairs.first() else {
            return Err(Error::EmptyDataset);
        };
        let k = first.dim();
        for p in &pairs {
            if p.dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: p.dim(),
                });
            }
        }
        Ok(Self { pairs, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[MatchedPair] {
        &self.pairs
    }

    pub fn discordant_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.discordant()).count()
    }

    /// k_n = sqrt(discordant count), the Theorem-3 convergence rate.
    pub fn k_n(&self) -> f64 {
        (self.discordant_count() as f64).sqrt()
    }

    /// Every pair with A and B exchanged; the conditional likelihood is
    /// invariant under this relabeling.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(MatchedPair::swapped).collect(),
            k: self.k,
        }
    }
}

/// Parameter point theta = (beta', lambda)'.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theta {
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl Theta {
    pub fn new(beta: Vec<f64>, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite { what: "theta" });
        }
        Ok(Self { beta, lambda })
    }

    pub fn zero(k: usize) -> Self {
        Self {
            beta: vec![0.0; k],
            lambda: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len() + 1
    }

    pub(crate) fn from_flat(v: &[f64]) -> Self {
        let (beta, lambda) = v.split_at(v.len() - 1);
        Self {
            beta: beta.to_vec(),
            lambda: lambda[0],
        }
    }

    pub(crate) fn flat(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.lambda);
        v
    }
}

fn check_dims(theta: &Theta, k: usize) -> Result<()> {
    if theta.beta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: theta.beta.len(),
        });
    }
    Ok(())
}

/// The linear index s = lambda (1 - 2d) + beta' (x_b - x_a).
pub(crate) fn pair_index(theta: &Theta, pair: &MatchedPair) -> f64 {
    let mut s = theta.lambda * if pair.d { -1.0 } else { 1.0 };
    for ((b, xb), xa) in theta.beta.iter().zip(&pair.x_b).zip(&pair.x_a) {
        s += b * (xb - xa);
    }
    s
}

// log p and log(1-p) with p = G(s)/(G(s) + G(-s)), stable for any s.
pub(crate) fn ln_p(s: f64) -> f64 {
    ln_g(s) - k_value(s).ln()
}

pub(crate) fn ln_one_minus_p(s: f64) -> f64 {
    ln_g(-s) - k_value(s).ln()
}

// d/ds of the two logs above.
pub(crate) fn dlog_p(s: f64) -> f64 {
    g_log_derivative(s) - k_log_derivative(s)
}

pub(crate) fn dlog_one_minus_p(s: f64) -> f64 {
    -g_log_derivative(-s) - k_log_derivative(s)
}

pub(crate) fn prob_from_index(s: f64) -> f64 {
    if s >= 0.0 {
        let g = g_function(s);
        let p = g / (2.0 * g + SQRT_PI * s);
        // G underflows past s ~ 55; keep the output strictly positive.
        p.max(1e-300)
    } else {
        // Cap at the predecessor of 1 so the output stays strictly interior
        // even where the complement is below resolution.
        (1.0 - prob_from_index(-s)).min(1.0 - f64::EPSILON / 2.0)
    }
}

/// Probability that the discordant outcome is (Y_A, Y_B) = (1, 0):
/// G(s) / (G(s) + G(-s)) with s = lambda (1 - 2d) + beta'(x_b - x_a).
pub fn conditional_prob(theta: &Theta, pair: &MatchedPair) -> Result<f64> {
    check_dims(theta, pair.dim())?;
    Ok(prob_from_index(pair_index(theta, pair)))
}

/// K(theta; x_a, x_b, d) = G(s) + G(-s), the normalizer of the two
/// single-integral terms; always positive.
pub fn k_integral(theta: &Theta, pair: &MatchedPair) -> Result<f64> {
    check_dims(theta, pair.dim())?;
    let s = pair_index(theta, pair);
    Ok(g_function(s) + g_function(-s))
}

/// Conditional log-likelihood: discordant pairs contribute
/// y_a log p + y_b log(1-p); concordant pairs contribute exactly zero.
pub fn conditional_loglik(theta: &Theta, data: &Dataset) -> Result<f64> {
    check_dims(theta, data.k())?;
    if data.discordant_count() == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    let mut ll = 0.0;
    for pair in data.pairs() {
        if !pair.discordant() {
            continue;
        }
        let s = pair_index(theta, pair);
        ll += if pair.y_a() { ln_p(s) } else { ln_one_minus_p(s) };
    }
    Ok(ll)
}

/// Analytic score of the conditional log-likelihood, ordered (beta, lambda).
pub fn conditional_loglik_grad(theta: &Theta, data: &Dataset) -> Result<Vec<f64>> {
    check_dims(theta, data.k())?;
    if data.discordant_count() == 0 {
        return Err(Error::NoDiscordantPairs);
    }
    let k = data.k();
    let mut grad = vec![0.0; k + 1];
    for pair in data.pairs() {
        if !pair.discordant() {
            continue;
        }
        let s = pair_index(theta, pair);
        let c = if pair.y_a() { dlog_p(s) } else { dlog_one_minus_p(s) };
        for j in 0..k {
            grad[j] += c * (pair.x_b[j] - pair.x_a[j]);
        }
        grad[k] += c * if pair.d { -1.0 } else { 1.0 };
    }
    Ok(grad)
}

/// Theorem-1 diagnostics. Advisory: fits run regardless and attach this.
#[derive(Debug, Clone, Serialize)]
pub struct IdentifiabilityReport {
    /// Condition (a): the discordant covariate differences span R^k.
    pub rank_ok: bool,
    /// Condition (b) or its treated-group analogue (b').
    pub cone_ok: bool,
    pub discordant_count: usize,
    pub details: String,
}

const RANK_TOL: f64 = 1e-8;
const CONE_TOL: f64 = 1e-9;

/// Checks the uniqueness conditions for the conditional MLE: the rank of the
/// discordant covariate differences, and the existence of a difference in one
/// treatment group expressible as a non-positive combination of the others.
pub fn check_identifiability(data: &Dataset) -> IdentifiabilityReport {
    let k = data.k();
    let disc = data.discordant_count();
    if k == 0 {
        let ok = disc >= 1;
        return IdentifiabilityReport {
            rank_ok: ok,
            cone_ok: ok,
            discordant_count: disc,
            details: if ok {
                "no covariates: conditions hold vacuously".to_string()
            } else {
                "no discordant pairs: lambda is not identified".to_string()
            },
        };
    }

    let rows: Vec<Vec<f64>> = data
        .pairs()
        .iter()
        .filter(|p| p.discordant())
        .map(MatchedPair::covariate_difference)
        .collect();
    let rank = if rows.is_empty() {
        0
    } else {
        let m = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
        let sv = m.singular_values();
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        sv.iter().filter(|&&s| s > RANK_TOL * max).count()
    };
    let rank_ok = rank == k;

    let group = |treated: bool| -> Vec<Vec<f64>> {
        data.pairs()
            .iter()
            .filter(|p| p.d() == treated)
            .map(MatchedPair::covariate_difference)
            .collect()
    };
    let cone_control = cone_condition(&group(false));
    let cone_ok = cone_control || cone_condition(&group(true));

    IdentifiabilityReport {
        rank_ok,
        cone_ok,
        discordant_count: disc,
        details: format!(
            "rank {rank} of {k} over {disc} discordant pairs; cone condition {} (control group: {})",
            if cone_ok { "holds" } else { "fails" },
            cone_control
        ),
    }
}

// Does some difference in the group equal a non-positive combination of the
// others? Checked per candidate j by a phase-one feasibility solve.
fn cone_condition(diffs: &[Vec<f64>]) -> bool {
    (0..diffs.len()).any(|j| {
        let others: Vec<&[f64]> = diffs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, v)| v.as_slice())
            .collect();
        nonpositive_combination_exists(&others, &diffs[j])
    })
}

// Feasibility of target = sum d_i v_i with all d_i <= 0, i.e. of
// A t = target with t >= 0 and columns A_i = -v_i. Plain phase-one simplex
// with Bland's rule.
fn nonpositive_combination_exists(vectors: &[&[f64]], target: &[f64]) -> bool {
    let k = target.len();
    if target.iter().all(|v| v.abs() <= CONE_TOL) {
        // The zero difference is the trivial all-zero combination.
        return true;
    }
    let m = vectors.len();
    if m == 0 {
        return false;
    }

    // Tableau rows 0..k hold [A | I | b] with b >= 0 after sign flips;
    // the last row prices the artificial basis (minimize their sum).
    let cols = m + k + 1;
    let mut t = vec![vec![0.0f64; cols]; k + 1];
    for i in 0..k {
        let flip = if target[i] < 0.0 { -1.0 } else { 1.0 };
        for (j, v) in vectors.iter().enumerate() {
            t[i][j] = flip * -v[i];
        }
        t[i][m + i] = 1.0;
        t[i][cols - 1] = flip * target[i];
    }
    for j in 0..cols {
        let s: f64 = (0..k).map(|i| t[i][j]).sum();
        t[k][j] = if j < m { -s } else if j < m + k { 0.0 } else { -s };
    }

    let mut basis: Vec<usize> = (m..m + k).collect();
    let max_pivots = 50 * (m + k + 1);
    for _ in 0..max_pivots {
        // Bland: smallest-index column with a negative reduced cost.
        let Some(enter) = (0..m + k).find(|&j| t[k][j] < -CONE_TOL) else {
            return t[k][cols - 1] >= -CONE_TOL;
        };
        let mut leave = None;
        let mut best = f64::INFINITY;
        for (i, row) in t.iter().enumerate().take(k) {
            if row[enter] > CONE_TOL {
                let ratio = row[cols - 1] / row[enter];
                if ratio < best - CONE_TOL || (ratio < best + CONE_TOL && leave.is_none()) {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return false;
        };
        let piv = t[r][enter];
        for v in t[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..=k {
            if i != r {
                let f = t[i][enter];
                if f != 0.0 {
                    for j in 0..cols {
                        t[i][j] -= f * t[r][j];
                    }
                }
            }
        }
        basis[r] = enter;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_k0(y_a: bool, y_b: bool, d: bool) -> MatchedPair {
        MatchedPair::no_covariates(y_a, y_b, d)
    }

    fn pair_k1(y_a: bool, y_b: bool, d: bool, x_a: f64, x_b: f64) -> MatchedPair {
        MatchedPair::new(y_a, y_b, d, vec![x_a], vec![x_b]).unwrap()
    }

    #[test]
    fn prob_at_origin_is_half() {
        let theta = Theta::zero(0);
        let p = conditional_prob(&theta, &pair_k0(true, false, true)).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn prob_flipping_treatment_complements() {
        let theta = Theta::new(vec![], 0.8).unwrap();
        let p1 = conditional_prob(&theta, &pair_k0(true, false, true)).unwrap();
        let p0 = conditional_prob(&theta, &pair_k0(true, false, false)).unwrap();
        assert_eq!(p1 + p0, 1.0);
    }

    #[test]
    fn prob_matches_g_ratio_at_one() {
        let theta = Theta::new(vec![1.0], 0.0).unwrap();
        let pair = pair_k1(true, false, false, 0.0, 1.0); // s = 1
        let p = conditional_prob(&theta, &pair).unwrap();
        let want = g_function(1.0) / (g_function(1.0) + g_function(-1.0));
        assert!((p - want).abs() < 1e-15);
    }

    #[test]
    fn prob_dimension_mismatch() {
        let theta = Theta::new(vec![1.0, 2.0], 0.0).unwrap();
        assert!(matches!(
            conditional_prob(&theta, &pair_k0(true, false, true)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn k_integral_identities() {
        let theta = Theta::new(vec![0.5], 0.7).unwrap();
        for xb in [-3.0, -0.2, 0.0, 1.4, 6.0] {
            let pair = pair_k1(true, false, false, 0.0, xb);
            let s = 0.7 + 0.5 * xb;
            let k = k_integral(&theta, &pair).unwrap();
            assert!(k > 0.0);
            let via_identity = 2.0 * g_function(s) + SQRT_PI * s;
            assert!((k - via_identity).abs() <= 1e-12 * k, "s={s}");
        }
        let theta0 = Theta::zero(0);
        assert!((k_integral(&theta0, &pair_k0(true, true, true)).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn loglik_requires_discordance() {
        let data = Dataset::new(vec![pair_k0(true, true, true), pair_k0(false, false, false)])
            .unwrap();
        assert!(matches!(
            conditional_loglik(&Theta::zero(0), &data),
            Err(Error::NoDiscordantPairs)
        ));
    }

    #[test]
    fn loglik_at_zero_counts_discordant() {
        let data = Dataset::new(vec![
            pair_k0(true, false, true),
            pair_k0(false, true, true),
            pair_k0(true, true, false),
            pair_k0(true, false, false),
        ])
        .unwrap();
        let ll = conditional_loglik(&Theta::zero(0), &data).unwrap();
        assert!((ll - 3.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!(ll <= 0.0);
    }

    #[test]
    fn loglik_hand_evaluated_counts() {
        // k = 0, all d = 1: n10 log p + n01 log(1-p) with p = G(-l)/(G(-l)+G(l)).
        let lambda = 0.9;
        let mut pairs = Vec::new();
        for _ in 0..7 {
            pairs.push(pair_k0(true, false, true));
        }
        for _ in 0..2 {
            pairs.push(pair_k0(false, true, true));
        }
        let data = Dataset::new(pairs).unwrap();
        let theta = Theta::new(vec![], lambda).unwrap();
        let p = g_function(-lambda) / (g_function(-lambda) + g_function(lambda));
        let want = 7.0 * p.ln() + 2.0 * (1.0 - p).ln();
        let got = conditional_loglik(&theta, &data).unwrap();
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn loglik_ignores_concordant_pairs() {
        let theta = Theta::new(vec![0.3], -0.4).unwrap();
        let base = vec![
            pair_k1(true, false, true, 0.1, 0.9),
            pair_k1(false, true, false, -0.5, 0.2),
        ];
        let mut padded = base.clone();
        padded.push(pair_k1(true, true, true, 3.0, -2.0));
        padded.push(pair_k1(false, false, false, 1.0, 1.0));
        let d1 = Dataset::new(base).unwrap();
        let d2 = Dataset::new(padded).unwrap();
        let l1 = conditional_loglik(&theta, &d1).unwrap();
        let l2 = conditional_loglik(&theta, &d2).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(
            conditional_loglik_grad(&theta, &d1).unwrap(),
            conditional_loglik_grad(&theta, &d2).unwrap()
        );
    }

    #[test]
    fn score_vanishes_for_balanced_data() {
        let data = Dataset::new(vec![
            pair_k0(true, false, true),
            pair_k0(false, true, true),
        ])
        .unwrap();
        let g = conditional_loglik_grad(&Theta::zero(0), &data).unwrap();
        assert!(g[0].abs() < 1e-15);
    }

    fn fd_grad(theta: &Theta, data: &Dataset) -> Vec<f64> {
        let flat = theta.flat();
        (0..flat.len())
            .map(|j| {
                let h = 1e-6 * (1.0 + flat[j].abs());
                let mut up = flat.clone();
                up[j] += h;
                let mut dn = flat.clone();
                dn[j] -= h;
                let lu = conditional_loglik(&Theta::from_flat(&up), data).unwrap();
                let ld = conditional_loglik(&Theta::from_flat(&dn), data).unwrap();
                (lu - ld) / (2.0 * h)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn grad_matches_finite_differences(
            lambda in -2.0f64..2.0,
            beta in -2.0f64..2.0,
            seedlike in 0u64..1000,
        ) {
            let mut pairs = Vec::new();
            let mut state = seedlike.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            for _ in 0..25 {
                let y_a = next() < 0.5;
                let y_b = next() < 0.5;
                let d = next() < 0.5;
                let x_a = 4.0 * next() - 2.0;
                let x_b = 4.0 * next() - 2.0;
                pairs.push(pair_k1(y_a, y_b, d, x_a, x_b));
            }
            pairs.push(pair_k1(true, false, true, 0.0, 1.0));
            let data = Dataset::new(pairs).unwrap();
            let theta = Theta::new(vec![beta], lambda).unwrap();
            let analytic = conditional_loglik_grad(&theta, &data).unwrap();
            let numeric = fd_grad(&theta, &data);
            for (a, n) in analytic.iter().zip(&numeric) {
                let scale = a.abs().max(1e-4);
                prop_assert!((a - n).abs() <= 1e-6 * scale, "{a} vs {n}");
            }
        }

        // |s| stays below ~9 here so the complement is representable and the
        // two probabilities sum to exactly one.
        #[test]
        fn prob_swap_symmetry(
            lambda in -5.0f64..5.0,
            beta in -2.0f64..2.0,
            xa in -1.0f64..1.0,
            xb in -1.0f64..1.0,
            d in proptest::bool::ANY,
        ) {
            let theta = Theta::new(vec![beta], lambda).unwrap();
            let pair = pair_k1(true, false, d, xa, xb);
            let p = conditional_prob(&theta, &pair).unwrap();
            let q = conditional_prob(&theta, &pair.swapped()).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert_eq!(p + q, 1.0);
        }

        #[test]
        fn prob_strictly_interior_even_far_out(s_raw in -200.0f64..200.0) {
            let theta = Theta::new(vec![], s_raw.abs().min(60.0)).unwrap();
            let pair = pair_k0(true, false, s_raw < 0.0);
            let p = conditional_prob(&theta, &pair).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn identifiability_k0() {
        let data = Dataset::new(vec![pair_k0(true, false, true)]).unwrap();
        let rep = check_identifiability(&data);
        assert!(rep.rank_ok && rep.cone_ok);
        assert_eq!(rep.discordant_count, 1);

        let conc = Dataset::new(vec![pair_k0(true, true, true)]).unwrap();
        let rep = check_identifiability(&conc);
        assert!(!rep.rank_ok && !rep.cone_ok);
    }

    #[test]
    fn identifiability_cone_hand_case() {
        // Differences +1 and -1, both d = 0: -1 = (-1) * (+1), so the cone
        // condition holds.
        let data = Dataset::new(vec![
            pair_k1(true, false, false, 0.0, 1.0),
            pair_k1(false, true, false, 0.0, -1.0),
        ])
        .unwrap();
        let rep = check_identifiability(&data);
        assert!(rep.rank_ok);
        assert!(rep.cone_ok);

        // Both differences +1: no non-positive combination reproduces +1.
        let one_sided = Dataset::new(vec![
            pair_k1(true, false, false, 0.0, 1.0),
            pair_k1(false, true, false, 0.0, 1.0),
        ])
        .unwrap();
        let rep = check_identifiability(&one_sided);
        assert!(rep.rank_ok);
        assert!(!rep.cone_ok);
    }

    #[test]
    fn identifiability_zero_difference_counts() {
        let data = Dataset::new(vec![
            pair_k1(true, false, false, 1.0, 1.0),
            pair_k1(false, true, false, 0.0, 2.0),
        ])
        .unwrap();
        assert!(check_identifiability(&data).cone_ok);
    }

    #[test]
    fn identifiability_rank_deficient() {
        // Two covariates but every discordant difference on one ray.
        let mk = |y_a, xb1: f64, xb2: f64| {
            MatchedPair::new(y_a, !y_a, true, vec![0.0, 0.0], vec![xb1, xb2]).unwrap()
        };
        let data = Dataset::new(vec![mk(true, 1.0, 2.0), mk(false, 2.0, 4.0), mk(true, -1.0, -2.0)])
            .unwrap();
        let rep = check_identifiability(&data);
        assert!(!rep.rank_ok);
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(Dataset::new(vec![]), Err(Error::EmptyDataset)));
        let mixed = Dataset::new(vec![
            pair_k0(true, false, true),
            pair_k1(true, false, true, 0.0, 1.0),
        ]);
        assert!(matches!(mixed, Err(Error::DimensionMismatch { .. })));
        assert!(MatchedPair::new(true, false, true, vec![f64::NAN], vec![0.0]).is_err());
    }
}

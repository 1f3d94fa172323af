//! Scenario generators and the seeded replication engine producing
//! BIAS / SE / RMSE summaries.
//!
//! Replications are independent tasks: each one draws its generator from a
//! SplitMix-derived seed, so results are identical regardless of worker
//! count or execution order; aggregation folds in replication order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    fit_cml_logit, fit_conditional_mle, fit_heckman_ml, ipw_ate, naive_ate, FitOptions,
    UnpairedSample,
};
use crate::inference::TauDistribution;
use crate::model::{Dataset, MatchedPair};

pub const PI_SQUARED_OVER_3: f64 = std::f64::consts::PI * std::f64::consts::PI / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CovariateLaw {
    /// No covariates (k = 0).
    None,
    /// x_a ~ N(0,1), x_b = x_a + N(0,1), componentwise.
    Standard,
    /// x_a ~ N(0,1), x_b ~ U(-1,1), componentwise.
    IpwDesign,
}

impl std::fmt::Display for CovariateLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Standard => "standard",
            Self::IpwDesign => "ipw_design",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TreatmentLaw {
    /// D ~ Bernoulli(p), independent of everything else.
    Bernoulli(f64),
    /// D = I(0.75 sum(x_a) + 0.25 sum(x_b) + logistic > 0).
    PropensityLogistic,
}

impl std::fmt::Display for TreatmentLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Bernoulli(p) => write!(f, "bernoulli({p})"),
            Self::PropensityLogistic => f.write_str("propensity_logistic"),
        }
    }
}

/// One simulation cell: the data-generating design for a single table entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub tau: TauDistribution,
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub n: usize,
    pub covariate_law: CovariateLaw,
    pub treatment_law: TreatmentLaw,
}

impl Scenario {
    /// Covariate-free design with D ~ Bernoulli(2/3), the workhorse of the
    /// no-covariate tables.
    pub fn basic(tau: TauDistribution, lambda: f64, n: usize) -> Self {
        Self {
            tau,
            lambda,
            beta: Vec::new(),
            n,
            covariate_law: CovariateLaw::None,
            treatment_law: TreatmentLaw::Bernoulli(2.0 / 3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tau.validate()?;
        if !self.lambda.is_finite() || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidScenario("non-finite parameter".to_string()));
        }
        if self.n == 0 {
            return Err(Error::InvalidScenario("n must be positive".to_string()));
        }
        if matches!(self.covariate_law, CovariateLaw::None) && !self.beta.is_empty() {
            return Err(Error::InvalidScenario(
                "covariate_law none requires an empty beta".to_string(),
            ));
        }
        if matches!(self.treatment_law, TreatmentLaw::PropensityLogistic)
            && !matches!(self.covariate_law, CovariateLaw::IpwDesign)
        {
            return Err(Error::InvalidScenario(
                "propensity_logistic requires the ipw_design covariate law".to_string(),
            ));
        }
        if let TreatmentLaw::Bernoulli(p) = self.treatment_law {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidScenario(format!(
                    "bernoulli probability {p} outside [0,1]"
                )));
            }
        }
        Ok(())
    }

    /// Stable one-line description used as the table key.
    pub fn label(&self) -> String {
        format!(
            "tau={} n={} cov={} treat={}",
            self.tau, self.n, self.covariate_law, self.treatment_law
        )
    }

    /// Parses the flat key-value scenario format:
    ///
    /// ```text
    /// tau = normal(0, 3.2899)
    /// lambda = 1
    /// n = 1000
    /// beta = 1.0
    /// covariate_law = ipw_design
    /// treatment_law = propensity_logistic
    /// ```
    ///
    /// `beta`, `covariate_law` and `treatment_law` default to empty, `none`
    /// and `bernoulli(0.6666666666666666)`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tau = None;
        let mut lambda = None;
        let mut n = None;
        let mut beta = Vec::new();
        let mut covariate_law = CovariateLaw::None;
        let mut treatment_law = TreatmentLaw::Bernoulli(2.0 / 3.0);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedRow {
                line: idx + 1,
                message: "expected 'key = value'".to_string(),
            })?;
            let value = value.trim();
            let bad = |message: String| Error::MalformedRow {
                line: idx + 1,
                message,
            };
            match key.trim() {
                "tau" => tau = Some(TauDistribution::parse(value)?),
                "lambda" => {
                    lambda = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| bad(format!("lambda: {e}")))?,
                    )
                }
                "n" => {
                    n = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| bad(format!("n: {e}")))?,
                    )
                }
                "beta" => {
                    beta = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("beta: {e}"))))
                            .collect::<Result<_>>()?
                    };
                }
                "covariate_law" => {
                    covariate_law = match value {
                        "none" => CovariateLaw::None,
                        "standard" => CovariateLaw::Standard,
                        "ipw_design" => CovariateLaw::IpwDesign,
                        other => {
                            return Err(Error::UnknownName {
                                kind: "covariate law",
                                name: other.to_string(),
                            })
                        }
                    };
                }
                "treatment_law" => {
                    treatment_law = if value == "propensity_logistic" {
                        TreatmentLaw::PropensityLogistic
                    } else if let Some(inner) = value
                        .strip_prefix("bernoulli(")
                        .and_then(|v| v.strip_suffix(')'))
                    {
                        TreatmentLaw::Bernoulli(
                            inner
                                .trim()
                                .parse::<f64>()
                                .map_err(|e| bad(format!("bernoulli: {e}")))?,
                        )
                    } else {
                        return Err(Error::UnknownName {
                            kind: "treatment law",
                            name: value.to_string(),
                        });
                    };
                }
                other => {
                    return Err(Error::UnknownName {
                        kind: "scenario key",
                        name: other.to_string(),
                    })
                }
            }
        }
        let scenario = Scenario {
            tau: tau.ok_or_else(|| Error::InvalidScenario("missing tau".to_string()))?,
            lambda: lambda
                .ok_or_else(|| Error::InvalidScenario("missing lambda".to_string()))?,
            beta,
            n: n.ok_or_else(|| Error::InvalidScenario("missing n".to_string()))?,
            covariate_law,
            treatment_law,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Draws a dataset from the two-sided threshold model: shared group effect,
/// independent standard-normal member errors, treatment per the scenario law.
pub fn generate_pairs<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Dataset> {
    scenario.validate()?;
    let k = scenario.beta.len();
    let mut pairs = Vec::with_capacity(scenario.n);
    for _ in 0..scenario.n {
        let tau = scenario.tau.sample(rng);
        let (x_a, x_b): (Vec<f64>, Vec<f64>) = match scenario.covariate_law {
            CovariateLaw::None => (Vec::new(), Vec::new()),
            CovariateLaw::Standard => {
                let mut xa = Vec::with_capacity(k);
                let mut xb = Vec::with_capacity(k);
                for _ in 0..k {
                    let a: f64 = StandardNormal.sample(rng);
                    let step: f64 = StandardNormal.sample(rng);
                    xa.push(a);
                    xb.push(a + step);
                }
                (xa, xb)
            }
            CovariateLaw::IpwDesign => {
                let mut xa = Vec::with_capacity(k);
                let mut xb = Vec::with_capacity(k);
                for _ in 0..k {
                    xa.push(StandardNormal.sample(rng));
                    xb.push(rng.gen_range(-1.0..1.0));
                }
                (xa, xb)
            }
        };
        let d = match scenario.treatment_law {
            TreatmentLaw::Bernoulli(p) => rng.gen_bool(p),
            TreatmentLaw::PropensityLogistic => {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                let eps = (u / (1.0 - u)).ln();
                let sa: f64 = x_a.iter().sum();
                let sb: f64 = x_b.iter().sum();
                0.75 * sa + 0.25 * sb + eps > 0.0
            }
        };
        let idx_a: f64 = scenario
            .beta
            .iter()
            .zip(&x_a)
            .map(|(b, x)| b * x)
            .sum::<f64>()
            + tau
            + scenario.lambda * f64::from(u8::from(d));
        let idx_b: f64 = scenario
            .beta
            .iter()
            .zip(&x_b)
            .map(|(b, x)| b * x)
            .sum::<f64>()
            + tau
            + scenario.lambda * f64::from(u8::from(!d));
        let e_a: f64 = StandardNormal.sample(rng);
        let e_b: f64 = StandardNormal.sample(rng);
        let y_a = idx_a + e_a > 0.0;
        let y_b = idx_b + e_b > 0.0;
        pairs.push(MatchedPair::new(y_a, y_b, d, x_a, x_b)?);
    }
    Dataset::new(pairs)
}

/// Which estimator to run on each replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EstimatorKind {
    Conditional,
    Heckman,
    Cml,
    Ipw,
    Naive,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        Self::Conditional,
        Self::Heckman,
        Self::Cml,
        Self::Ipw,
        Self::Naive,
    ];
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Conditional => "conditional",
            Self::Heckman => "heckman",
            Self::Cml => "cml",
            Self::Ipw => "ipw",
            Self::Naive => "naive",
        })
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conditional" => Ok(Self::Conditional),
            "heckman" => Ok(Self::Heckman),
            "cml" => Ok(Self::Cml),
            "ipw" => Ok(Self::Ipw),
            "naive" => Ok(Self::Naive),
            other => Err(Error::UnknownName {
                kind: "estimator",
                name: other.to_string(),
            }),
        }
    }
}

/// One (scenario, estimator) table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub lambda: f64,
    pub estimator: String,
    pub bias: f64,
    pub se: f64,
    pub rmse: f64,
    /// Replications included in the moments (requested minus failures).
    pub replications: usize,
    /// Non-convergent or errored replications, excluded from the moments.
    pub failures: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub rows: Vec<SummaryRow>,
}

impl SimulationSummary {
    pub fn extend(&mut self, other: SimulationSummary) {
        self.rows.extend(other.rows);
    }
}

// SplitMix64 finalizer over (seed, replication index): independent streams
// that do not depend on scheduling.
fn replication_seed(seed: u64, rep: usize) -> u64 {
    let mut z = seed ^ (rep as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn estimate_lambda(kind: EstimatorKind, data: &Dataset, opts: &FitOptions) -> Option<f64> {
    match kind {
        EstimatorKind::Conditional => fit_conditional_mle(data, opts)
            .ok()
            .filter(|f| f.converged)
            .map(|f| f.theta_hat.lambda),
        EstimatorKind::Heckman => fit_heckman_ml(data, opts)
            .ok()
            .filter(|f| f.converged)
            .map(|f| f.lambda_hat),
        EstimatorKind::Cml => fit_cml_logit(data)
            .ok()
            .filter(|f| f.converged)
            .map(|f| f.theta_hat.lambda),
        EstimatorKind::Ipw => ipw_ate(&UnpairedSample::from_pairs(data), opts).ok(),
        EstimatorKind::Naive => Some(naive_ate(data)),
    }
}

/// Runs R seeded replications of the scenario through every requested
/// estimator.  BIAS = mean(est) - lambda, SE = sample standard deviation,
/// RMSE = sqrt(mean squared error); failed replications are counted and
/// excluded from the moments.
pub fn run_replications(
    scenario: &Scenario,
    estimators: &[EstimatorKind],
    reps: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<SimulationSummary> {
    if reps < 2 {
        return Err(Error::Precondition(
            "need at least two replications".to_string(),
        ));
    }
    scenario.validate()?;
    if estimators.is_empty() {
        return Err(Error::Precondition("no estimators requested".to_string()));
    }

    let per_rep: Vec<Vec<Option<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, rep));
            let data = generate_pairs(scenario, &mut rng).expect("validated scenario");
            estimators
                .iter()
                .map(|kind| estimate_lambda(*kind, &data, opts))
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(estimators.len());
    for (j, kind) in estimators.iter().enumerate() {
        let values: Vec<f64> = per_rep.iter().filter_map(|r| r[j]).collect();
        if values.is_empty() {
            return Err(Error::AllReplicationsFailed(reps));
        }
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let bias = mean - scenario.lambda;
        let se = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
        };
        let rmse = (values
            .iter()
            .map(|v| (v - scenario.lambda).powi(2))
            .sum::<f64>()
            / r)
            .sqrt();
        rows.push(SummaryRow {
            scenario: scenario.label(),
            lambda: scenario.lambda,
            estimator: kind.to_string(),
            bias,
            se,
            rmse,
            replications: values.len(),
            failures: reps - values.len(),
        });
    }
    Ok(SimulationSummary { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

const COLUMNS: [&str; 8] = [
    "scenario",
    "lambda",
    "estimator",
    "BIAS",
    "SE",
    "RMSE",
    "R",
    "failures",
];

/// Renders the summary with a deterministic column order; the CSV form
/// round-trips through `parse_summary_csv` byte-for-byte.
pub fn emit_table(summary: &SimulationSummary, format: TableFormat) -> Result<String> {
    if summary.rows.is_empty() {
        return Err(Error::Precondition("empty summary".to_string()));
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).map_err(csv_io)?;
            for r in &summary.rows {
                w.write_record([
                    r.scenario.as_str(),
                    &r.lambda.to_string(),
                    &r.estimator,
                    &r.bias.to_string(),
                    &r.se.to_string(),
                    &r.rmse.to_string(),
                    &r.replications.to_string(),
                    &r.failures.to_string(),
                ])
                .map_err(csv_io)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            out.push_str(&format!("| {} |\n", COLUMNS.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
            for r in &summary.rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                    r.scenario,
                    r.lambda,
                    r.estimator,
                    r.bias,
                    r.se,
                    r.rmse,
                    r.replications,
                    r.failures
                ));
            }
            Ok(out)
        }
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::MalformedRow {
        line: 0,
        message: e.to_string(),
    }
}

/// Parses a summary previously written by `emit_table(.., Csv)`.
pub fn parse_summary_csv(text: &str) -> Result<SimulationSummary> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let headers = reader.headers().map_err(csv_io)?;
        let got: Vec<&str> = headers.iter().collect();
        if got != COLUMNS {
            return Err(Error::MalformedRow {
                line: 1,
                message: format!("unexpected header {got:?}"),
            });
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_io)?;
        let line = i + 2;
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or(Error::MalformedRow {
                line,
                message: format!("missing column {}", COLUMNS[idx]),
            })
        };
        let num = |idx: usize| -> Result<f64> {
            field(idx)?.parse::<f64>().map_err(|e| Error::MalformedRow {
                line,
                message: format!("{}: {e}", COLUMNS[idx]),
            })
        };
        let int = |idx: usize| -> Result<usize> {
            field(idx)?
                .parse::<usize>()
                .map_err(|e| Error::MalformedRow {
                    line,
                    message: format!("{}: {e}", COLUMNS[idx]),
                })
        };
        rows.push(SummaryRow {
            scenario: field(0)?.to_string(),
            lambda: num(1)?,
            estimator: field(2)?.to_string(),
            bias: num(3)?,
            se: num(4)?,
            rmse: num(5)?,
            replications: int(6)?,
            failures: int(7)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(SimulationSummary { rows })
}

/// The published table layouts as ready-made scenario grids.
pub fn preset(name: &str) -> Result<Vec<(Scenario, Vec<EstimatorKind>)>> {
    use EstimatorKind::*;
    use TauDistribution::*;
    let lambdas_wide = [2.0, 1.5, 1.0, 0.5, 0.0, -0.5, -1.0, -1.5, -2.0];
    let lambdas = [1.0, 0.5, 0.0, -0.5, -1.0];
    let mix = |m1: f64, v1: f64, m2: f64, v2: f64| NormalMixture {
        weight: 0.5,
        mean1: m1,
        variance1: v1,
        mean2: m2,
        variance2: v2,
    };
    let cells = match name {
        "table1" => {
            let blocks: [(usize, [TauDistribution; 3]); 2] = [
                (
                    1000,
                    [
                        Uniform { low: -4.0, high: 4.0 },
                        Normal { mean: 0.0, variance: 4.0 },
                        Cauchy,
                    ],
                ),
                (
                    5000,
                    [
                        Uniform {
                            low: -10.0,
                            high: 10.0,
                        },
                        Normal {
                            mean: 0.0,
                            variance: 25.0,
                        },
                        Cauchy,
                    ],
                ),
            ];
            let mut cells = Vec::new();
            for (n, taus) in blocks {
                for tau in taus {
                    for l in lambdas_wide {
                        cells.push((Scenario::basic(tau.clone(), l, n), vec![Conditional]));
                    }
                }
            }
            cells
        }
        "table2" => {
            let mut cells = Vec::new();
            for n in [200usize, 500, 1000, 2000, 3000, 5000] {
                for l in lambdas {
                    cells.push((
                        Scenario::basic(
                            Normal {
                                mean: 0.0,
                                variance: PI_SQUARED_OVER_3,
                            },
                            l,
                            n,
                        ),
                        vec![Conditional],
                    ));
                }
            }
            cells
        }
        "table4" => {
            let taus = [
                Normal { mean: 0.0, variance: 1.0 },
                Normal { mean: 0.0, variance: 4.0 },
                mix(-6.0, 9.0, 6.0, 9.0),
                mix(-6.0, 3.0, 6.0, 3.0),
                mix(-6.0, 3.0, 6.0, 9.0),
            ];
            let mut cells = Vec::new();
            for tau in taus {
                for l in lambdas {
                    cells.push((
                        Scenario::basic(tau.clone(), l, 1000),
                        vec![Conditional, Heckman],
                    ));
                }
            }
            cells
        }
        "table5" => {
            let taus = [
                Normal { mean: 0.0, variance: 1.0 },
                Normal {
                    mean: 0.0,
                    variance: PI_SQUARED_OVER_3,
                },
                Normal { mean: 0.0, variance: 6.0 },
                mix(-4.0, 6.0, 4.0, 6.0),
            ];
            let mut cells = Vec::new();
            for tau in taus {
                for l in lambdas {
                    cells.push((Scenario::basic(tau.clone(), l, 500), vec![Conditional, Cml]));
                }
            }
            cells
        }
        "table6" => lambdas
            .iter()
            .map(|&l| {
                (
                    Scenario {
                        tau: Normal {
                            mean: 0.0,
                            variance: PI_SQUARED_OVER_3,
                        },
                        lambda: l,
                        beta: vec![1.0],
                        n: 1000,
                        covariate_law: CovariateLaw::IpwDesign,
                        treatment_law: TreatmentLaw::PropensityLogistic,
                    },
                    vec![Conditional, Ipw, Heckman],
                )
            })
            .collect(),
        other => {
            return Err(Error::UnknownName {
                kind: "preset",
                name: other.to_string(),
            })
        }
    };
    Ok(cells)
}

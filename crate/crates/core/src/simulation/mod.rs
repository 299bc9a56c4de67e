//! Seeded Monte Carlo harness.
//!
//! Every `(n, r)` cell draws its sample and its split from streams derived
//! from `(master_seed, n, r)`, so adding sample sizes or replications never
//! perturbs existing cells. Replications run through [`par::map_collect`],
//! which preserves order; all aggregation happens afterwards in a fixed order,
//! so reports are bit-identical whether or not rayon is used.

mod dgp;

pub use dgp::{draw_sample, CovariateDist, Dgp, Noise, TargetFunction};

use serde::{Deserialize, Serialize};

use crate::debias::{bandwidth, BandwidthRule, DebiasedEstimator, DebiasedFit, EstimatorConfig};
use crate::error::{Error, Result};
use crate::first_stage::{self, Offset, RegressorSpec};
use crate::inference::{self, standardized_errors};
use crate::par::{self, Execution};
use crate::rng::derive_seed;
use crate::stats::{self, compensated_sum, fit_slope, SlopeFit};

const STREAM_DATA: u64 = 0;
const STREAM_SPLIT: u64 = 1;

/// Monte Carlo study configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub dgp: Dgp,
    pub regressor: RegressorSpec,
    pub rule: BandwidthRule,
    pub degree: usize,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub eval_points: Vec<f64>,
    pub master_seed: u64,
    /// Confidence level for interval-based studies.
    pub level: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.regressor.validate()?;
        self.rule.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidConfig("sample_sizes is empty".into()));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("sample_sizes must be strictly increasing".into()));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidConfig(format!("sample size {n} is below 4")));
        }
        if self.eval_points.is_empty() {
            return Err(Error::InvalidConfig("eval_points is empty".into()));
        }
        if let Some(&x) = self.eval_points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfDomain(x));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {}", self.level)));
        }
        EstimatorConfig::new(self.rule, Some(self.degree))?;
        Ok(())
    }

    fn estimator(&self) -> Result<DebiasedEstimator> {
        let cfg = EstimatorConfig::new(self.rule, Some(self.degree))?;
        Ok(DebiasedEstimator::new(self.regressor.clone(), cfg).with_oracle(self.dgp.f0.oracle()))
    }

    fn with(&self, regressor: RegressorSpec, rule: BandwidthRule) -> McConfig {
        McConfig {
            regressor,
            rule,
            ..self.clone()
        }
    }
}

/// Seeds for the sample and the split of replication `r` at size `n`.
pub fn replication_seeds(master: u64, n: usize, r: usize) -> (u64, u64) {
    (
        derive_seed(master, &[n as u64, r as u64, STREAM_DATA]),
        derive_seed(master, &[n as u64, r as u64, STREAM_SPLIT]),
    )
}

/// One `(n, r)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub n: usize,
    pub replication: usize,
    pub bandwidth: f64,
    /// `f̃` at each evaluation point; `None` where the design was singular.
    pub ftilde: Vec<Option<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_hat: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_hit: Option<Vec<Option<bool>>>,
    /// `max |f̃ - f0|` over the evaluation points that succeeded.
    pub sup_error: Option<f64>,
    pub failed_points: usize,
}

/// Aggregates over replications at one `(n, x0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub x0: f64,
    pub bandwidth: f64,
    pub f0: f64,
    pub replications_ok: usize,
    pub mean: f64,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
    pub coverage: Option<f64>,
    pub mean_var_hat: Option<f64>,
}

/// Sup-norm aggregates at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupSummary {
    pub n: usize,
    pub bandwidth: f64,
    pub mean_sup: f64,
    pub mean_sup_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub replications: Vec<ReplicationRecord>,
    pub cells: Vec<CellSummary>,
    pub sup: Vec<SupSummary>,
}

impl McReport {
    /// Cells at evaluation point index `j`, in sample-size order.
    pub fn cells_at(&self, x0: f64) -> Vec<&CellSummary> {
        self.cells.iter().filter(|c| c.x0 == x0).collect()
    }
}

/// Evaluates `f̃` on many points without keeping per-point weights.
fn light_predictions(fit: &DebiasedFit, points: &[f64]) -> Vec<Option<f64>> {
    points.iter().map(|&x| fit.predict_at(x).ok()).collect()
}

fn run_replication(
    cfg: &McConfig,
    est: &DebiasedEstimator,
    n: usize,
    r: usize,
    with_inference: bool,
) -> ReplicationRecord {
    let (data_seed, split_seed) = replication_seeds(cfg.master_seed, n, r);
    let h = bandwidth(&cfg.rule, n);
    let k = cfg.eval_points.len();
    let failed = || ReplicationRecord {
        n,
        replication: r,
        bandwidth: h,
        ftilde: vec![None; k],
        var_hat: with_inference.then(|| vec![None; k]),
        ci_hit: with_inference.then(|| vec![None; k]),
        sup_error: None,
        failed_points: k,
    };
    let Ok(ds) = draw_sample(&cfg.dgp, n, data_seed) else {
        return failed();
    };
    let f0 = cfg.dgp.f0;

    let (ftilde, var_hat, ci_hit) = if with_inference {
        let Ok(fit) = est.estimate(&ds, split_seed, &cfg.eval_points) else {
            return failed();
        };
        let mut var_hat = Vec::with_capacity(k);
        let mut ci_hit = Vec::with_capacity(k);
        for &x0 in &cfg.eval_points {
            match inference::confidence_interval(&fit, x0, cfg.level) {
                Ok(ci) => {
                    var_hat.push(Some(ci.var_hat));
                    ci_hit.push(Some(ci.contains(f0.eval(x0))));
                }
                Err(_) => {
                    var_hat.push(None);
                    ci_hit.push(None);
                }
            }
        }
        (fit.ftilde(), Some(var_hat), Some(ci_hit))
    } else {
        let Ok(fit) = est.estimate(&ds, split_seed, &[]) else {
            return failed();
        };
        (light_predictions(&fit, &cfg.eval_points), None, None)
    };

    let errors: Vec<f64> = ftilde
        .iter()
        .zip(&cfg.eval_points)
        .filter_map(|(v, &x)| v.map(|v| (v - f0.eval(x)).abs()))
        .collect();
    let failed_points = k - errors.len();
    ReplicationRecord {
        n,
        replication: r,
        bandwidth: h,
        ftilde,
        var_hat,
        ci_hit,
        sup_error: errors.iter().copied().reduce(f64::max),
        failed_points,
    }
}

fn summarize(cfg: &McConfig, records: &[ReplicationRecord]) -> Result<McReport> {
    let mut cells = Vec::new();
    let mut sup = Vec::new();
    for &n in &cfg.sample_sizes {
        let at_n: Vec<&ReplicationRecord> = records.iter().filter(|r| r.n == n).collect();
        let h = bandwidth(&cfg.rule, n);
        let mut any_ok = false;
        for (j, &x0) in cfg.eval_points.iter().enumerate() {
            let f0 = cfg.dgp.f0.eval(x0);
            let values: Vec<f64> = at_n.iter().filter_map(|r| r.ftilde[j]).collect();
            if values.is_empty() {
                continue;
            }
            any_ok = true;
            let mean = stats::mean(&values);
            let variance = stats::population_variance(&values);
            let mse = compensated_sum(values.iter().map(|v| (v - f0) * (v - f0))) / values.len() as f64;
            let hits: Vec<bool> = at_n
                .iter()
                .filter_map(|r| r.ci_hit.as_ref().and_then(|c| c[j]))
                .collect();
            let vars: Vec<f64> = at_n
                .iter()
                .filter_map(|r| r.var_hat.as_ref().and_then(|v| v[j]))
                .collect();
            cells.push(CellSummary {
                n,
                x0,
                bandwidth: h,
                f0,
                replications_ok: values.len(),
                mean,
                bias: mean - f0,
                variance,
                mse,
                coverage: (!hits.is_empty())
                    .then(|| hits.iter().filter(|&&b| b).count() as f64 / hits.len() as f64),
                mean_var_hat: (!vars.is_empty()).then(|| stats::mean(&vars)),
            });
        }
        if !any_ok {
            return Err(Error::AllReplicationsFailed { n });
        }
        let sups: Vec<f64> = at_n.iter().filter_map(|r| r.sup_error).collect();
        if !sups.is_empty() {
            let sq: Vec<f64> = sups.iter().map(|s| s * s).collect();
            sup.push(SupSummary {
                n,
                bandwidth: h,
                mean_sup: stats::mean(&sups),
                mean_sup_sq: stats::mean(&sq),
            });
        }
    }
    Ok(McReport {
        replications: records.to_vec(),
        cells,
        sup,
    })
}

/// Runs every `(n, r)` cell and aggregates per `(n, x0)`.
///
/// With `with_inference`, each replication also carries the plug-in variance
/// and whether the level-`cfg.level` interval covers `f0(x0)`.
pub fn run_monte_carlo(cfg: &McConfig, with_inference: bool) -> Result<McReport> {
    cfg.validate()?;
    let est = cfg.estimator()?;
    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let records = par::map_collect(jobs, cfg.execution, |(n, r)| {
        run_replication(cfg, &est, n, r, with_inference)
    });
    summarize(cfg, &records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub mc: McReport,
    pub x0: f64,
    /// Least-squares slope of `ln MSE` on `ln n`; `None` when any MSE is zero.
    pub slope: Option<SlopeFit>,
    /// Fewer than 4 sample sizes or 100 replications.
    pub low_confidence: bool,
}

/// Pointwise MSE at the first evaluation point and its log-log slope in `n`.
pub fn run_rate(cfg: &McConfig) -> Result<RateReport> {
    let mc = run_monte_carlo(cfg, false)?;
    let x0 = cfg.eval_points[0];
    let cells = mc.cells_at(x0);
    let slope = if cells.iter().all(|c| c.mse > 0.0) {
        let xs: Vec<f64> = cells.iter().map(|c| (c.n as f64).ln()).collect();
        let ys: Vec<f64> = cells.iter().map(|c| c.mse.ln()).collect();
        fit_slope(&xs, &ys)
    } else {
        None
    };
    Ok(RateReport {
        x0,
        slope,
        low_confidence: cfg.sample_sizes.len() < 4 || cfg.replications < 100,
        mc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub n: usize,
    pub x0: f64,
    pub coverage: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub mc: McReport,
    pub level: f64,
    pub coverage: Vec<CoverageCell>,
}

/// Fraction of replications whose interval contains `f0(x0)`.
pub fn run_coverage(cfg: &McConfig) -> Result<CoverageReport> {
    let mc = run_monte_carlo(cfg, true)?;
    let coverage = mc
        .cells
        .iter()
        .filter_map(|c| {
            Some(CoverageCell {
                n: c.n,
                x0: c.x0,
                coverage: c.coverage?,
                intervals: c.replications_ok,
            })
        })
        .collect();
    Ok(CoverageReport {
        mc,
        level: cfg.level,
        coverage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityCell {
    pub n: usize,
    pub x0: f64,
    pub ks_statistic: f64,
    pub mean: f64,
    pub variance: f64,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    pub mc: McReport,
    pub cells: Vec<NormalityCell>,
}

/// Standardized errors `(f̃ - f0)/sqrt(var_hat)` at the first evaluation
/// point, with their KS distance from `N(0, 1)`.
pub fn run_normality(cfg: &McConfig) -> Result<NormalityReport> {
    let mc = run_monte_carlo(cfg, true)?;
    let x0 = cfg.eval_points[0];
    let f0 = cfg.dgp.f0.eval(x0);
    let mut cells = Vec::new();
    for &n in &cfg.sample_sizes {
        let pairs: Vec<(f64, f64)> = mc
            .replications
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| Some((r.ftilde[0]?, r.var_hat.as_ref()?[0]?)))
            .collect();
        let total = pairs.len();
        let z = standardized_errors(&pairs, f0);
        if z.excluded * 20 > total || z.values.is_empty() {
            return Err(Error::ExcessiveExclusions {
                excluded: z.excluded,
                total,
            });
        }
        cells.push(NormalityCell {
            n,
            x0,
            ks_statistic: stats::ks_statistic_normal(&z.values),
            mean: stats::mean(&z.values),
            variance: stats::population_variance(&z.values),
            used: z.values.len(),
            excluded: z.excluded,
        });
    }
    Ok(NormalityReport { mc, cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformReport {
    pub mc: McReport,
    /// Slope of `ln(mean sup²)` on `ln(n / ln n)`.
    pub slope: Option<SlopeFit>,
    /// Mean sup error strictly decreasing in `n`.
    pub decreasing: bool,
}

/// Sup-norm error over the evaluation grid.
pub fn run_uniform(cfg: &McConfig) -> Result<UniformReport> {
    let mc = run_monte_carlo(cfg, false)?;
    let xs: Vec<f64> = mc.sup.iter().map(|s| (s.n as f64 / (s.n as f64).ln()).ln()).collect();
    let slope = if mc.sup.iter().all(|s| s.mean_sup_sq > 0.0) {
        let ys: Vec<f64> = mc.sup.iter().map(|s| s.mean_sup_sq.ln()).collect();
        fit_slope(&xs, &ys)
    } else {
        None
    };
    let decreasing = mc.sup.windows(2).all(|w| w[1].mean_sup < w[0].mean_sup);
    Ok(UniformReport {
        mc,
        slope,
        decreasing,
    })
}

/// Number of quadrature nodes used for population MSEs.
pub const SHIFT_QUADRATURE_NODES: usize = 10_000;

/// Bandwidth of the non-debiased Nadaraya-Watson baseline in shift studies.
pub const SHIFT_BASELINE_BANDWIDTH: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub n: usize,
    pub replication: usize,
    /// `max |f̃ - f0|` over the quadrature nodes.
    pub sup_error: f64,
    /// `∫ (f̃ - f0)² p_test`.
    pub test_mse: f64,
    /// `∫ (f̃ - f0)² p_train`.
    pub train_mse: f64,
    pub baseline_test_mse: f64,
    pub baseline_train_mse: f64,
    /// `test_mse ≤ sup_error² + slack`.
    pub bound_holds: bool,
    pub failed_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub n: usize,
    pub mean_test_mse: f64,
    pub mean_train_mse: f64,
    pub mean_baseline_test_mse: f64,
    pub mean_baseline_train_mse: f64,
    /// `mean_test_mse / mean_train_mse`.
    pub ratio: f64,
    pub baseline_ratio: f64,
    pub bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub train: CovariateDist,
    pub test: CovariateDist,
    pub records: Vec<ShiftRecord>,
    pub summaries: Vec<ShiftSummary>,
}

/// Trains under `train` and measures population MSE under both `train` and
/// `test` by midpoint quadrature on `[0, 1]`.
///
/// A boxcar Nadaraya-Watson fit on the full sample with bandwidth
/// [`SHIFT_BASELINE_BANDWIDTH`] is scored the same way as a baseline.
pub fn run_shift(cfg: &McConfig, train: CovariateDist, test: CovariateDist) -> Result<ShiftReport> {
    let cfg = McConfig {
        dgp: Dgp {
            covariates: train,
            ..cfg.dgp
        },
        ..cfg.clone()
    };
    cfg.validate()?;
    test.validate()?;
    let est = cfg.estimator()?;
    let f0 = cfg.dgp.f0;
    let k = SHIFT_QUADRATURE_NODES;
    let nodes: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect();
    let truth: Vec<f64> = nodes.iter().map(|&x| f0.eval(x)).collect();
    let p_train: Vec<f64> = nodes.iter().map(|&x| train.density(x)).collect();
    let p_test: Vec<f64> = nodes.iter().map(|&x| test.density(x)).collect();
    let test_mass = compensated_sum(p_test.iter().copied()) / k as f64;
    let integrate = |sq: &[f64], p: &[f64]| compensated_sum(sq.iter().zip(p).map(|(a, b)| a * b)) / k as f64;

    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<ShiftRecord>> = par::map_collect(jobs, cfg.execution, |(n, r)| {
        let (data_seed, split_seed) = replication_seeds(cfg.master_seed, n, r);
        let ds = draw_sample(&cfg.dgp, n, data_seed)?;
        let fit = est.estimate(&ds, split_seed, &[])?;
        let preds = light_predictions(&fit, &nodes);
        let failed_nodes = preds.iter().filter(|p| p.is_none()).count();
        // Failed nodes contribute nothing; they are counted instead.
        let sq: Vec<f64> = preds
            .iter()
            .zip(&truth)
            .map(|(p, t)| p.map_or(0.0, |p| (p - t) * (p - t)))
            .collect();
        let sup_error = sq.iter().copied().fold(0.0, f64::max).sqrt();
        let test_mse = integrate(&sq, &p_test);
        let train_mse = integrate(&sq, &p_train);

        let baseline = first_stage::fit(
            &RegressorSpec::NadarayaWatson {
                bandwidth: SHIFT_BASELINE_BANDWIDTH,
            },
            ds.xs(),
            ds.ys(),
            None,
        )?;
        let bsq: Vec<f64> = nodes
            .iter()
            .zip(&truth)
            .map(|(&x, t)| {
                let e = baseline.eval(x) - t;
                e * e
            })
            .collect();

        let sup_sq = sup_error * sup_error;
        let slack = sup_sq * (test_mass - 1.0).abs() + 1e-12;
        Ok(ShiftRecord {
            n,
            replication: r,
            sup_error,
            test_mse,
            train_mse,
            baseline_test_mse: integrate(&bsq, &p_test),
            baseline_train_mse: integrate(&bsq, &p_train),
            bound_holds: test_mse <= sup_sq + slack,
            failed_nodes,
        })
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;

    let summaries = cfg
        .sample_sizes
        .iter()
        .map(|&n| {
            let at: Vec<&ShiftRecord> = records.iter().filter(|r| r.n == n).collect();
            let avg = |f: fn(&ShiftRecord) -> f64| {
                compensated_sum(at.iter().map(|r| f(r))) / at.len() as f64
            };
            let (t, u) = (avg(|r| r.test_mse), avg(|r| r.train_mse));
            let (bt, bu) = (avg(|r| r.baseline_test_mse), avg(|r| r.baseline_train_mse));
            ShiftSummary {
                n,
                mean_test_mse: t,
                mean_train_mse: u,
                mean_baseline_test_mse: bt,
                mean_baseline_train_mse: bu,
                ratio: t / u,
                baseline_ratio: bt / bu,
                bound_violations: at.iter().filter(|r| !r.bound_holds).count(),
            }
        })
        .collect();

    Ok(ShiftReport {
        train,
        test,
        records,
        summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCell {
    pub n: usize,
    pub mean: f64,
    pub abs_bias: f64,
    /// Monte Carlo standard error of `mean`.
    pub std_error: f64,
    pub replications_ok: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessScenario {
    pub name: String,
    pub regressor: RegressorSpec,
    pub rule: BandwidthRule,
    pub cells: Vec<RobustnessCell>,
    pub mc: McReport,
}

impl RobustnessScenario {
    /// Number of consecutive sample sizes where `|bias|` went up, and the
    /// largest such increase measured in combined standard errors.
    pub fn inversions(&self) -> (usize, f64) {
        self.cells.windows(2).fold((0, 0.0), |(count, worst), w| {
            let rise = w[1].abs_bias - w[0].abs_bias;
            if rise > 0.0 {
                let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
                (count + 1, worst.max(if se > 0.0 { rise / se } else { f64::INFINITY }))
            } else {
                (count, worst)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleRobustnessReport {
    pub x0: f64,
    /// Broken first stage `f0 + 1`, second stage on the configured rule.
    pub broken_first_stage: RobustnessScenario,
    /// Oracle first stage, second stage at fixed bandwidth 0.5.
    pub wide_second_stage: RobustnessScenario,
}

pub const BROKEN_FIRST_STAGE_OFFSET: f64 = 1.0;
pub const WIDE_SECOND_STAGE_BANDWIDTH: f64 = 0.5;

fn robustness_scenario(name: &str, cfg: &McConfig) -> Result<RobustnessScenario> {
    let mc = run_monte_carlo(cfg, false)?;
    let x0 = cfg.eval_points[0];
    let cells = cfg
        .sample_sizes
        .iter()
        .map(|&n| {
            let values: Vec<f64> = mc
                .replications
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.ftilde[0])
                .collect();
            let mean = stats::mean(&values);
            let sd = stats::population_variance(&values).sqrt();
            RobustnessCell {
                n,
                mean,
                abs_bias: (mean - cfg.dgp.f0.eval(x0)).abs(),
                std_error: sd / (values.len() as f64).sqrt(),
                replications_ok: values.len(),
            }
        })
        .collect();
    Ok(RobustnessScenario {
        name: name.to_string(),
        regressor: cfg.regressor.clone(),
        rule: cfg.rule,
        cells,
        mc,
    })
}

/// Runs both consistency scenarios at the first evaluation point.
pub fn run_double_robustness(cfg: &McConfig) -> Result<DoubleRobustnessReport> {
    cfg.validate()?;
    let broken = cfg.with(
        RegressorSpec::biased(RegressorSpec::Oracle, Offset::Constant(BROKEN_FIRST_STAGE_OFFSET)),
        cfg.rule,
    );
    let wide = cfg.with(
        RegressorSpec::Oracle,
        BandwidthRule::Fixed(WIDE_SECOND_STAGE_BANDWIDTH),
    );
    Ok(DoubleRobustnessReport {
        x0: cfg.eval_points[0],
        broken_first_stage: robustness_scenario("broken_first_stage", &broken)?,
        wide_second_stage: robustness_scenario("wide_second_stage", &wide)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::debias::SmoothnessSpec;

    fn base(replications: usize, sizes: Vec<usize>) -> McConfig {
        McConfig {
            dgp: Dgp::reference(),
            regressor: RegressorSpec::Zero,
            rule: BandwidthRule::Pointwise(SmoothnessSpec::new(2.0, 1.0, 1.0).unwrap()),
            degree: 1,
            sample_sizes: sizes,
            replications,
            eval_points: vec![0.5],
            master_seed: 17,
            level: 0.95,
            execution: Execution::Parallel,
        }
    }

    fn noiseless(cfg: McConfig) -> McConfig {
        McConfig {
            dgp: Dgp {
                noise: Noise::Gaussian { sigma: 0.0 },
                ..cfg.dgp
            },
            ..cfg
        }
    }

    #[test]
    fn config_validation() {
        assert!(base(0, vec![100]).validate().is_err());
        assert!(base(1, vec![200, 100]).validate().is_err());
        assert!(base(1, vec![2]).validate().is_err());
        let mut c = base(1, vec![100]);
        c.eval_points = vec![1.5];
        assert!(c.validate().is_err());
        assert!(base(1, vec![100]).validate().is_ok());
    }

    #[test]
    fn mse_identity_holds_per_cell() {
        let mut cfg = base(60, vec![200, 400]);
        cfg.eval_points = vec![0.2, 0.5, 0.8];
        let mc = run_monte_carlo(&cfg, false).unwrap();
        assert_eq!(mc.cells.len(), 6);
        for c in &mc.cells {
            assert!((c.mse - (c.bias * c.bias + c.variance)).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_noiseless_rate_is_undefined() {
        let mut cfg = noiseless(base(5, vec![100, 200, 400, 800]));
        cfg.regressor = RegressorSpec::Oracle;
        let rate = run_rate(&cfg).unwrap();
        assert!(rate.mc.cells.iter().all(|c| c.mse == 0.0));
        assert!(rate.slope.is_none());
        assert!(rate.low_confidence);
    }

    #[test]
    fn oracle_noiseless_coverage_is_one() {
        let mut cfg = noiseless(base(20, vec![200]));
        cfg.regressor = RegressorSpec::Oracle;
        cfg.rule = "normality:s=2,alpha=1".parse().unwrap();
        let cov = run_coverage(&cfg).unwrap();
        assert_eq!(cov.coverage[0].coverage, 1.0);
    }

    #[test]
    fn oracle_noiseless_sup_error_is_zero() {
        let mut cfg = noiseless(base(3, vec![200, 400]));
        cfg.regressor = RegressorSpec::Oracle;
        cfg.eval_points = (0..=20).map(|i| 0.05 + 0.045 * i as f64).collect();
        let u = run_uniform(&cfg).unwrap();
        assert!(u.mc.sup.iter().all(|s| s.mean_sup == 0.0));
        assert!(u.slope.is_none());
    }

    #[test]
    fn sup_dominates_pointwise_errors() {
        let mut cfg = base(5, vec![300]);
        cfg.eval_points = (0..=30).map(|i| 0.05 + 0.03 * i as f64).collect();
        let mc = run_monte_carlo(&cfg, false).unwrap();
        for r in &mc.replications {
            let sup = r.sup_error.unwrap();
            for (v, &x) in r.ftilde.iter().zip(&cfg.eval_points) {
                if let Some(v) = v {
                    assert!(sup >= (v - cfg.dgp.f0.eval(x)).abs());
                }
            }
        }
    }

    #[test]
    fn identical_shift_distributions_give_identical_mse() {
        let cfg = base(3, vec![400]);
        let d = CovariateDist::Beta { a: 2.0, b: 2.0 };
        let s = run_shift(&cfg, d, d).unwrap();
        for r in &s.records {
            assert_eq!(r.test_mse, r.train_mse);
            assert!(r.bound_holds);
        }
    }

    #[test]
    fn broken_first_stage_noiseless_is_exact() {
        let cfg = noiseless(base(4, vec![200, 400]));
        let dr = run_double_robustness(&cfg).unwrap();
        for c in &dr.broken_first_stage.cells {
            assert!(c.abs_bias < 1e-10);
        }
    }

    #[test]
    fn adding_sample_sizes_leaves_cells_untouched() {
        let a = run_monte_carlo(&base(4, vec![100, 400]), false).unwrap();
        let b = run_monte_carlo(&base(4, vec![100, 200, 400]), false).unwrap();
        for rec in &a.replications {
            let twin = b
                .replications
                .iter()
                .find(|r| r.n == rec.n && r.replication == rec.replication)
                .unwrap();
            assert_eq!(rec, twin);
        }
    }

    #[test]
    fn sequential_and_parallel_reports_match() {
        let mut cfg = base(20, vec![100, 200]);
        let par = run_monte_carlo(&cfg, true).unwrap();
        cfg.execution = Execution::Sequential;
        let seq = run_monte_carlo(&cfg, true).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn variance_times_nh_is_stable() {
        let cfg = base(200, vec![500, 2000, 8000, 16000]);
        let mc = run_monte_carlo(&cfg, false).unwrap();
        let scaled: Vec<f64> = mc
            .cells
            .iter()
            .map(|c| c.variance * c.n as f64 * c.bandwidth)
            .collect();
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        assert!(hi / lo < 2.0, "{scaled:?}");
    }

    #[test]
    fn bias_over_h_to_the_s_is_stable() {
        // Smooth first-stage error 0.5 sin(2πx); ℓ = 1, so the bias at 0.25
        // is dominated by the curvature term ∝ h².
        let mut cfg = noiseless(base(20, vec![500, 2000, 8000, 16000]));
        cfg.regressor = "oracle+sine:0.5".parse().unwrap();
        cfg.eval_points = vec![0.25];
        let mc = run_monte_carlo(&cfg, false).unwrap();
        let ratios: Vec<f64> = mc
            .cells
            .iter()
            .map(|c| c.bias.abs() / c.bandwidth.powi(2))
            .collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(0.0, f64::max);
        assert!(lo > 0.0 && hi / lo < 2.0, "{ratios:?}");
    }
}

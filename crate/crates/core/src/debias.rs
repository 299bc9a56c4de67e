//! The three-stage debiased estimator and its bandwidth rules.
//!
//! 1. Split the sample in two.
//! 2. Fit the first stage `f̂` on fold 1.
//! 3. Smooth the fold-2 residuals `Y_i - f̂(X_i)` with a local polynomial to
//!    get `b̂(x0)`, and report `f̃(x0) = b̂(x0) + f̂(x0)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{split_even, Dataset, Split};
use crate::error::{Error, Result, SingularDesign};
use crate::first_stage::{self, FittedRegressor, OracleFn, RegressorSpec};
use crate::local_poly::{residual_fit, Kernel, LocalPolyConfig, LocalPolySmoother, WeightVector, MAX_DEGREE};
use crate::par::{self, Execution};

/// Hölder smoothness `s`, Hölder constant `L`, and bandwidth prefactor `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSpec {
    pub s: f64,
    #[serde(rename = "L")]
    pub holder_constant: f64,
    pub alpha: f64,
}

impl SmoothnessSpec {
    pub fn new(s: f64, holder_constant: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("s", s), ("L", holder_constant), ("alpha", alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            s,
            holder_constant,
            alpha,
        })
    }

    /// Local polynomial degree matched to the smoothness, `⌊s⌋`.
    pub fn default_degree(&self) -> usize {
        (self.s.floor() as usize).min(MAX_DEGREE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// `α n^(-1/(2s+1))`, MSE-optimal at a point.
    Pointwise(SmoothnessSpec),
    /// `α (ln n / n)^(1/(2s+1))`, for sup-norm convergence.
    Uniform(SmoothnessSpec),
    /// `α n^(-1/(2s+1)) / ln n`, undersmoothed so bias vanishes faster than
    /// the standard error.
    Normality(SmoothnessSpec),
    Fixed(f64),
}

impl BandwidthRule {
    pub fn smoothness(&self) -> Option<SmoothnessSpec> {
        match *self {
            BandwidthRule::Pointwise(s) | BandwidthRule::Uniform(s) | BandwidthRule::Normality(s) => {
                Some(s)
            }
            BandwidthRule::Fixed(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BandwidthRule::Pointwise(_) => "pointwise",
            BandwidthRule::Uniform(_) => "uniform",
            BandwidthRule::Normality(_) => "normality",
            BandwidthRule::Fixed(_) => "fixed",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthRule::Fixed(h) if !(h > 0.0 && h <= 1.0) => Err(Error::InvalidConfig(
                format!("fixed bandwidth must lie in (0, 1], got {h}"),
            )),
            BandwidthRule::Fixed(_) => Ok(()),
            _ => {
                let s = self.smoothness().expect("rule carries smoothness");
                SmoothnessSpec::new(s.s, s.holder_constant, s.alpha).map(|_| ())
            }
        }
    }
}

/// Bandwidth for sample size `n` (expects `n ≥ 4`), clamped to `(0, 1]`.
pub fn bandwidth(rule: &BandwidthRule, n: usize) -> f64 {
    let nf = n as f64;
    let raw = match *rule {
        BandwidthRule::Fixed(h) => h,
        BandwidthRule::Pointwise(s) => s.alpha * nf.powf(-1.0 / (2.0 * s.s + 1.0)),
        BandwidthRule::Uniform(s) => s.alpha * (nf.ln() / nf).powf(1.0 / (2.0 * s.s + 1.0)),
        BandwidthRule::Normality(s) => s.alpha * nf.powf(-1.0 / (2.0 * s.s + 1.0)) / nf.ln(),
    };
    if !(raw > 0.0 && raw <= 1.0) {
        log::warn!(
            "{} bandwidth {raw} at n={n} is outside (0, 1]; clamping to 1",
            rule.name()
        );
        return 1.0;
    }
    raw
}

impl fmt::Display for BandwidthRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandwidthRule::Fixed(h) => write!(f, "fixed:{h:?}"),
            _ => {
                let s = self.smoothness().expect("rule carries smoothness");
                write!(
                    f,
                    "{}:s={:?},L={:?},alpha={:?}",
                    self.name(),
                    s.s,
                    s.holder_constant,
                    s.alpha
                )
            }
        }
    }
}

impl FromStr for BandwidthRule {
    type Err = Error;

    /// `fixed:0.3` or `<pointwise|uniform|normality>:s=2,alpha=1[,L=1]`.
    fn from_str(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidConfig(format!("bandwidth `{text}`: {msg}"));
        let (kind, args) = text
            .trim()
            .split_once(':')
            .ok_or_else(|| bad("expected `<rule>:<args>`"))?;
        let kind = kind.trim();
        if kind == "fixed" {
            let h: f64 = args.trim().parse().map_err(|_| bad("fixed needs a number"))?;
            let rule = BandwidthRule::Fixed(h);
            rule.validate()?;
            return Ok(rule);
        }
        let (mut s, mut l, mut alpha) = (None, 1.0, 1.0);
        for kv in args.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("arguments are key=value"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad("argument is not a number"))?;
            match k.trim() {
                "s" => s = Some(v),
                "L" | "l" => l = v,
                "alpha" => alpha = v,
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        let spec = SmoothnessSpec::new(s.ok_or_else(|| bad("missing s"))?, l, alpha)?;
        match kind {
            "pointwise" => Ok(BandwidthRule::Pointwise(spec)),
            "uniform" => Ok(BandwidthRule::Uniform(spec)),
            "normality" => Ok(BandwidthRule::Normality(spec)),
            other => Err(bad(&format!("unknown rule `{other}`"))),
        }
    }
}

impl Serialize for BandwidthRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BandwidthRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Second-stage settings: degree, bandwidth rule and kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub degree: usize,
    pub rule: BandwidthRule,
    pub kernel: Kernel,
}

impl EstimatorConfig {
    /// Degree defaults to `⌊s⌋` when omitted and the rule carries a smoothness.
    pub fn new(rule: BandwidthRule, degree: Option<usize>) -> Result<Self> {
        rule.validate()?;
        let degree = match (degree, rule.smoothness()) {
            (Some(d), _) => d,
            (None, Some(s)) => s.default_degree(),
            (None, None) => {
                return Err(Error::InvalidConfig(
                    "degree is required with a fixed bandwidth".into(),
                ))
            }
        };
        if degree > MAX_DEGREE {
            return Err(Error::InvalidConfig(format!(
                "degree {degree} exceeds maximum {MAX_DEGREE}"
            )));
        }
        Ok(Self {
            degree,
            rule,
            kernel: Kernel::Boxcar,
        })
    }

    pub fn from_local(cfg: LocalPolyConfig) -> Self {
        Self {
            degree: cfg.degree,
            rule: BandwidthRule::Fixed(cfg.bandwidth),
            kernel: cfg.kernel,
        }
    }

    pub fn local_config(&self, n: usize) -> Result<LocalPolyConfig> {
        LocalPolyConfig::with_kernel(self.degree, bandwidth(&self.rule, n), self.kernel)
    }
}

/// Estimates at one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub x0: f64,
    pub fhat: f64,
    pub bhat: f64,
    pub ftilde: f64,
    pub weights: WeightVector,
}

/// Output of one single-split run of the estimator.
#[derive(Debug, Clone)]
pub struct DebiasedFit {
    pub eval_points: Vec<f64>,
    /// One entry per evaluation point; singular designs are reported per point.
    pub points: Vec<Result<PointEstimate, SingularDesign>>,
    pub split: Split,
    pub fold2_xs: Vec<f64>,
    pub fold2_ys: Vec<f64>,
    /// `f̂(X_i)` on fold 2.
    pub fold2_fhat: Vec<f64>,
    /// `r_i = Y_i - f̂(X_i)` on fold 2.
    pub residuals: Vec<f64>,
    pub bandwidth: f64,
    pub degree: usize,
    pub m: usize,
    pub n: usize,
    model: FittedRegressor,
    smoother: LocalPolySmoother,
}

impl DebiasedFit {
    pub fn model(&self) -> &FittedRegressor {
        &self.model
    }

    pub fn smoother(&self) -> &LocalPolySmoother {
        &self.smoother
    }

    pub fn index_of(&self, x0: f64) -> Option<usize> {
        self.eval_points.iter().position(|&p| p == x0)
    }

    pub fn point(&self, x0: f64) -> Result<&PointEstimate> {
        let i = self.index_of(x0).ok_or(Error::PointNotFound(x0))?;
        self.points[i].as_ref().map_err(|_| Error::PointFailed(x0))
    }

    fn column(&self, f: impl Fn(&PointEstimate) -> f64) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.as_ref().ok().map(&f)).collect()
    }

    pub fn fhat(&self) -> Vec<Option<f64>> {
        self.column(|p| p.fhat)
    }

    pub fn bhat(&self) -> Vec<Option<f64>> {
        self.column(|p| p.bhat)
    }

    pub fn ftilde(&self) -> Vec<Option<f64>> {
        self.column(|p| p.ftilde)
    }

    pub fn succeeded(&self) -> usize {
        self.points.iter().filter(|p| p.is_ok()).count()
    }

    /// `b̂(x)` at an arbitrary `x`, computed on demand.
    pub fn bhat_at(&self, x: f64) -> Result<f64> {
        self.smoother.fit_at(x, &self.residuals)
    }

    /// `f̃(x)` at an arbitrary `x ∈ [0, 1]`.
    pub fn predict_at(&self, x: f64) -> Result<f64> {
        Ok(self.model.predict(x)? + self.bhat_at(x)?)
    }
}

/// Both halves of a cross-fitted run and their pointwise averages.
#[derive(Debug, Clone)]
pub struct CrossFit {
    pub primary: DebiasedFit,
    pub swapped: DebiasedFit,
    pub fhat: Vec<Option<f64>>,
    pub bhat: Vec<Option<f64>>,
    pub ftilde: Vec<Option<f64>>,
}

/// First-stage spec plus second-stage settings.
#[derive(Clone)]
pub struct DebiasedEstimator {
    pub regressor: RegressorSpec,
    pub oracle: Option<OracleFn>,
    pub config: EstimatorConfig,
    pub execution: Execution,
}

impl fmt::Debug for DebiasedEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DebiasedEstimator")
            .field("regressor", &self.regressor.to_string())
            .field("oracle", &self.oracle.is_some())
            .field("config", &self.config)
            .field("execution", &self.execution)
            .finish()
    }
}

impl DebiasedEstimator {
    pub fn new(regressor: RegressorSpec, config: EstimatorConfig) -> Self {
        Self {
            regressor,
            oracle: None,
            config,
            execution: Execution::Sequential,
        }
    }

    pub fn with_oracle(mut self, oracle: OracleFn) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Single-split estimate at `eval_points`, splitting with `seed`.
    pub fn estimate(&self, ds: &Dataset, seed: u64, eval_points: &[f64]) -> Result<DebiasedFit> {
        let split = split_even(ds, seed)?;
        self.estimate_with_split(ds, &split, eval_points)
    }

    pub fn estimate_with_split(
        &self,
        ds: &Dataset,
        split: &Split,
        eval_points: &[f64],
    ) -> Result<DebiasedFit> {
        if let Some(&x) = eval_points.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::OutOfDomain(x));
        }
        if split.n() != ds.len() {
            return Err(Error::LengthMismatch {
                what: "split vs dataset",
                left: split.n(),
                right: ds.len(),
            });
        }
        let n = ds.len();
        let local = self.config.local_config(n)?;

        let (x1, y1) = ds.subset(&split.fold1);
        let model = first_stage::fit(&self.regressor, &x1, &y1, self.oracle.as_ref())?;

        let (fold2_xs, fold2_ys) = ds.subset(&split.fold2);
        let fold2_fhat: Vec<f64> = fold2_xs.iter().map(|&x| model.eval(x)).collect();
        let residuals: Vec<f64> = fold2_ys.iter().zip(&fold2_fhat).map(|(y, f)| y - f).collect();
        let m = fold2_xs.len();
        let smoother = LocalPolySmoother::new(&fold2_xs, local);

        let points = par::map_collect(eval_points.to_vec(), self.execution, |x0| {
            let weights = smoother.weights_at(x0)?;
            let bhat = residual_fit(&residuals, &weights, m).expect("weights sized to fold 2");
            let fhat = model.eval(x0);
            Ok(PointEstimate {
                x0,
                fhat,
                bhat,
                ftilde: bhat + fhat,
                weights,
            })
        });

        Ok(DebiasedFit {
            eval_points: eval_points.to_vec(),
            points,
            split: split.clone(),
            fold2_xs,
            fold2_ys,
            fold2_fhat,
            residuals,
            bandwidth: local.bandwidth,
            degree: local.degree,
            m,
            n,
            model,
            smoother,
        })
    }

    /// Runs the estimator with the folds in both roles and averages pointwise.
    pub fn estimate_crossfit(&self, ds: &Dataset, seed: u64, eval_points: &[f64]) -> Result<CrossFit> {
        let split = split_even(ds, seed)?;
        let primary = self.estimate_with_split(ds, &split, eval_points)?;
        let swapped = self.estimate_with_split(ds, &split.swapped(), eval_points)?;
        let avg = |a: Vec<Option<f64>>, b: Vec<Option<f64>>| -> Vec<Option<f64>> {
            a.into_iter()
                .zip(b)
                .map(|(a, b)| Some(0.5 * (a? + b?)))
                .collect()
        };
        Ok(CrossFit {
            fhat: avg(primary.fhat(), swapped.fhat()),
            bhat: avg(primary.bhat(), swapped.bhat()),
            ftilde: avg(primary.ftilde(), swapped.ftilde()),
            primary,
            swapped,
        })
    }
}

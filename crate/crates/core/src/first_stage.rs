//! First-stage regressors.
//!
//! Any regression method can serve as the first stage; the estimator only
//! needs `f0 - f̂` to be smooth. The bundled regressors are deliberately
//! simple. `oracle` returns the true regression function and is only
//! available where that function is known (simulations), and `biased` wraps
//! another regressor with a smooth additive error for robustness studies.
//!
//! Specs have a compact text form used by configs and the CLI:
//!
//! | text               | regressor                                  |
//! |--------------------|--------------------------------------------|
//! | `zero`             | `f̂ ≡ 0`                                     |
//! | `linear`           | ordinary least squares line                |
//! | `knn:5`            | 5-nearest-neighbour mean                   |
//! | `nw:0.1`           | boxcar Nadaraya-Watson, bandwidth 0.1      |
//! | `oracle`           | true `f0`                                  |
//! | `oracle+const:1`   | `f0(x) + 1`                                |
//! | `linear+sine:0.5`  | OLS line plus `0.5 sin(2πx)`               |

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum number of nested `biased` wrappers.
pub const MAX_BIAS_DEPTH: usize = 2;

pub type OracleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Offset {
    Constant(f64),
    /// `amplitude · sin(2πx)`.
    SmoothSine(f64),
}

impl Offset {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Offset::Constant(c) => c,
            Offset::SmoothSine(a) => a * (2.0 * std::f64::consts::PI * x).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegressorSpec {
    Zero,
    Linear,
    Knn { k: usize },
    NadarayaWatson { bandwidth: f64 },
    Oracle,
    Biased { base: Box<RegressorSpec>, offset: Offset },
}

impl RegressorSpec {
    pub fn biased(base: RegressorSpec, offset: Offset) -> Self {
        RegressorSpec::Biased {
            base: Box::new(base),
            offset,
        }
    }

    pub fn bias_depth(&self) -> usize {
        match self {
            RegressorSpec::Biased { base, .. } => 1 + base.bias_depth(),
            _ => 0,
        }
    }

    pub fn uses_oracle(&self) -> bool {
        match self {
            RegressorSpec::Oracle => true,
            RegressorSpec::Biased { base, .. } => base.uses_oracle(),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorSpec::Knn { k } if *k == 0 => {
                Err(Error::InvalidConfig("knn requires k >= 1".into()))
            }
            RegressorSpec::NadarayaWatson { bandwidth } if !(*bandwidth > 0.0) => Err(
                Error::InvalidConfig(format!("nw bandwidth must be > 0, got {bandwidth}")),
            ),
            RegressorSpec::Biased { .. } if self.bias_depth() > MAX_BIAS_DEPTH => Err(
                Error::InvalidConfig(format!("biased nesting deeper than {MAX_BIAS_DEPTH}")),
            ),
            RegressorSpec::Biased { base, offset } => {
                let v = match offset {
                    Offset::Constant(v) | Offset::SmoothSine(v) => *v,
                };
                if !v.is_finite() {
                    return Err(Error::InvalidConfig("offset must be finite".into()));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RegressorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressorSpec::Zero => write!(f, "zero"),
            RegressorSpec::Linear => write!(f, "linear"),
            RegressorSpec::Knn { k } => write!(f, "knn:{k}"),
            RegressorSpec::NadarayaWatson { bandwidth } => write!(f, "nw:{bandwidth:?}"),
            RegressorSpec::Oracle => write!(f, "oracle"),
            RegressorSpec::Biased { base, offset } => match offset {
                Offset::Constant(c) => write!(f, "{base}+const:{c:?}"),
                Offset::SmoothSine(a) => write!(f, "{base}+sine:{a:?}"),
            },
        }
    }
}

impl FromStr for RegressorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidConfig(format!("regressor `{s}`: {msg}"));
        let mut parts = s.trim().split('+');
        let base = parts.next().unwrap_or("").trim();
        let (name, arg) = match base.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (base, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| bad(format!("`{name}` needs a numeric argument")))?
                .parse::<f64>()
                .map_err(|e| bad(e.to_string()))
        };
        let mut spec = match name {
            "zero" => RegressorSpec::Zero,
            "linear" => RegressorSpec::Linear,
            "oracle" => RegressorSpec::Oracle,
            "knn" => {
                let k = arg
                    .ok_or_else(|| bad("knn needs k, e.g. knn:5".into()))?
                    .parse::<usize>()
                    .map_err(|e| bad(e.to_string()))?;
                RegressorSpec::Knn { k }
            }
            "nw" | "nadaraya_watson" => RegressorSpec::NadarayaWatson {
                bandwidth: num(arg)?,
            },
            other => return Err(bad(format!("unknown regressor `{other}`"))),
        };
        if arg.is_some() && matches!(name, "zero" | "linear" | "oracle") {
            return Err(bad(format!("`{name}` takes no argument")));
        }
        for off in parts {
            let (kind, val) = off
                .split_once(':')
                .ok_or_else(|| bad(format!("offset `{off}` must look like const:1 or sine:0.5")))?;
            let v = val.trim().parse::<f64>().map_err(|e| bad(e.to_string()))?;
            let offset = match kind.trim() {
                "const" | "constant" => Offset::Constant(v),
                "sine" | "smooth_sine" => Offset::SmoothSine(v),
                other => return Err(bad(format!("unknown offset `{other}`"))),
            };
            spec = RegressorSpec::biased(spec, offset);
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl Serialize for RegressorSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RegressorSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone)]
enum Model {
    Zero,
    Linear { intercept: f64, slope: f64 },
    Knn { k: usize, xs: Vec<f64>, ys: Vec<f64> },
    NadarayaWatson { bandwidth: f64, xs: Vec<f64>, ys: Vec<f64>, fallback: f64 },
    Oracle(OracleFn),
    Biased { base: Box<FittedRegressor>, offset: Offset },
}

/// A first-stage model trained on fold 1 only. Immutable once built.
#[derive(Clone)]
pub struct FittedRegressor {
    spec: RegressorSpec,
    model: Model,
}

impl fmt::Debug for FittedRegressor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FittedRegressor")
            .field("spec", &self.spec.to_string())
            .finish_non_exhaustive()
    }
}

/// Fits `spec` on the training fold `(xs, ys)`.
///
/// `oracle` supplies the true regression function and is required iff the
/// spec contains `oracle`.
pub fn fit(
    spec: &RegressorSpec,
    xs: &[f64],
    ys: &[f64],
    oracle: Option<&OracleFn>,
) -> Result<FittedRegressor> {
    spec.validate()?;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            what: "training covariates vs targets",
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    let model = match spec {
        RegressorSpec::Zero => Model::Zero,
        RegressorSpec::Linear => {
            let insufficient = Error::InsufficientData {
                kind: "linear",
                needed: 2,
                got: n,
            };
            if n < 2 {
                return Err(insufficient);
            }
            let mx = xs.iter().sum::<f64>() / n as f64;
            let my = ys.iter().sum::<f64>() / n as f64;
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            if sxx <= 0.0 {
                return Err(insufficient);
            }
            let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let slope = sxy / sxx;
            Model::Linear {
                intercept: my - slope * mx,
                slope,
            }
        }
        RegressorSpec::Knn { k } => {
            let needed = (*k).max(2);
            if n < needed {
                return Err(Error::InsufficientData {
                    kind: "knn",
                    needed,
                    got: n,
                });
            }
            Model::Knn {
                k: *k,
                xs: xs.to_vec(),
                ys: ys.to_vec(),
            }
        }
        RegressorSpec::NadarayaWatson { bandwidth } => {
            if n < 1 {
                return Err(Error::InsufficientData {
                    kind: "nadaraya_watson",
                    needed: 1,
                    got: n,
                });
            }
            Model::NadarayaWatson {
                bandwidth: *bandwidth,
                xs: xs.to_vec(),
                ys: ys.to_vec(),
                fallback: ys.iter().sum::<f64>() / n as f64,
            }
        }
        RegressorSpec::Oracle => Model::Oracle(oracle.ok_or(Error::OracleUnavailable)?.clone()),
        RegressorSpec::Biased { base, offset } => {
            return Ok(make_biased(fit(base, xs, ys, oracle)?, *offset));
        }
    };
    Ok(FittedRegressor {
        spec: spec.clone(),
        model,
    })
}

/// Wraps `base` so predictions become `base(x) + δ(x)`.
pub fn make_biased(base: FittedRegressor, offset: Offset) -> FittedRegressor {
    FittedRegressor {
        spec: RegressorSpec::biased(base.spec.clone(), offset),
        model: Model::Biased {
            base: Box::new(base),
            offset,
        },
    }
}

impl FittedRegressor {
    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    /// `f̂(x)` for `x ∈ [0, 1]`.
    pub fn predict(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.eval(x))
    }

    pub fn predict_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.predict(x)).collect()
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        match &self.model {
            Model::Zero => 0.0,
            Model::Linear { intercept, slope } => intercept + slope * x,
            Model::Knn { k, xs, ys } => {
                let mut cand: Vec<(f64, usize)> =
                    xs.iter().enumerate().map(|(i, &xi)| ((xi - x).abs(), i)).collect();
                let k = (*k).min(cand.len());
                let by_dist = |a: &(f64, usize), b: &(f64, usize)| {
                    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                };
                if k < cand.len() {
                    cand.select_nth_unstable_by(k - 1, by_dist);
                }
                // Sum in value order so the mean does not depend on fold order.
                let mut chosen: Vec<f64> = cand[..k].iter().map(|&(_, i)| ys[i]).collect();
                chosen.sort_by(f64::total_cmp);
                chosen.iter().sum::<f64>() / k as f64
            }
            Model::NadarayaWatson {
                bandwidth,
                xs,
                ys,
                fallback,
            } => {
                let (sum, count) = xs
                    .iter()
                    .zip(ys)
                    .filter(|(&xi, _)| (xi - x).abs() <= *bandwidth)
                    .fold((0.0, 0usize), |(s, c), (_, &y)| (s + y, c + 1));
                if count == 0 {
                    *fallback
                } else {
                    sum / count as f64
                }
            }
            Model::Oracle(f) => f(x),
            Model::Biased { base, offset } => base.eval(x) + offset.eval(x),
        }
    }
}

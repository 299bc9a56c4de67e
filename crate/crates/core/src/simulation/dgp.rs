//! Data-generating processes: regression function, noise law and covariate
//! distribution.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::first_stage::OracleFn;
use crate::rng;

macro_rules! serde_via_str {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

fn parse_num(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{what}: `{text}` is not a number")))
}

/// True regression function `f0` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFunction {
    /// `sin(2πx)`; analytic, exercised as Hölder `s = 2`.
    Sine,
    /// `|x - 0.5|^1.5`; Hölder `s = 1.5` at the kink.
    HolderKink,
    /// `1 + 2x`.
    Linear,
}

impl TargetFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TargetFunction::Sine => (2.0 * PI * x).sin(),
            TargetFunction::HolderKink => (x - 0.5).abs().powf(1.5),
            TargetFunction::Linear => 1.0 + 2.0 * x,
        }
    }

    /// Smoothness used for bandwidth rules; the linear function is capped.
    pub fn nominal_smoothness(self) -> f64 {
        match self {
            TargetFunction::Sine => 2.0,
            TargetFunction::HolderKink => 1.5,
            TargetFunction::Linear => 10.0,
        }
    }

    pub fn oracle(self) -> OracleFn {
        Arc::new(move |x| self.eval(x))
    }
}

impl fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetFunction::Sine => "sine",
            TargetFunction::HolderKink => "holder_kink",
            TargetFunction::Linear => "linear",
        })
    }
}

impl FromStr for TargetFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sine" => Ok(TargetFunction::Sine),
            "holder_kink" => Ok(TargetFunction::HolderKink),
            "linear" => Ok(TargetFunction::Linear),
            other => Err(Error::InvalidConfig(format!("unknown regression function `{other}`"))),
        }
    }
}

serde_via_str!(TargetFunction);

/// Sub-Gaussian noise laws. A zero scale gives noiseless data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian { sigma: f64 },
    /// `±sigma` with equal probability.
    ScaledRademacher { sigma: f64 },
    /// Uniform on `[-halfwidth, halfwidth]`.
    UniformCentered { halfwidth: f64 },
}

impl Noise {
    fn scale(self) -> f64 {
        match self {
            Noise::Gaussian { sigma } | Noise::ScaledRademacher { sigma } => sigma,
            Noise::UniformCentered { halfwidth } => halfwidth,
        }
    }

    pub fn validate(self) -> Result<()> {
        let v = self.scale();
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise scale must be >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn std_dev(self) -> f64 {
        match self {
            Noise::Gaussian { sigma } | Noise::ScaledRademacher { sigma } => sigma,
            Noise::UniformCentered { halfwidth } => halfwidth / 3f64.sqrt(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
                }
            }
            Noise::ScaledRademacher { sigma } => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            Noise::UniformCentered { halfwidth } => halfwidth * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

impl fmt::Display for Noise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Noise::Gaussian { sigma } => write!(f, "gaussian:{sigma:?}"),
            Noise::ScaledRademacher { sigma } => write!(f, "rademacher:{sigma:?}"),
            Noise::UniformCentered { halfwidth } => write!(f, "uniform:{halfwidth:?}"),
        }
    }
}

impl FromStr for Noise {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("noise `{s}`: expected kind:scale")))?;
        let v = parse_num(arg, "noise scale")?;
        let noise = match kind.trim() {
            "gaussian" => Noise::Gaussian { sigma: v },
            "rademacher" | "scaled_rademacher" => Noise::ScaledRademacher { sigma: v },
            "uniform" | "uniform_centered" => Noise::UniformCentered { halfwidth: v },
            other => return Err(Error::InvalidConfig(format!("unknown noise `{other}`"))),
        };
        noise.validate()?;
        Ok(noise)
    }
}

serde_via_str!(Noise);

/// Covariate distribution on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateDist {
    Uniform01,
    Beta { a: f64, b: f64 },
}

impl CovariateDist {
    pub fn validate(self) -> Result<()> {
        if let CovariateDist::Beta { a, b } = self {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(Error::InvalidConfig(format!("beta parameters must be > 0, got ({a}, {b})")));
            }
        }
        Ok(())
    }

    pub fn density(self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            CovariateDist::Uniform01 => 1.0,
            CovariateDist::Beta { a, b } => {
                let ln_b = statrs::function::beta::ln_beta(a, b);
                x.powf(a - 1.0) * (1.0 - x).powf(b - 1.0) * (-ln_b).exp()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            CovariateDist::Uniform01 => rng.random::<f64>(),
            CovariateDist::Beta { a, b } => Beta::new(a, b).expect("validated").sample(rng),
        }
    }
}

impl fmt::Display for CovariateDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateDist::Uniform01 => f.write_str("uniform01"),
            CovariateDist::Beta { a, b } => write!(f, "beta:{a:?},{b:?}"),
        }
    }
}

impl FromStr for CovariateDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform01" || s == "uniform" {
            return Ok(CovariateDist::Uniform01);
        }
        let args = s
            .strip_prefix("beta:")
            .ok_or_else(|| Error::InvalidConfig(format!("unknown covariate distribution `{s}`")))?;
        let (a, b) = args
            .split_once(',')
            .ok_or_else(|| Error::InvalidConfig(format!("`{s}`: expected beta:a,b")))?;
        let dist = CovariateDist::Beta {
            a: parse_num(a, "beta a")?,
            b: parse_num(b, "beta b")?,
        };
        dist.validate()?;
        Ok(dist)
    }
}

serde_via_str!(CovariateDist);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dgp {
    pub f0: TargetFunction,
    pub noise: Noise,
    pub covariates: CovariateDist,
}

impl Dgp {
    /// `sin(2πx)`, Gaussian noise with σ = 0.5, uniform covariates.
    pub fn reference() -> Self {
        Self {
            f0: TargetFunction::Sine,
            noise: Noise::Gaussian { sigma: 0.5 },
            covariates: CovariateDist::Uniform01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.covariates.validate()
    }
}

/// `n` i.i.d. draws `X ~ covariates`, `Y = f0(X) + ε`, reproducible per seed.
pub fn draw_sample(dgp: &Dgp, n: usize, seed: u64) -> Result<Dataset> {
    dgp.validate()?;
    let mut g = rng::stream(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = dgp.covariates.sample(&mut g);
        let eps = dgp.noise.sample(&mut g);
        xs.push(x);
        ys.push(dgp.f0.eval(x) + eps);
    }
    Dataset::new(xs, ys)
}

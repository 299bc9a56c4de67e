//! Experiment configuration: a TOML file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use debias_np::simulation::{CovariateDist, Noise, TargetFunction};
use debias_np::{BandwidthRule, RegressorSpec};
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Mode {
    Fit,
    Predict,
    Rate,
    Coverage,
    Normality,
    Uniform,
    Shift,
    DoubleRobustness,
}

impl Mode {
    #[cfg(test)]
    pub const ALL: [Mode; 8] = [
        Mode::Fit,
        Mode::Predict,
        Mode::Rate,
        Mode::Coverage,
        Mode::Normality,
        Mode::Uniform,
        Mode::Shift,
        Mode::DoubleRobustness,
    ];

    pub fn is_simulation(self) -> bool {
        !matches!(self, Mode::Fit | Mode::Predict)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Fit => "fit",
            Mode::Predict => "predict",
            Mode::Rate => "rate",
            Mode::Coverage => "coverage",
            Mode::Normality => "normality",
            Mode::Uniform => "uniform",
            Mode::Shift => "shift",
            Mode::DoubleRobustness => "double_robustness",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Evenly spaced points `from, ..., to`, written `from:to:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.from];
        }
        let step = (self.to - self.from) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.to } else { self.from + step * i as f64 })
            .collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.from, self.to, self.count)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [from, to, count] = parts[..] else {
            return Err(format!("grid `{s}` must look like from:to:count"));
        };
        let num = |v: &str| v.parse::<f64>().map_err(|_| format!("grid `{s}`: `{v}` is not a number"));
        let grid = Grid {
            from: num(from)?,
            to: num(to)?,
            count: count
                .parse()
                .map_err(|_| format!("grid `{s}`: `{count}` is not a count"))?,
        };
        if grid.count == 0 || !(grid.from <= grid.to) {
            return Err(format!("grid `{s}` is empty"));
        }
        Ok(grid)
    }
}

impl Serialize for Grid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Every key accepted in a config file. Flags use the same names with dashes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_col: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_col: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reg: Option<RegressorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<BandwidthRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<TargetFunction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<Noise>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariates: Option<CovariateDist>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<CovariateDist>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<CovariateDist>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $(if $src.$field.is_some() { $dst.$field = $src.$field; })*
    };
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::config(format!("config {}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: ExperimentConfig) -> Self {
        overlay!(self, other; mode, data, x_col, y_col, reg, bandwidth, degree, at, grid, level,
            seed, out, f0, noise, covariates, sample_sizes, replications, train, test);
        self
    }

    pub fn require<'a, T>(value: &'a Option<T>, field: &str) -> Result<&'a T, Failure> {
        value
            .as_ref()
            .ok_or_else(|| Failure::config(format!("missing required field `{field}`")))
    }

    /// Evaluation points from `at` and `grid`, in that order.
    pub fn eval_points(&self) -> Result<Vec<f64>, Failure> {
        let mut pts = self.at.clone().unwrap_or_default();
        if let Some(g) = self.grid {
            pts.extend(g.points());
        }
        if pts.is_empty() {
            return Err(Failure::config("missing required field `at` (or `grid`)"));
        }
        if let Some(bad) = pts.iter().find(|p| !p.is_finite()) {
            return Err(Failure::config(format!("evaluation point {bad} is not finite")));
        }
        Ok(pts)
    }
}

/// Flags shared by every subcommand. Each overrides the config-file key of the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file; flags override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// First-stage regressor: zero | linear | knn:K | nw:H | oracle, optionally +const:C or +sine:A
    #[arg(long, value_name = "SPEC")]
    pub reg: Option<RegressorSpec>,
    /// Bandwidth rule: pointwise|uniform|normality:s=S,alpha=A[,L=C] or fixed:H
    #[arg(long, value_name = "RULE")]
    pub bandwidth: Option<BandwidthRule>,
    /// Local polynomial degree; defaults to floor(s)
    #[arg(long)]
    pub degree: Option<usize>,
    /// Comma-separated evaluation points
    #[arg(long, value_delimiter = ',', num_args = 1.., value_name = "X0,...")]
    pub at: Option<Vec<f64>>,
    /// Evenly spaced evaluation grid from:to:count
    #[arg(long, value_name = "FROM:TO:COUNT")]
    pub grid: Option<Grid>,
    /// Confidence level in (0, 1); defaults to 0.95
    #[arg(long)]
    pub level: Option<f64>,
    /// Seed for the sample split (fit) or master seed (simulate); defaults to 0
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report path; stdout when omitted
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

impl CommonArgs {
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            reg: self.reg.clone(),
            bandwidth: self.bandwidth,
            degree: self.degree,
            at: self.at.clone(),
            grid: self.grid,
            level: self.level,
            seed: self.seed,
            out: self.out.clone(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// CSV file with a header row
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Covariate column; defaults to `x`
    #[arg(long)]
    pub x_col: Option<String>,
    /// Response column; defaults to `y`
    #[arg(long)]
    pub y_col: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    /// Study to run
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Regression function: sine | holder_kink | linear
    #[arg(long)]
    pub f0: Option<TargetFunction>,
    /// Noise law: gaussian:SIGMA | rademacher:SIGMA | uniform:HALFWIDTH
    #[arg(long)]
    pub noise: Option<Noise>,
    /// Covariate law: uniform01 | beta:A,B
    #[arg(long)]
    pub covariates: Option<CovariateDist>,
    /// Comma-separated, strictly increasing sample sizes
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sample_sizes: Option<Vec<usize>>,
    /// Replications per sample size
    #[arg(long)]
    pub replications: Option<usize>,
    /// Training covariate law for shift mode; defaults to beta:2,2
    #[arg(long)]
    pub train: Option<CovariateDist>,
    /// Test covariate law for shift mode; defaults to beta:1,3
    #[arg(long)]
    pub test: Option<CovariateDist>,
    /// Run replications on one thread
    #[arg(long)]
    pub sequential: bool,
}

impl SimArgs {
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            mode: self.mode,
            f0: self.f0,
            noise: self.noise,
            covariates: self.covariates,
            sample_sizes: self.sample_sizes.clone(),
            replications: self.replications,
            train: self.train,
            test: self.test,
            ..Default::default()
        }
    }
}

impl DataArgs {
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            data: self.data.clone(),
            x_col: self.x_col.clone(),
            y_col: self.y_col.clone(),
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_hit_both_ends() {
        let g: Grid = "0.05:0.95:201".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 201);
        assert_eq!(p[0], 0.05);
        assert_eq!(p[200], 0.95);
        assert!((p[100] - 0.5).abs() < 1e-15);
        assert_eq!("0.5:0.5:1".parse::<Grid>().unwrap().points(), vec![0.5]);
        assert!("0.9:0.1:3".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: ExperimentConfig = toml::from_str(
            "mode = \"rate\"\nbandwidth = \"pointwise:s=2,alpha=1\"\nseed = 1\nat = [0.5]\n",
        )
        .unwrap();
        let flags = ExperimentConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.merge(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.mode, Some(Mode::Rate));
        assert_eq!(merged.at, Some(vec![0.5]));
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("bandwith = \"fixed:0.1\"").is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig {
            mode: Some(Mode::DoubleRobustness),
            reg: Some("oracle+const:1".parse().unwrap()),
            bandwidth: Some("uniform:s=2,alpha=1".parse().unwrap()),
            grid: Some("0.05:0.95:11".parse().unwrap()),
            noise: Some("gaussian:0.5".parse().unwrap()),
            covariates: Some("beta:2,2".parse().unwrap()),
            sample_sizes: Some(vec![100, 200]),
            ..Default::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(toml::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }
}

//! Pass/fail thresholds applied to simulation output.
//!
//! The library reports raw numbers only; every threshold lives here.

use debias_np::simulation::{
    CoverageReport, DoubleRobustnessReport, NormalityReport, RateReport, RobustnessScenario,
    ShiftReport, UniformReport,
};
use debias_np::stats::ks_critical_value;
use serde::Serialize;

pub const RATE_SLOPE: (f64, f64) = (-1.0, -0.6);
pub const UNIFORM_SLOPE: (f64, f64) = (-1.05, -0.55);
pub const KS_ALPHA: f64 = 0.01;
pub const Z_MEAN: (f64, f64) = (-0.15, 0.15);
pub const Z_VARIANCE: (f64, f64) = (0.7, 1.3);
pub const SHIFT_RATIO_MAX: f64 = 3.0;
pub const ROBUST_BIAS_MAX: f64 = 0.05;
pub const ROBUST_INVERSIONS_MAX: usize = 1;
pub const ROBUST_INVERSION_SE: f64 = 2.0;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn within(name: &str, value: Option<f64>, (lo, hi): (f64, f64)) -> Self {
        Self {
            name: name.into(),
            value,
            lower: Some(lo),
            upper: Some(hi),
            pass: value.is_some_and(|v| lo <= v && v <= hi),
        }
    }

    fn below(name: &str, value: Option<f64>, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower: None,
            upper: Some(hi),
            pass: value.is_some_and(|v| v < hi),
        }
    }

    fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: None,
            lower: None,
            upper: None,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub kind: &'static str,
    pub pass: bool,
    pub low_confidence: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    fn new(checks: Vec<Check>, low_confidence: bool) -> Self {
        Self {
            kind: "verdict",
            pass: checks.iter().all(|c| c.pass),
            low_confidence,
            checks,
        }
    }
}

/// Acceptance band for empirical coverage at a nominal level.
pub fn coverage_band(level: f64) -> (f64, f64) {
    if (level - 0.95).abs() < 1e-12 {
        (0.90, 0.98)
    } else {
        ((level - 0.08).max(0.0), (level + 0.08).min(1.0))
    }
}

pub fn rate(r: &RateReport) -> Verdict {
    Verdict::new(
        vec![Check::within("mse_slope", r.slope.as_ref().map(|s| s.slope), RATE_SLOPE)],
        r.low_confidence,
    )
}

pub fn coverage(r: &CoverageReport, replications: usize) -> Verdict {
    let band = coverage_band(r.level);
    let checks = r
        .coverage
        .iter()
        .map(|c| Check::within(&format!("coverage[n={},x0={}]", c.n, c.x0), Some(c.coverage), band))
        .collect();
    Verdict::new(checks, replications < 500)
}

pub fn normality(r: &NormalityReport, replications: usize) -> Verdict {
    let mut checks = Vec::new();
    for c in &r.cells {
        let crit = ks_critical_value(KS_ALPHA, c.used).unwrap_or(f64::NAN);
        checks.push(Check::below(&format!("ks[n={}]", c.n), Some(c.ks_statistic), crit));
        checks.push(Check::within(&format!("mean[n={}]", c.n), Some(c.mean), Z_MEAN));
        checks.push(Check::within(&format!("variance[n={}]", c.n), Some(c.variance), Z_VARIANCE));
    }
    Verdict::new(checks, replications < 1000)
}

pub fn uniform(r: &UniformReport, sizes: usize, replications: usize) -> Verdict {
    Verdict::new(
        vec![
            Check::within("sup_sq_slope", r.slope.as_ref().map(|s| s.slope), UNIFORM_SLOPE),
            Check::flag("sup_decreasing", r.decreasing),
        ],
        sizes < 4 || replications < 100,
    )
}

pub fn shift(r: &ShiftReport, replications: usize) -> Verdict {
    let mut checks = Vec::new();
    for s in &r.summaries {
        checks.push(Check::flag(
            &format!("sup_bound_every_replication[n={}]", s.n),
            s.bound_violations == 0,
        ));
        checks.push(Check::within(
            &format!("shift_ratio[n={}]", s.n),
            Some(s.ratio),
            (1.0 / SHIFT_RATIO_MAX, SHIFT_RATIO_MAX),
        ));
    }
    Verdict::new(checks, replications < 100)
}

fn robustness_checks(s: &RobustnessScenario, checks: &mut Vec<Check>) {
    if let Some(last) = s.cells.last() {
        checks.push(Check::below(
            &format!("{}_abs_bias[n={}]", s.name, last.n),
            Some(last.abs_bias),
            ROBUST_BIAS_MAX,
        ));
    }
    let (count, worst) = s.inversions();
    checks.push(Check::flag(
        &format!("{}_monotone", s.name),
        count <= ROBUST_INVERSIONS_MAX && (count == 0 || worst <= ROBUST_INVERSION_SE),
    ));
}

pub fn double_robustness(r: &DoubleRobustnessReport, replications: usize) -> Verdict {
    let mut checks = Vec::new();
    robustness_checks(&r.broken_first_stage, &mut checks);
    robustness_checks(&r.wide_second_stage, &mut checks);
    Verdict::new(checks, replications < 200)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_bands() {
        assert_eq!(coverage_band(0.95), (0.90, 0.98));
        let (lo, hi) = coverage_band(0.5);
        assert!((lo - 0.42).abs() < 1e-12 && (hi - 0.58).abs() < 1e-12);
    }

    #[test]
    fn missing_value_fails() {
        assert!(!Check::within("x", None, (0.0, 1.0)).pass);
        assert!(Check::within("x", Some(1.0), (0.0, 1.0)).pass);
        assert!(!Check::below("x", Some(1.0), 1.0).pass);
    }
}

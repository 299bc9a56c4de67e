//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run a subset with `cargo test --test acceptance -- 4 7`.

use std::time::{Duration, Instant};

use debias_np::debias::SmoothnessSpec;
use debias_np::local_poly::{lp_weights, residual_fit, wls_oracle, LocalPolyConfig};
use debias_np::par::Execution;
use debias_np::simulation::{
    run_coverage, run_double_robustness, run_monte_carlo, run_normality, run_rate, run_shift,
    run_uniform, CovariateDist, Dgp, McConfig, Noise, RobustnessScenario,
};
use debias_np::stats::ks_critical_value;
use debias_np::{bandwidth, BandwidthRule, Offset, RegressorSpec, Report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MASTER_SEED: u64 = 2025;

struct Outcome {
    pass: bool,
    detail: String,
}

fn smooth(s: f64) -> SmoothnessSpec {
    SmoothnessSpec::new(s, 1.0, 1.0).unwrap()
}

fn reference(rule: BandwidthRule, sizes: Vec<usize>, replications: usize) -> McConfig {
    McConfig {
        dgp: Dgp::reference(),
        regressor: RegressorSpec::Zero,
        rule,
        degree: 1,
        sample_sizes: sizes,
        replications,
        eval_points: vec![0.5],
        master_seed: MASTER_SEED,
        level: 0.95,
        execution: Execution::Parallel,
    }
}

fn uniform_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>()).collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut done, mut skipped) = (0.0f64, 0, 0);
    while done < 200 {
        let n = rng.random_range(20..=100usize);
        let degree = rng.random_range(0..=2usize);
        let cfg = LocalPolyConfig::new(degree, rng.random_range(0.05..=1.0)).unwrap();
        let xs = uniform_sample(&mut rng, n);
        let rs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x0 = rng.random::<f64>();
        let Ok(w) = lp_weights(&xs, x0, &cfg) else {
            skipped += 1;
            continue;
        };
        let fast = residual_fit(&rs, &w, n).unwrap();
        let slow = wls_oracle(&xs, &rs, x0, &cfg).unwrap()[0];
        worst = worst.max((fast - slow).abs());
        done += 1;
    }
    Outcome {
        pass: worst < 1e-8,
        detail: format!("max |residual_fit - oracle| = {worst:.3e} over {done} instances ({skipped} singular redrawn)"),
    }
}

fn polynomial_reproduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut checks = 0;
    for degree in 0..=3usize {
        for _design in 0..5 {
            let n = rng.random_range(50..=300usize);
            let xs = uniform_sample(&mut rng, n);
            let cfg = LocalPolyConfig::new(degree, rng.random_range(0.1..=0.6)).unwrap();
            let mut points = 0;
            while points < 50 {
                let x0 = rng.random::<f64>();
                let Ok(w) = lp_weights(&xs, x0, &cfg) else { continue };
                let w = w.normalized();
                for k in 0..=degree {
                    let got: f64 = w.iter().map(|(i, wi)| xs[i].powi(k as i32) * wi).sum();
                    worst = worst.max((got - x0.powi(k as i32)).abs());
                    checks += 1;
                }
                points += 1;
            }
        }
    }
    Outcome {
        pass: worst < 1e-9,
        detail: format!("max |Σ Q(X_i) W_i - Q(x0)| = {worst:.3e} over {checks} monomial checks"),
    }
}

fn weight_support_and_magnitude() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rule = BandwidthRule::Pointwise(smooth(2.0));
    let mut support_ok = true;
    let mut constants = Vec::new();
    for n in [100usize, 1_000, 10_000] {
        let h = bandwidth(&rule, n);
        let cfg = LocalPolyConfig::new(1, h).unwrap();
        let mut worst = 0.0f64;
        for _instance in 0..5 {
            let xs = uniform_sample(&mut rng, n);
            for _ in 0..20 {
                let x0 = rng.random::<f64>();
                let Ok(w) = lp_weights(&xs, x0, &cfg) else { continue };
                let dense = w.normalized().to_dense();
                for (x, wi) in xs.iter().zip(&dense) {
                    if (x - x0).abs() > h && *wi != 0.0 {
                        support_ok = false;
                    }
                }
                let max = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                worst = worst.max(n as f64 * h * max);
            }
        }
        constants.push(worst);
    }
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = constants.iter().copied().fold(0.0, f64::max);
    Outcome {
        pass: support_ok && hi / lo < 10.0,
        detail: format!(
            "support exact: {support_ok}; (n h) max|W| at n=100,1000,10000: {constants:.3?}; max/min = {:.3}",
            hi / lo
        ),
    }
}

fn pointwise_rate() -> Outcome {
    let sizes = vec![250, 500, 1000, 2000, 4000, 8000];
    let mut pass = true;
    let mut parts = Vec::new();
    for reg in [
        RegressorSpec::Zero,
        RegressorSpec::biased(RegressorSpec::Oracle, Offset::Constant(0.5)),
    ] {
        let mut cfg = reference(BandwidthRule::Pointwise(smooth(2.0)), sizes.clone(), 200);
        cfg.regressor = reg.clone();
        let r = run_rate(&cfg).unwrap();
        let slope = r.slope.as_ref().map(|s| s.slope);
        pass &= slope.is_some_and(|s| (-1.0..=-0.6).contains(&s));
        parts.push(format!(
            "{reg}: slope {:.4} (se {:.4})",
            slope.unwrap_or(f64::NAN),
            r.slope.and_then(|s| s.std_error).unwrap_or(f64::NAN)
        ));
    }
    Outcome {
        pass,
        detail: format!("{} ; band [-1.0, -0.6]", parts.join(", ")),
    }
}

fn ci_coverage() -> Outcome {
    let cfg = reference(BandwidthRule::Normality(smooth(2.0)), vec![2000], 500);
    let r = run_coverage(&cfg).unwrap();
    let c = r.coverage[0].coverage;
    Outcome {
        pass: (0.90..=0.98).contains(&c),
        detail: format!("coverage {c:.4} over {} intervals ; band [0.90, 0.98]", r.coverage[0].intervals),
    }
}

fn normality() -> Outcome {
    let cfg = reference(BandwidthRule::Normality(smooth(2.0)), vec![4000], 1000);
    let r = run_normality(&cfg).unwrap();
    let c = &r.cells[0];
    let crit = ks_critical_value(0.01, c.used).unwrap();
    Outcome {
        pass: c.ks_statistic < crit
            && (-0.15..=0.15).contains(&c.mean)
            && (0.7..=1.3).contains(&c.variance),
        detail: format!(
            "KS {:.4} (1% critical {crit:.4}), mean {:.4}, variance {:.4}, used {}, excluded {}",
            c.ks_statistic, c.mean, c.variance, c.used, c.excluded
        ),
    }
}

fn uniform_rate() -> Outcome {
    let mut cfg = reference(
        BandwidthRule::Uniform(smooth(2.0)),
        vec![500, 1000, 2000, 4000, 8000, 16000],
        100,
    );
    cfg.eval_points = (0..201).map(|i| 0.05 + 0.9 * i as f64 / 200.0).collect();
    let r = run_uniform(&cfg).unwrap();
    let slope = r.slope.as_ref().map(|s| s.slope);
    let sups: Vec<f64> = r.mc.sup.iter().map(|s| s.mean_sup).collect();
    Outcome {
        pass: slope.is_some_and(|s| (-1.05..=-0.55).contains(&s)) && r.decreasing,
        detail: format!(
            "slope {:.4} ; band [-1.05, -0.55] ; mean sup by n {sups:.4?} ; decreasing {}",
            slope.unwrap_or(f64::NAN),
            r.decreasing
        ),
    }
}

fn covariate_shift() -> Outcome {
    let cfg = reference(BandwidthRule::Uniform(smooth(2.0)), vec![4000], 100);
    let train = CovariateDist::Beta { a: 2.0, b: 2.0 };
    let test = CovariateDist::Beta { a: 1.0, b: 3.0 };
    let r = run_shift(&cfg, train, test).unwrap();
    let s = &r.summaries[0];
    Outcome {
        pass: s.bound_violations == 0 && s.ratio <= 3.0 && s.ratio >= 1.0 / 3.0,
        detail: format!(
            "bound violations {}/{}, shifted/unshifted MSE {:.4} ({:.3e}/{:.3e}) ; NW baseline ratio {:.4} ({:.3e}/{:.3e})",
            s.bound_violations,
            r.records.len(),
            s.ratio,
            s.mean_test_mse,
            s.mean_train_mse,
            s.baseline_ratio,
            s.mean_baseline_test_mse,
            s.mean_baseline_train_mse
        ),
    }
}

fn scenario_ok(s: &RobustnessScenario) -> (bool, String) {
    let last = s.cells.last().unwrap();
    let (count, worst) = s.inversions();
    let ok = last.abs_bias < 0.05 && count <= 1 && (count == 0 || worst <= 2.0);
    let biases: Vec<f64> = s.cells.iter().map(|c| c.abs_bias).collect();
    (
        ok,
        format!(
            "{}: |bias| by n {biases:.5?}, inversions {count} (worst {worst:.2} se)",
            s.name
        ),
    )
}

fn double_robustness() -> Outcome {
    let sizes = vec![1000, 2000, 4000, 8000];
    let cfg = reference(BandwidthRule::Pointwise(smooth(2.0)), sizes.clone(), 200);
    let r = run_double_robustness(&cfg).unwrap();
    let (a_ok, a) = scenario_ok(&r.broken_first_stage);
    let (b_ok, b) = scenario_ok(&r.wide_second_stage);

    let mut quiet = cfg.clone();
    quiet.dgp.noise = Noise::Gaussian { sigma: 0.0 };
    quiet.regressor = RegressorSpec::biased(RegressorSpec::Oracle, Offset::Constant(1.0));
    let mc = run_monte_carlo(&quiet, false).unwrap();
    let f0 = quiet.dgp.f0.eval(0.5);
    let exact = mc
        .replications
        .iter()
        .map(|rec| (rec.ftilde[0].unwrap() - f0).abs())
        .fold(0.0f64, f64::max);
    Outcome {
        pass: a_ok && b_ok && exact < 1e-10,
        detail: format!("{a} ; {b} ; noiseless broken first stage max error {exact:.3e}"),
    }
}

fn records_text(cfg: &McConfig) -> String {
    let mc = run_monte_carlo(cfg, true).unwrap();
    let mut report = Report::new(serde_json::to_value(cfg).unwrap());
    for r in &mc.replications {
        report.push(r).unwrap();
    }
    for c in &mc.cells {
        report.push(c).unwrap();
    }
    report.records_text().unwrap()
}

fn determinism() -> Outcome {
    let mut cfg = reference(BandwidthRule::Pointwise(smooth(2.0)), vec![200, 800], 20);
    cfg.eval_points = vec![0.25, 0.5, 0.75];
    let first = records_text(&cfg);
    let second = records_text(&cfg);
    cfg.execution = Execution::Sequential;
    let sequential = records_text(&cfg);
    cfg.execution = Execution::Parallel;

    let base = run_monte_carlo(&cfg, true).unwrap();
    let mut grown = cfg.clone();
    grown.sample_sizes = vec![200, 400, 800];
    let extended = run_monte_carlo(&grown, true).unwrap();
    let untouched = base.replications.iter().all(|rec| {
        extended
            .replications
            .iter()
            .any(|other| other.n == rec.n && other.replication == rec.replication && other == rec)
    }) && base.cells.iter().all(|c| extended.cells.contains(c));
    Outcome {
        pass: first == second && first == sequential && untouched,
        detail: format!(
            "rerun identical {}, sequential identical {}, cells unchanged after adding n=400 {}",
            first == second,
            first == sequential,
            untouched
        ),
    }
}

type Criterion = (u32, &'static str, u64, fn() -> Outcome);

const CRITERIA: [Criterion; 10] = [
    (1, "oracle equivalence", 10, oracle_equivalence),
    (2, "polynomial reproduction", 5, polynomial_reproduction),
    (3, "weight support and magnitude", 60, weight_support_and_magnitude),
    (4, "pointwise rate", 300, pointwise_rate),
    (5, "confidence interval coverage", 180, ci_coverage),
    (6, "normality of standardized errors", 600, normality),
    (7, "uniform rate", 600, uniform_rate),
    (8, "covariate shift", 180, covariate_shift),
    (9, "double robustness", 240, double_robustness),
    (10, "determinism", 60, determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failures = 0;
    for (id, name, budget, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = outcome.pass && in_time;
        failures += usize::from(!pass);
        println!(
            "criterion {id:>2} {name}: {} | {} | {:.1}s (budget {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

mod config;
mod exit;
mod verdict;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use debias_np::inference::confidence_interval;
use debias_np::par::Execution;
use debias_np::simulation::{
    self, CovariateDist, Dgp, McConfig, McReport, Noise, TargetFunction,
};
use debias_np::{
    load_csv, write_report, DebiasedEstimator, EstimatorConfig, RegressorSpec, Report,
};
use serde::Serialize;
use serde_json::{json, Value};

use config::{CommonArgs, DataArgs, ExperimentConfig, Mode, SimArgs};
use exit::Failure;

const AFTER_HELP: &str = "\
Modes:
  fit                 debiased estimate, variance and confidence interval at each point of CSV data
  predict             debiased point predictions on CSV data
  rate                pointwise MSE against n and its log-log slope
  coverage            empirical coverage of the confidence interval
  normality           Kolmogorov-Smirnov distance of standardized errors from N(0, 1)
  uniform             sup-norm error over a grid against n / ln n
  shift               population MSE under a shifted covariate law
  double_robustness   bias with a broken first stage or a non-shrinking bandwidth

Config keys (TOML; flags with the same name, dashes for underscores, override them):
  mode, data, x_col, y_col, reg, bandwidth, degree, at, grid, level, seed, out,
  f0, noise, covariates, sample_sizes, replications, train, test

Exit status: 0 success, 2 config error, 3 data error, 4 estimation failed everywhere.";

#[derive(Debug, Parser)]
#[command(name = "debias-np", version, about = "Debiased nonparametric regression", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate with confidence intervals on CSV data (mode `fit`)
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Point predictions on CSV data (mode `predict`)
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run a Monte Carlo study (modes rate, coverage, normality, uniform, shift, double_robustness)
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, Failure> {
    match cli.command {
        Command::Fit { common, data } => {
            let cfg = resolve(&common, data.to_config(), Mode::Fit, false)?;
            cmd_fit(cfg)
        }
        Command::Predict { common, data } => {
            let cfg = resolve(&common, data.to_config(), Mode::Predict, false)?;
            cmd_fit(cfg)
        }
        Command::Simulate { common, sim } => {
            let execution = if sim.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let mut flags = sim.to_config();
            let mode_from_flag = flags.mode.is_some();
            let mode = match flags.mode.take() {
                Some(m) => m,
                None => file_mode(&common)?
                    .ok_or_else(|| Failure::config("missing required field `mode`"))?,
            };
            if !mode.is_simulation() {
                return Err(Failure::config(format!(
                    "mode `{mode}` is not a simulation mode; use the `{mode}` subcommand"
                )));
            }
            let cfg = resolve(&common, flags, mode, mode_from_flag)?;
            cmd_simulate(cfg, execution)
        }
    }
}

fn file_mode(common: &CommonArgs) -> Result<Option<Mode>, Failure> {
    Ok(match &common.config {
        Some(path) => ExperimentConfig::load(path)?.mode,
        None => None,
    })
}

/// Config file, then subcommand flags, then common flags.
///
/// A `mode` in the file must match `mode` unless `mode_from_flag` is set.
fn resolve(
    common: &CommonArgs,
    extra: ExperimentConfig,
    mode: Mode,
    mode_from_flag: bool,
) -> Result<ExperimentConfig, Failure> {
    let file = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(m) = file.mode {
        if m != mode && !mode_from_flag {
            return Err(Failure::config(format!(
                "config sets mode `{m}` but `{mode}` was requested"
            )));
        }
    }
    let mut cfg = file.merge(extra).merge(common.to_config());
    cfg.mode = Some(mode);
    Ok(cfg)
}

fn reject(mode: Mode, fields: &[(&str, bool)]) -> Result<(), Failure> {
    match fields.iter().find(|(_, set)| *set) {
        Some((name, _)) => Err(Failure::config(format!("key `{name}` is not used in mode `{mode}`"))),
        None => Ok(()),
    }
}

fn emit(report: &Report, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => write_report(report, path).map_err(|e| Failure::data(e.to_string())),
        None => {
            print!("{}", report.to_text().map_err(|e| Failure::data(e.to_string()))?);
            Ok(())
        }
    }
}

fn meta(cfg: &ExperimentConfig) -> Value {
    json!({
        "tool": "debias-np",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
    })
}

fn push(report: &mut Report, kind: &str, record: &impl Serialize) -> Result<(), Failure> {
    let mut value = serde_json::to_value(record).map_err(|e| Failure::data(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.insert("kind".into(), Value::from(kind));
    }
    report.records.push(value);
    Ok(())
}

fn cmd_fit(mut cfg: ExperimentConfig) -> Result<i32, Failure> {
    let mode = cfg.mode.expect("resolved");
    reject(
        mode,
        &[
            ("f0", cfg.f0.is_some()),
            ("noise", cfg.noise.is_some()),
            ("covariates", cfg.covariates.is_some()),
            ("sample_sizes", cfg.sample_sizes.is_some()),
            ("replications", cfg.replications.is_some()),
            ("train", cfg.train.is_some()),
            ("test", cfg.test.is_some()),
        ],
    )?;
    let data = ExperimentConfig::require(&cfg.data, "data")?.clone();
    let reg = ExperimentConfig::require(&cfg.reg, "reg")?.clone();
    let rule = *ExperimentConfig::require(&cfg.bandwidth, "bandwidth")?;
    if reg.uses_oracle() {
        return Err(Failure::config(format!(
            "regressor `{reg}` needs the true regression function and is only available in simulations"
        )));
    }
    reg.validate()?;
    let est_cfg = EstimatorConfig::new(rule, cfg.degree)?;
    let raw_points = cfg.eval_points()?;
    let level = *cfg.level.get_or_insert(0.95);
    if !(level > 0.0 && level < 1.0) {
        return Err(Failure::config(format!("level must lie in (0, 1), got {level}")));
    }
    let seed = *cfg.seed.get_or_insert(0);
    let x_col = cfg.x_col.get_or_insert_with(|| "x".into()).clone();
    let y_col = cfg.y_col.get_or_insert_with(|| "y".into()).clone();
    cfg.degree = Some(est_cfg.degree);

    let ds = load_csv(&data, &x_col, &y_col)?;
    let rescale = ds.rescale();
    let points: Vec<f64> = raw_points.iter().map(|&x| rescale.apply(x)).collect();
    if let Some((raw, _)) = raw_points
        .iter()
        .zip(&points)
        .find(|(_, s)| !(0.0..=1.0).contains(*s))
    {
        return Err(Failure::config(format!(
            "evaluation point {raw} lies outside the covariate range of the data"
        )));
    }

    let fit = DebiasedEstimator::new(reg, est_cfg).estimate(&ds, seed, &points)?;
    let mut report = Report::new(meta(&cfg));
    let mut failed = 0;
    for ((&raw, &x0), point) in raw_points.iter().zip(&points).zip(&fit.points) {
        let record = match point {
            Ok(p) => {
                let mut rec = json!({
                    "x0": raw,
                    "x0_scaled": x0,
                    "status": "ok",
                    "fhat": p.fhat,
                    "bhat": p.bhat,
                    "ftilde": p.ftilde,
                });
                if mode == Mode::Fit {
                    match confidence_interval(&fit, x0, level) {
                        Ok(ci) => {
                            rec["var_hat"] = json!(ci.var_hat);
                            rec["v_hat"] = json!(ci.v_hat);
                            rec["ci_lo"] = json!(ci.ci_lo);
                            rec["ci_hi"] = json!(ci.ci_hi);
                            rec["level"] = json!(ci.level);
                        }
                        Err(e) => rec["inference_error"] = json!(e.to_string()),
                    }
                }
                rec
            }
            Err(s) => {
                failed += 1;
                json!({
                    "x0": raw,
                    "x0_scaled": x0,
                    "status": "singular_design",
                    "reason": s.to_string(),
                    "in_window_count": s.in_window_count,
                })
            }
        };
        push(&mut report, "point", &record)?;
    }
    let succeeded = points.len() - failed;
    push(
        &mut report,
        "summary",
        &json!({
            "n": fit.n,
            "m": fit.m,
            "bandwidth": fit.bandwidth,
            "degree": fit.degree,
            "succeeded": succeeded,
            "failed": failed,
            "rescale": rescale,
        }),
    )?;
    emit(&report, &cfg.out)?;
    if succeeded == 0 {
        eprintln!("error: estimation failed at every evaluation point");
        return Ok(exit::ESTIMATION);
    }
    Ok(exit::OK)
}

fn push_mc(report: &mut Report, mc: &McReport, scenario: Option<&str>) -> Result<(), Failure> {
    let tag = |v: &mut Value| {
        if let (Some(s), Value::Object(map)) = (scenario, v) {
            map.insert("scenario".into(), Value::from(s));
        }
    };
    for (kind, values) in [
        ("replication", to_values(&mc.replications)?),
        ("cell", to_values(&mc.cells)?),
        ("sup", to_values(&mc.sup)?),
    ] {
        for mut v in values {
            tag(&mut v);
            push(report, kind, &v)?;
        }
    }
    Ok(())
}

fn to_values<T: Serialize>(items: &[T]) -> Result<Vec<Value>, Failure> {
    items
        .iter()
        .map(|i| serde_json::to_value(i).map_err(|e| Failure::data(e.to_string())))
        .collect()
}

fn cmd_simulate(mut cfg: ExperimentConfig, execution: Execution) -> Result<i32, Failure> {
    let mode = cfg.mode.expect("resolved");
    reject(
        mode,
        &[
            ("data", cfg.data.is_some()),
            ("x_col", cfg.x_col.is_some()),
            ("y_col", cfg.y_col.is_some()),
            ("train", mode != Mode::Shift && cfg.train.is_some()),
            ("test", mode != Mode::Shift && cfg.test.is_some()),
            ("covariates", mode == Mode::Shift && cfg.covariates.is_some()),
        ],
    )?;
    let rule = *ExperimentConfig::require(&cfg.bandwidth, "bandwidth")?;
    let sample_sizes = ExperimentConfig::require(&cfg.sample_sizes, "sample_sizes")?.clone();
    let replications = *ExperimentConfig::require(&cfg.replications, "replications")?;
    let eval_points = cfg.eval_points()?;
    let est_cfg = EstimatorConfig::new(rule, cfg.degree)?;
    cfg.degree = Some(est_cfg.degree);
    let reg = cfg.reg.get_or_insert(RegressorSpec::Zero).clone();
    let f0 = *cfg.f0.get_or_insert(TargetFunction::Sine);
    let noise = *cfg.noise.get_or_insert(Noise::Gaussian { sigma: 0.5 });
    let level = *cfg.level.get_or_insert(0.95);
    let seed = *cfg.seed.get_or_insert(0);
    let covariates = if mode == Mode::Shift {
        cfg.train.get_or_insert(CovariateDist::Beta { a: 2.0, b: 2.0 });
        cfg.test.get_or_insert(CovariateDist::Beta { a: 1.0, b: 3.0 });
        cfg.train.expect("set")
    } else {
        *cfg.covariates.get_or_insert(CovariateDist::Uniform01)
    };

    let mc = McConfig {
        dgp: Dgp {
            f0,
            noise,
            covariates,
        },
        regressor: reg,
        rule,
        degree: est_cfg.degree,
        sample_sizes: sample_sizes.clone(),
        replications,
        eval_points,
        master_seed: seed,
        level,
        execution,
    };
    mc.validate()?;

    let mut report = Report::new(meta(&cfg));
    let verdict = match mode {
        Mode::Rate => {
            let r = simulation::run_rate(&mc)?;
            push_mc(&mut report, &r.mc, None)?;
            push(
                &mut report,
                "slope",
                &json!({ "x0": r.x0, "slope": r.slope, "low_confidence": r.low_confidence }),
            )?;
            verdict::rate(&r)
        }
        Mode::Coverage => {
            let r = simulation::run_coverage(&mc)?;
            push_mc(&mut report, &r.mc, None)?;
            for c in &r.coverage {
                push(&mut report, "coverage", c)?;
            }
            verdict::coverage(&r, replications)
        }
        Mode::Normality => {
            let r = simulation::run_normality(&mc)?;
            push_mc(&mut report, &r.mc, None)?;
            for c in &r.cells {
                push(&mut report, "normality", c)?;
            }
            verdict::normality(&r, replications)
        }
        Mode::Uniform => {
            let r = simulation::run_uniform(&mc)?;
            push_mc(&mut report, &r.mc, None)?;
            push(
                &mut report,
                "slope",
                &json!({ "slope": r.slope, "decreasing": r.decreasing }),
            )?;
            verdict::uniform(&r, sample_sizes.len(), replications)
        }
        Mode::Shift => {
            let r = simulation::run_shift(&mc, covariates, cfg.test.expect("set"))?;
            for rec in &r.records {
                push(&mut report, "replication", rec)?;
            }
            for s in &r.summaries {
                push(&mut report, "shift", s)?;
            }
            verdict::shift(&r, replications)
        }
        Mode::DoubleRobustness => {
            let r = simulation::run_double_robustness(&mc)?;
            for s in [&r.broken_first_stage, &r.wide_second_stage] {
                push_mc(&mut report, &s.mc, Some(&s.name))?;
                for c in &s.cells {
                    let mut v = serde_json::to_value(c).map_err(|e| Failure::data(e.to_string()))?;
                    v["scenario"] = json!(s.name);
                    v["regressor"] = json!(s.regressor);
                    v["rule"] = json!(s.rule);
                    push(&mut report, "robustness", &v)?;
                }
            }
            verdict::double_robustness(&r, replications)
        }
        Mode::Fit | Mode::Predict => unreachable!("checked by caller"),
    };
    push(&mut report, "verdict", &verdict)?;
    emit(&report, &cfg.out)?;
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn help_names_every_mode() {
        let help = Cli::command().render_long_help().to_string();
        for m in Mode::ALL {
            assert!(help.contains(m.name()), "{m}");
        }
    }
}

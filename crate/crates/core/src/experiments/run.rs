//! Runs a configured experiment and writes its report files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::curvature::{curvature, CurvatureOptions};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::predictive::{
    assla_log_ppd, laplace_mc_ppd, normalize_grid, ssla_log_ppd, Engine, EngineOptions, GridCenter, GridConfig,
};

use super::config::{ExperimentConfig, ExperimentKind};
use super::conjugate::{data_seed, fit_setting, run_conjugate_validation, ConjugateSetting};
use super::csv_bench::{ingest_for, run_csv_benchmark};
use super::hetero::{prepare_hetero, run_hetero_benchmark, train_heteroscedastic, HeteroRun, HeteroSetup};
use super::modularity::run_prior_modularity;
use super::precision::run_cancellation_study;
use super::report::{write_atomic, write_grid, Cell, JsonLog, Table};
use super::seeds::{SeedSplitter, Stream};

pub const CONFIG_ECHO: &str = "resolved_config.txt";
const SCALE_NOTE: &str = "scale: standardized targets (population variance)";

/// Files written by a run, in creation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    fn add(&mut self, p: PathBuf) {
        self.files.push(p);
    }
}

/// Writes the resolved configuration before anything is computed.
pub fn echo_config(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let path = out.join(CONFIG_ECHO);
    write_atomic(&path, cfg.to_text().as_bytes())?;
    Ok(path)
}

fn header(cfg: &ExperimentConfig, t: Table) -> Table {
    t.note(format!("experiment: {}", cfg.experiment.as_str()))
        .note(format!("seed: {}", cfg.seed))
}

/// Dispatches on `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let mut summary = RunSummary::default();
    summary.add(echo_config(cfg, out)?);
    let mut log = JsonLog::with_config(cfg)?;
    match cfg.experiment {
        ExperimentKind::ConjugateNormal | ExperimentKind::ConjugatePoisson => {
            let run = run_conjugate_validation(cfg)?;
            let mut t = header(
                cfg,
                Table::new(
                    "conjugate_kl",
                    &[
                        "n",
                        "replicate",
                        "engine",
                        "kl",
                        "total_variation",
                        "entropy_analytic",
                        "entropy_engine",
                    ],
                ),
            )
            .note("kl: KL(analytic || engine) between normalized grid densities");
            for r in &run.rows {
                t.push(vec![
                    r.n.into(),
                    r.replicate.into(),
                    r.engine.as_str().into(),
                    r.kl.into(),
                    r.total_variation.into(),
                    r.entropy_analytic.into(),
                    r.entropy_engine.into(),
                ]);
                log.record(&serde_json::json!({ "record": "conjugate", "row": r }))?;
            }
            summary.add(t.write(out)?);
            for g in &run.grids {
                let p = out.join("grids").join(format!("{}.csv", g.label));
                write_grid(&p, &g.grid)?;
                summary.add(p);
            }
        }
        ExperimentKind::Cancellation => {
            let rows = run_cancellation_study(cfg)?;
            let mut t = header(
                cfg,
                Table::new(
                    "precision_study",
                    &[
                        "n",
                        "runs",
                        "kl_mean",
                        "kl_sd",
                        "max_abs_log_err_mean",
                        "max_abs_log_err_sd",
                        "frac_delta_zero",
                        "frac_nonfinite",
                    ],
                ),
            )
            .note(format!("naive path precision: {}", cfg.precision.as_str()))
            .note("reference: per-term increment in double precision");
            for r in &rows {
                t.push(vec![
                    r.n.into(),
                    r.runs.into(),
                    r.kl_mean.into(),
                    r.kl_sd.into(),
                    r.max_abs_log_err_mean.into(),
                    r.max_abs_log_err_sd.into(),
                    r.frac_delta_zero.into(),
                    r.frac_nonfinite.into(),
                ]);
                log.record(&serde_json::json!({ "record": "precision", "row": r }))?;
            }
            summary.add(t.write(out)?);
        }
        ExperimentKind::PriorModularity => {
            let rows = run_prior_modularity(cfg)?;
            let mut a = header(cfg, Table::new("prior_modularity_self", &["prior", "ssla", "assla"]))
                .note("unnormalized engine values at the self-prediction");
            let mut b = header(
                cfg,
                Table::new(
                    "prior_modularity_off",
                    &["prior", "ssla", "assla", "ssla_minus_assla", "ssla_minus_ssla_noninfo"],
                ),
            )
            .note(format!(
                "unnormalized engine values at the self-prediction + {}",
                cfg.modularity.offset
            ));
            for r in &rows {
                let label = format!("N(0,{})", r.prior_variance);
                a.push(vec![label.clone().into(), r.ssla_self.into(), r.assla_self.into()]);
                b.push(vec![
                    label.into(),
                    r.ssla_off.into(),
                    r.assla_off.into(),
                    r.ssla_minus_assla.into(),
                    r.ssla_minus_noninfo.into(),
                ]);
                log.record(&serde_json::json!({ "record": "prior-modularity", "row": r }))?;
            }
            summary.add(a.write(out)?);
            summary.add(b.write(out)?);
        }
        ExperimentKind::HeteroToy => {
            let runs = run_hetero_benchmark(cfg)?;
            write_calibration(cfg, "hetero", &runs, out, &mut log, &mut summary)?;
        }
        ExperimentKind::CsvRegression => {
            let (data, run) = run_csv_benchmark(cfg)?;
            log.record(&serde_json::json!({
                "record": "ingest",
                "features": data.features,
                "target": data.target,
                "dropped": data.dropped,
                "n_train": data.train.len(),
                "n_test": data.test.len(),
            }))?;
            write_calibration(cfg, "csv", &[run], out, &mut log, &mut summary)?;
        }
    }
    let p = out.join("run.jsonl");
    log.write(&p)?;
    summary.add(p);
    Ok(summary)
}

fn write_calibration(
    cfg: &ExperimentConfig,
    prefix: &str,
    runs: &[HeteroRun],
    out: &Path,
    log: &mut JsonLog,
    summary: &mut RunSummary,
) -> Result<()> {
    let mut cols = vec!["replicate".to_string(), "level".to_string()];
    for &e in &cfg.engines {
        for &k in &cfg.curvature {
            cols.push(format!("{}_{}", e.as_str(), k.as_str()));
        }
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut cov = header(cfg, Table::new(&format!("{prefix}_coverage"), &col_refs))
        .note(SCALE_NOTE)
        .note("coverage in percent of held-out targets inside closed equal-tailed intervals");
    let mut scores = header(
        cfg,
        Table::new(
            &format!("{prefix}_scores"),
            &[
                "replicate",
                "engine",
                "kind",
                "mean_nll",
                "mean_crps",
                "n_test",
                "n_clamped",
                "unconverged_refits",
            ],
        ),
    )
    .note(SCALE_NOTE);
    for run in runs {
        for &level in &cfg.levels {
            let mut row: Vec<Cell> = vec![run.replicate.into(), level.into()];
            for c in &run.cells {
                row.push(c.report.coverage_at(level).unwrap_or(f64::NAN).into());
            }
            cov.push(row);
        }
        for c in &run.cells {
            scores.push(vec![
                run.replicate.into(),
                c.engine.as_str().into(),
                c.kind.as_str().into(),
                c.report.mean_nll.into(),
                c.report.mean_crps.into(),
                c.report.n_test.into(),
                c.report.n_clamped.into(),
                c.unconverged_refits.into(),
            ]);
        }
        log.record(&serde_json::json!({ "record": prefix, "run": run }))?;
    }
    summary.add(cov.write(out)?);
    summary.add(scores.write(out)?);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct FitRecord<'a> {
    experiment: &'static str,
    n_train: usize,
    theta: &'a [f64],
    objective_value: f64,
    gradient_norm: f64,
    iterations: usize,
    converged: bool,
}

/// A fitted model, ready for one-shot predictive evaluations.
enum Fitted {
    Conjugate(ConjugateSetting, crate::data::Dataset, FitResult),
    Hetero(HeteroSetup),
}

fn fit_for(cfg: &ExperimentConfig) -> Result<Fitted> {
    match cfg.experiment {
        ExperimentKind::ConjugateNormal | ExperimentKind::ConjugatePoisson => {
            let setting = ConjugateSetting::new(cfg.experiment)?;
            let n = *cfg.n.first().ok_or_else(|| Error::config("n is empty"))?;
            let data = setting.generate(n, data_seed(cfg.seed, n, 0))?;
            let fit = fit_setting(&setting, &data)?;
            Ok(Fitted::Conjugate(setting, data, fit))
        }
        ExperimentKind::HeteroToy => Ok(Fitted::Hetero(prepare_hetero(cfg, 0)?)),
        ExperimentKind::CsvRegression => {
            let d = ingest_for(cfg)?;
            Ok(Fitted::Hetero(train_heteroscedastic(
                cfg, d.train, d.test, d.target, 0,
            )?))
        }
        other => Err(Error::Unsupported(format!("fit/ppd for experiment {}", other.as_str()))),
    }
}

/// Fits the experiment's model and writes `fit.json`.
pub fn run_fit(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let mut summary = RunSummary::default();
    summary.add(echo_config(cfg, out)?);
    let fitted = fit_for(cfg)?;
    let (n_train, fit) = match &fitted {
        Fitted::Conjugate(_, d, f) => (d.len(), f),
        Fitted::Hetero(s) => (s.train.len(), &s.fit),
    };
    let rec = FitRecord {
        experiment: cfg.experiment.as_str(),
        n_train,
        theta: fit.theta_star.values(),
        objective_value: fit.objective_value,
        gradient_norm: fit.gradient_norm,
        iterations: fit.iterations,
        converged: fit.converged,
    };
    let p = out.join("fit.json");
    let mut bytes = serde_json::to_vec_pretty(&rec)?;
    bytes.push(b'\n');
    write_atomic(&p, &bytes)?;
    summary.add(p);
    Ok(summary)
}

/// Fits, then writes one normalized grid per engine at `cfg.x_test`.
pub fn run_ppd(cfg: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let mut summary = RunSummary::default();
    summary.add(echo_config(cfg, out)?);
    let fitted = fit_for(cfg)?;
    let kind = cfg.curvature[0];
    let mc_seed = SeedSplitter::new(cfg.seed).derive(Stream::MonteCarlo, 0);
    let mut log = JsonLog::with_config(cfg)?;
    for &engine in &cfg.engines {
        let grid = match &fitted {
            Fitted::Conjugate(setting, data, fit) => {
                let mut grid_cfg = setting.grid_config(cfg);
                if engine == Engine::Ssla && setting.kind == ExperimentKind::ConjugateNormal {
                    grid_cfg.count = cfg.grid.count;
                }
                let (model, prior) = (&setting.model, &setting.prior);
                let opts = EngineOptions::with_kind(kind);
                let x: &[f64] = &[];
                let raw = match engine {
                    Engine::Ssla => ssla_log_ppd(model, prior, data, fit, x, &grid_cfg, &opts)?,
                    _ => {
                        let curv = curvature(model, prior, data, &fit.theta_star, &CurvatureOptions::new(kind), None)?;
                        if engine == Engine::Assla {
                            assla_log_ppd(model, prior, data, fit, &curv, x, &grid_cfg)?
                        } else {
                            laplace_mc_ppd(model, fit, &curv, x, cfg.mc_samples, mc_seed, &grid_cfg)?
                        }
                    }
                };
                normalize_grid(&raw)?
            }
            Fitted::Hetero(setup) => {
                let x = cfg.x_test.as_slice();
                setup.model.check_x(x)?;
                let grid_cfg = GridConfig {
                    count: if engine == Engine::Ssla {
                        cfg.hetero.ssla_grid_count
                    } else {
                        cfg.grid.count
                    },
                    span: cfg.grid.span,
                    center: GridCenter::SelfPrediction,
                    lattice: None,
                };
                let (model, prior, train, fit) = (&setup.model, &setup.prior, &setup.train, &setup.fit);
                let opts = EngineOptions::with_kind(kind);
                let raw = match engine {
                    Engine::Ssla => ssla_log_ppd(model, prior, train, fit, x, &grid_cfg, &opts)?,
                    _ => {
                        let curv = curvature(model, prior, train, &fit.theta_star, &CurvatureOptions::new(kind), None)?;
                        if engine == Engine::Assla {
                            assla_log_ppd(model, prior, train, fit, &curv, x, &grid_cfg)?
                        } else {
                            laplace_mc_ppd(model, fit, &curv, x, cfg.mc_samples, mc_seed, &grid_cfg)?
                        }
                    }
                };
                normalize_grid(&raw)?
            }
        };
        let (mean, var) = grid.moments();
        log.record(&serde_json::json!({
            "record": "ppd",
            "engine": engine,
            "mass": grid.mass(),
            "mean": mean,
            "variance": var,
        }))?;
        let p = out.join(format!("ppd_{}.csv", engine.as_str()));
        write_grid(&p, &grid)?;
        summary.add(p);
    }
    let p = out.join("run.jsonl");
    log.write(&p)?;
    summary.add(p);
    Ok(summary)
}

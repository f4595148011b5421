//! Heteroscedastic regression benchmark: coverage, NLL and CRPS of every
//! engine and curvature kind on held-out points of the toy problem.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{curvature, CurvatureKind, CurvatureOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_map, Direction, FitConfig, FitResult};
use crate::metrics::CalibrationReport;
use crate::model::{Family, LikelihoodModel, Predictor};
use crate::predictive::{
    assla_log_ppd, laplace_mc_ppd, normalize_grid, ssla_log_ppd_multi, Engine, EngineOptions, GridCenter, GridConfig,
    PredictiveGrid,
};
use crate::prior::Prior;

use super::config::ExperimentConfig;
use super::generators::gen_hetero_toy;
use super::ingest::ColumnStats;
use super::seeds::{SeedSplitter, Stream};

const LBFGS_MEMORY: usize = 10;

/// A trained heteroscedastic network with standardized train/test data.
#[derive(Debug, Clone)]
pub struct HeteroSetup {
    pub model: LikelihoodModel,
    pub prior: Prior,
    pub train: Dataset,
    pub test: Dataset,
    /// Target standardization; reports stay on the standardized scale.
    pub y_stats: ColumnStats,
    pub fit: FitResult,
}

fn standardize(data: &Dataset, xs: &ColumnStats, ys: &ColumnStats) -> Result<Dataset> {
    Dataset::from_flat(
        1,
        data.iter().map(|o| xs.standardize(o.x[0])).collect(),
        data.iter().map(|o| ys.standardize(o.y)).collect(),
    )
}

/// Generates, standardizes (training statistics, population variance) and
/// trains the model for one replicate.
pub fn prepare_hetero(cfg: &ExperimentConfig, replicate: usize) -> Result<HeteroSetup> {
    let h = &cfg.hetero;
    let split = SeedSplitter::new(cfg.seed);
    let raw_train = gen_hetero_toy(h.n_train, split.derive(Stream::Data, replicate as u64))?;
    let raw_test = gen_hetero_toy(h.n_test, split.derive(Stream::TestData, replicate as u64))?;
    let xv: Vec<f64> = raw_train.iter().map(|o| o.x[0]).collect();
    let x_stats = ColumnStats::from_values("x", &xv);
    let y_stats = ColumnStats::from_values("y", raw_train.targets());
    let train = standardize(&raw_train, &x_stats, &y_stats)?;
    let test = standardize(&raw_test, &x_stats, &y_stats)?;
    train_heteroscedastic(cfg, train, test, y_stats, replicate).map_err(|e| e.context(format!("replicate {replicate}")))
}

/// Trains the heteroscedastic mlp of `cfg.hetero` on standardized data.
pub fn train_heteroscedastic(
    cfg: &ExperimentConfig,
    train: Dataset,
    test: Dataset,
    y_stats: ColumnStats,
    replicate: usize,
) -> Result<HeteroSetup> {
    let h = &cfg.hetero;
    let model = LikelihoodModel::new(
        Family::GaussianHeteroscedastic,
        Predictor::Mlp {
            hidden: h.hidden.clone(),
            activation: h.activation,
        },
        train.input_dim(),
    )?;
    let prior = Prior::isotropic(h.prior_variance, model.dim())?;
    let fit_cfg = FitConfig {
        max_iterations: h.fit_iterations,
        gradient_tolerance: h.fit_tolerance,
        seed: SeedSplitter::new(cfg.seed).derive(Stream::Init, replicate as u64),
        ..FitConfig::default()
    }
    .with_direction(Direction::Lbfgs { memory: LBFGS_MEMORY });
    let fit = fit_map(&model, &prior, &train, &fit_cfg).map_err(|e| e.context("training diverged"))?;
    if !fit.objective_value.is_finite() {
        return Err(Error::numeric(
            "experiments",
            "train_heteroscedastic",
            "non-finite training objective",
        ));
    }
    if !fit.converged {
        log::warn!(
            "training stopped at gradient norm {:e} after {} iterations",
            fit.gradient_norm,
            fit.iterations
        );
    }
    Ok(HeteroSetup {
        model,
        prior,
        train,
        test,
        y_stats,
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroCell {
    pub engine: Engine,
    pub kind: CurvatureKind,
    pub report: CalibrationReport,
    /// SSLA refits that stopped before the tolerance, over all test points.
    pub unconverged_refits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroRun {
    pub replicate: usize,
    pub fit_converged: bool,
    pub fit_gradient_norm: f64,
    pub fit_iterations: usize,
    pub cells: Vec<HeteroCell>,
}

/// Normalized predictive grids for every test point.
pub fn hetero_grids(
    cfg: &ExperimentConfig,
    setup: &HeteroSetup,
    engine: Engine,
    kind: CurvatureKind,
    replicate: usize,
) -> Result<Vec<PredictiveGrid>> {
    Ok(hetero_grids_multi(cfg, setup, engine, &[kind], replicate)?.remove(0))
}

/// Grids for several curvature kinds, outer index following `kinds`. SSLA
/// refits are shared between the kinds.
pub fn hetero_grids_multi(
    cfg: &ExperimentConfig,
    setup: &HeteroSetup,
    engine: Engine,
    kinds: &[CurvatureKind],
    replicate: usize,
) -> Result<Vec<Vec<PredictiveGrid>>> {
    let h = &cfg.hetero;
    let (model, prior, train, fit) = (&setup.model, &setup.prior, &setup.train, &setup.fit);
    let grid = GridConfig {
        count: if engine == Engine::Ssla {
            h.ssla_grid_count
        } else {
            cfg.grid.count
        },
        span: cfg.grid.span,
        center: GridCenter::SelfPrediction,
        lattice: None,
    };
    let kind_opts: Vec<CurvatureOptions> = kinds.iter().map(|&k| CurvatureOptions::new(k)).collect();
    let curvs = match engine {
        Engine::Ssla => Vec::new(),
        _ => kind_opts
            .iter()
            .map(|o| curvature(model, prior, train, &fit.theta_star, o, None))
            .collect::<Result<Vec<_>>>()?,
    };
    let options = EngineOptions {
        curvature: CurvatureOptions::new(CurvatureKind::Ggn),
        refit: FitConfig {
            max_iterations: h.refit_iterations,
            gradient_tolerance: h.refit_tolerance,
            ..FitConfig::default()
        }
        .with_direction(Direction::Lbfgs { memory: LBFGS_MEMORY }),
        max_failure_fraction: h.max_refit_failures,
    };
    let mc = SeedSplitter::new(cfg.seed);
    let label = |e: Error, kind: Option<CurvatureKind>, i: usize| {
        let kind = kind
            .map(|k| k.as_str().to_string())
            .unwrap_or_else(|| kinds.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("/"));
        e.context(format!("engine {engine}, kind {kind}, test point {i}"))
    };
    let per_point: Vec<Vec<PredictiveGrid>> = (0..setup.test.len())
        .into_par_iter()
        .map(|i| {
            let x = setup.test.x(i);
            let raw = match engine {
                Engine::Ssla => ssla_log_ppd_multi(model, prior, train, fit, x, &grid, &options, &kind_opts)
                    .map_err(|e| label(e, None, i))?,
                Engine::Assla => curvs
                    .iter()
                    .zip(kinds)
                    .map(|(c, &k)| {
                        assla_log_ppd(model, prior, train, fit, c, x, &grid).map_err(|e| label(e, Some(k), i))
                    })
                    .collect::<Result<Vec<_>>>()?,
                Engine::LaMc => {
                    let seed = mc.derive(Stream::MonteCarlo, ((replicate as u64) << 32) | i as u64);
                    curvs
                        .iter()
                        .zip(kinds)
                        .map(|(c, &k)| {
                            laplace_mc_ppd(model, fit, c, x, cfg.mc_samples, seed, &grid)
                                .map_err(|e| label(e, Some(k), i))
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            raw.iter().map(normalize_grid).collect()
        })
        .collect::<Result<_>>()?;
    let mut by_kind: Vec<Vec<PredictiveGrid>> = vec![Vec::with_capacity(per_point.len()); kinds.len()];
    for point in per_point {
        for (dst, g) in by_kind.iter_mut().zip(point) {
            dst.push(g);
        }
    }
    Ok(by_kind)
}

pub fn run_hetero_replicate(cfg: &ExperimentConfig, replicate: usize) -> Result<HeteroRun> {
    evaluate_setup(cfg, &prepare_hetero(cfg, replicate)?, replicate)
}

/// Every requested engine and curvature kind on the setup's test set.
pub fn evaluate_setup(cfg: &ExperimentConfig, setup: &HeteroSetup, replicate: usize) -> Result<HeteroRun> {
    let truths = setup.test.targets();
    let mut cells = Vec::new();
    for &engine in &cfg.engines {
        let all = hetero_grids_multi(cfg, setup, engine, &cfg.curvature, replicate)?;
        for (&kind, grids) in cfg.curvature.iter().zip(all) {
            let unconverged_refits = grids.iter().map(|g| g.failed_points().len()).sum();
            let report = CalibrationReport::from_grids(&grids, truths, &cfg.levels)?;
            cells.push(HeteroCell {
                engine,
                kind,
                report,
                unconverged_refits,
            });
        }
    }
    Ok(HeteroRun {
        replicate,
        fit_converged: setup.fit.converged,
        fit_gradient_norm: setup.fit.gradient_norm,
        fit_iterations: setup.fit.iterations,
        cells,
    })
}

/// One run per replicate.
pub fn run_hetero_benchmark(cfg: &ExperimentConfig) -> Result<Vec<HeteroRun>> {
    cfg.validate()?;
    (0..cfg.replicates).map(|r| run_hetero_replicate(cfg, r)).collect()
}

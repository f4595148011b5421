//! Conjugate validation: every engine against the closed-form predictive.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::curvature;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_map, FitConfig, FitResult};
use crate::metrics::{entropy_grid, kl_grid, total_variation};
use crate::model::LikelihoodModel;
use crate::oracles::{NormalNormalSpec, PoissonGammaSpec};
use crate::predictive::{
    assla_log_ppd, laplace_mc_ppd, normalize_grid, ssla_log_ppd, Engine, EngineOptions, GridCenter, GridConfig,
    PredictiveGrid,
};
use crate::prior::{Prior, PriorKind};

use super::config::{ExperimentConfig, ExperimentKind};
use super::generators::*;
use super::seeds::{SeedSplitter, Stream};

/// A conjugate setting: model, prior, data generator and closed form.
#[derive(Debug, Clone)]
pub struct ConjugateSetting {
    pub kind: ExperimentKind,
    pub model: LikelihoodModel,
    pub prior: Prior,
}

impl ConjugateSetting {
    pub fn new(kind: ExperimentKind) -> Result<Self> {
        match kind {
            ExperimentKind::ConjugateNormal => Ok(Self {
                kind,
                model: LikelihoodModel::gaussian_mean(NORMAL_VARIANCE)?,
                prior: Prior::new(
                    PriorKind::IsotropicGaussian {
                        mean: NORMAL_PRIOR_MEAN,
                        variance: NORMAL_PRIOR_VARIANCE,
                    },
                    1,
                )?,
            }),
            ExperimentKind::ConjugatePoisson => Ok(Self {
                kind,
                model: LikelihoodModel::poisson_rate(),
                prior: Prior::new(
                    PriorKind::Gamma {
                        shape: POISSON_PRIOR_SHAPE,
                        rate: POISSON_PRIOR_RATE,
                    },
                    1,
                )?,
            }),
            other => Err(Error::config(format!(
                "{} is not a conjugate experiment",
                other.as_str()
            ))),
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self.kind {
            ExperimentKind::ConjugateNormal => gen_normal_conjugate(n, seed),
            _ => gen_poisson_conjugate(n, seed),
        }
    }

    pub fn grid_config(&self, cfg: &ExperimentConfig) -> GridConfig {
        match self.kind {
            ExperimentKind::ConjugatePoisson => GridConfig::lattice(0, cfg.grid.lattice_max),
            _ => GridConfig {
                count: cfg.grid.count,
                span: cfg.grid.span,
                center: GridCenter::SelfPrediction,
                lattice: None,
            },
        }
    }

    /// The closed-form predictive on the same support, normalized.
    pub fn analytic(&self, data: &Dataset, template: &PredictiveGrid) -> Result<PredictiveGrid> {
        let targets = data.targets();
        let grid = match self.kind {
            ExperimentKind::ConjugateNormal => {
                let spec = NormalNormalSpec::reference();
                PredictiveGrid::from_fn(template, |y| spec.ppd_log_density(targets, y))
            }
            _ => {
                let spec = PoissonGammaSpec::reference();
                PredictiveGrid::from_fn(template, |k| spec.ppd_log_pmf(targets, k as u64))
            }
        };
        normalize_grid(&grid)
    }
}

/// Runs one engine on a fitted conjugate model and normalizes the result.
pub fn run_engine(
    setting: &ConjugateSetting,
    engine: Engine,
    data: &Dataset,
    fit: &FitResult,
    grid_cfg: &GridConfig,
    mc_samples: usize,
    mc_seed: u64,
) -> Result<PredictiveGrid> {
    let (model, prior) = (&setting.model, &setting.prior);
    let options = EngineOptions::default();
    let raw = match engine {
        Engine::Ssla => ssla_log_ppd(model, prior, data, fit, &[], grid_cfg, &options)?,
        Engine::Assla | Engine::LaMc => {
            let curv = curvature(model, prior, data, &fit.theta_star, &options.curvature, None)?;
            if engine == Engine::Assla {
                assla_log_ppd(model, prior, data, fit, &curv, &[], grid_cfg)?
            } else {
                laplace_mc_ppd(model, fit, &curv, &[], mc_samples, mc_seed, grid_cfg)?
            }
        }
    };
    normalize_grid(&raw)
}

pub fn fit_setting(setting: &ConjugateSetting, data: &Dataset) -> Result<FitResult> {
    fit_map(&setting.model, &setting.prior, data, &FitConfig::default())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConjugateRow {
    pub n: usize,
    pub replicate: usize,
    pub engine: Engine,
    /// `KL(analytic ‖ engine)`.
    pub kl: f64,
    pub total_variation: f64,
    pub entropy_analytic: f64,
    pub entropy_engine: f64,
}

/// Grids kept for plotting: replicate 0 of every `(n, engine)` plus the
/// analytic reference.
#[derive(Debug, Clone)]
pub struct LabelledGrid {
    pub label: String,
    pub grid: PredictiveGrid,
}

#[derive(Debug, Clone)]
pub struct ConjugateRun {
    pub rows: Vec<ConjugateRow>,
    pub grids: Vec<LabelledGrid>,
}

pub fn data_seed(root: u64, n: usize, replicate: usize) -> u64 {
    SeedSplitter::new(root).derive(Stream::Data, ((n as u64) << 20) ^ replicate as u64)
}

pub fn run_conjugate_validation(cfg: &ExperimentConfig) -> Result<ConjugateRun> {
    cfg.validate()?;
    let setting = ConjugateSetting::new(cfg.experiment)?;
    let grid_cfg = setting.grid_config(cfg);
    let splitter = SeedSplitter::new(cfg.seed);
    let cells: Vec<(usize, usize)> = cfg
        .n
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<(Vec<ConjugateRow>, Vec<LabelledGrid>)>> = cells
        .par_iter()
        .map(|&(n, r)| {
            let seed = data_seed(cfg.seed, n, r);
            let ctx = |engine: &str| format!("engine {engine}, n {n}, seed {seed}");
            let data = setting.generate(n, seed)?;
            let fit = fit_setting(&setting, &data).map_err(|e| e.context(ctx("fit")))?;
            let mut rows = Vec::new();
            let mut grids = Vec::new();
            let mut analytic: Option<PredictiveGrid> = None;
            for &engine in &cfg.engines {
                let mc_seed = splitter.derive(Stream::MonteCarlo, ((n as u64) << 20) ^ r as u64);
                let g = run_engine(&setting, engine, &data, &fit, &grid_cfg, cfg.mc_samples, mc_seed)
                    .map_err(|e| e.context(ctx(engine.as_str())))?;
                let a = match &analytic {
                    Some(a) => a.clone(),
                    None => {
                        let a = setting.analytic(&data, &g)?;
                        analytic = Some(a.clone());
                        a
                    }
                };
                rows.push(ConjugateRow {
                    n,
                    replicate: r,
                    engine,
                    kl: kl_grid(&a, &g)?,
                    total_variation: total_variation(&a, &g)?,
                    entropy_analytic: entropy_grid(&a)?,
                    entropy_engine: entropy_grid(&g)?,
                });
                if r == 0 {
                    grids.push(LabelledGrid {
                        label: format!("n{n}_{}", engine.as_str()),
                        grid: g,
                    });
                }
            }
            if r == 0 {
                if let Some(a) = analytic {
                    grids.push(LabelledGrid {
                        label: format!("n{n}_analytic"),
                        grid: a,
                    });
                }
            }
            Ok((rows, grids))
        })
        .collect();
    let mut run = ConjugateRun {
        rows: Vec::new(),
        grids: Vec::new(),
    };
    for r in results {
        let (rows, grids) = r?;
        run.rows.extend(rows);
        run.grids.extend(grids);
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_run_normalizes() {
        let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ConjugateNormal);
        cfg.n = vec![1];
        cfg.mc_samples = 200;
        let run = run_conjugate_validation(&cfg).unwrap();
        assert_eq!(run.rows.len(), 3);
        for g in &run.grids {
            assert!((g.grid.mass() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn poisson_engines_track_negbin() {
        let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ConjugatePoisson);
        cfg.n = vec![100];
        cfg.engines = vec![Engine::Ssla, Engine::Assla];
        let run = run_conjugate_validation(&cfg).unwrap();
        for row in &run.rows {
            assert!(row.total_variation < 0.02, "{row:?}");
        }
    }
}

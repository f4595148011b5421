//! Prior modularity on a one-dimensional linear regression: the prior enters
//! SSLA only through the refit and the additive `log π` increment, and does
//! not enter ASSLA at all once `θ̂` is fixed.

use serde::Serialize;

use crate::curvature::{curvature, CurvatureKind, CurvatureOptions};
use crate::error::{Error, Result};
use crate::fit::{fit_map, FitConfig};
use crate::model::{Family, LikelihoodModel, Predictor};
use crate::predictive::{assla_log_ppd, ssla_log_ppd, EngineOptions, GridCenter, GridConfig};
use crate::prior::Prior;

use super::config::ExperimentConfig;
use super::generators::gen_linear_1d;
use super::seeds::{SeedSplitter, Stream};

/// Raw (unnormalized) engine values for one prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModularityRow {
    pub prior_variance: f64,
    pub y_hat: f64,
    pub ssla_self: f64,
    pub assla_self: f64,
    pub ssla_off: f64,
    pub assla_off: f64,
    pub ssla_minus_assla: f64,
    /// SSLA off the self-prediction minus the same value under the flattest prior.
    pub ssla_minus_noninfo: f64,
}

/// Rows in the order of `cfg.modularity.prior_variances`.
pub fn run_prior_modularity(cfg: &ExperimentConfig) -> Result<Vec<ModularityRow>> {
    let m = &cfg.modularity;
    if m.prior_variances.is_empty() {
        return Err(Error::config("modularity.prior_variances is empty"));
    }
    let data = gen_linear_1d(m.n, m.noise_sd, SeedSplitter::new(cfg.seed).derive(Stream::Data, 0))?;
    let variance = m.noise_sd * m.noise_sd;
    let model = LikelihoodModel::new(Family::GaussianFixed { variance }, Predictor::Linear, 1)?;
    let x = [m.x_test];
    // Curvature of the likelihood only: the log-determinant increment then
    // carries no prior term.
    let curv_opts = CurvatureOptions::new(CurvatureKind::Dense).without_prior();
    let options = EngineOptions {
        curvature: curv_opts.clone(),
        refit: FitConfig::refit().with_tolerance(1e-10),
        max_failure_fraction: 0.0,
    };
    let mut raw = Vec::with_capacity(m.prior_variances.len());
    for &tau2 in &m.prior_variances {
        let prior = Prior::isotropic(tau2, model.dim())?;
        let fit = fit_map(&model, &prior, &data, &FitConfig::default().with_tolerance(1e-10))?;
        let y_hat = model.self_prediction(&fit.theta_star, &x)?;
        // Three points: ŷ − offset, ŷ, ŷ + offset.
        let grid = GridConfig {
            count: 3,
            span: m.offset / m.noise_sd,
            center: GridCenter::Explicit(y_hat),
            lattice: None,
        };
        let ssla = ssla_log_ppd(&model, &prior, &data, &fit, &x, &grid, &options)
            .map_err(|e| e.context(format!("prior variance {tau2}")))?;
        let curv = curvature(&model, &prior, &data, &fit.theta_star, &curv_opts, None)?;
        let assla = assla_log_ppd(&model, &prior, &data, &fit, &curv, &x, &grid)?;
        raw.push((tau2, y_hat, ssla.log_density().to_vec(), assla.log_density().to_vec()));
    }
    let flattest = raw
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|r| r.2[2])
        .expect("non-empty");
    Ok(raw
        .into_iter()
        .map(|(tau2, y_hat, s, a)| ModularityRow {
            prior_variance: tau2,
            y_hat,
            ssla_self: s[1],
            assla_self: a[1],
            ssla_off: s[2],
            assla_off: a[2],
            ssla_minus_assla: s[2] - a[2],
            ssla_minus_noninfo: s[2] - flattest,
        })
        .collect())
}

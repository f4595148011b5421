//! Large-sample behaviour on the conjugate normal model: the refit shift
//! `‖θ̃ − θ̂‖` is O(1/n) and the gap between SSLA and ASSLA vanishes.

use crate::curvature::curvature;
use crate::data::PseudoObservation;
use crate::error::Result;
use crate::fit::{refit_augmented, FitConfig};
use crate::metrics::sup_density_gap;
use crate::predictive::{assla_log_ppd, normalize_grid, ssla_log_ppd, EngineOptions, GridConfig};

use super::config::ExperimentKind;
use super::conjugate::{fit_setting, ConjugateSetting};

/// `‖θ̃ − θ̂‖` after appending the pseudo target `ŷ + offset`.
pub fn refit_shift(n: usize, seed: u64, offset: f64) -> Result<f64> {
    let setting = ConjugateSetting::new(ExperimentKind::ConjugateNormal)?;
    let data = setting.generate(n, seed)?;
    let fit = fit_setting(&setting, &data)?;
    let y_hat = setting.model.self_prediction(&fit.theta_star, &[])?;
    let pseudo = PseudoObservation::new(Vec::new(), y_hat + offset);
    let refit = refit_augmented(
        &setting.model,
        &setting.prior,
        &data,
        &pseudo,
        &fit.theta_star,
        &FitConfig::refit().with_tolerance(1e-12),
    )?;
    Ok(refit
        .theta_star
        .iter()
        .zip(fit.theta_star.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Sup-norm distance between the normalized SSLA and ASSLA densities.
pub fn ssla_assla_gap(n: usize, seed: u64, grid: &GridConfig) -> Result<f64> {
    let setting = ConjugateSetting::new(ExperimentKind::ConjugateNormal)?;
    let (model, prior) = (&setting.model, &setting.prior);
    let data = setting.generate(n, seed)?;
    let fit = fit_setting(&setting, &data)?;
    let options = EngineOptions::default();
    let ssla = normalize_grid(&ssla_log_ppd(model, prior, &data, &fit, &[], grid, &options)?)?;
    let curv = curvature(model, prior, &data, &fit.theta_star, &options.curvature, None)?;
    let assla = normalize_grid(&assla_log_ppd(model, prior, &data, &fit, &curv, &[], grid)?)?;
    sup_density_gap(&ssla, &assla)
}

//! Floating-point cancellation in the refit-free likelihood increment.
//!
//! The reference grid is ASSLA with its per-term increment
//! `log p(y|θ̂) − log p(ŷ|θ̂)` in double precision. The naive path forms the
//! increment as `fl(S + t(y)) − fl(S)`, where `S` is the aggregated training
//! log-likelihood and `t(y)` the new term, in the requested precision. The
//! rounding of `S + t(y)` costs up to half an ulp of `S`, which grows with `n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{curvature, observation_logdet_increment, CurvatureKind, CurvatureOptions};
use crate::error::{Error, Result};
use crate::metrics::kl_grid;
use crate::predictive::{assla_log_ppd, normalize_grid, GridCenter, GridConfig, PredictiveGrid};

use super::config::{ExperimentConfig, ExperimentKind, Precision};
use super::conjugate::{data_seed, fit_setting, ConjugateSetting};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionStudyRow {
    pub n: usize,
    pub runs: usize,
    pub kl_mean: f64,
    pub kl_sd: f64,
    pub max_abs_log_err_mean: f64,
    pub max_abs_log_err_sd: f64,
    pub frac_delta_zero: f64,
    pub frac_nonfinite: f64,
}

/// One replicate's measurements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionSample {
    pub kl: f64,
    pub max_abs_log_err: f64,
    pub frac_delta_zero: f64,
    pub frac_nonfinite: f64,
}

/// `fl(S + t) − fl(S)` with `S` accumulated sequentially in `precision`.
fn naive_increments(terms: &[f64], new_terms: &[f64], precision: Precision) -> Vec<f64> {
    match precision {
        Precision::Single => {
            let s: f32 = terms.iter().fold(0.0f32, |acc, t| acc + *t as f32);
            new_terms.iter().map(|t| ((s + *t as f32) - s) as f64).collect()
        }
        Precision::Double => {
            let s: f64 = terms.iter().fold(0.0, |acc, t| acc + t);
            new_terms.iter().map(|t| (s + t) - s).collect()
        }
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Compares the naive and per-term paths on one conjugate-normal dataset.
pub fn precision_sample(n: usize, seed: u64, grid: &GridConfig, precision: Precision) -> Result<PrecisionSample> {
    let setting = ConjugateSetting::new(ExperimentKind::ConjugateNormal)?;
    let (model, prior) = (&setting.model, &setting.prior);
    let data = setting.generate(n, seed)?;
    let fit = fit_setting(&setting, &data)?;
    let theta = fit.theta_star.values();
    let curv = curvature(
        model,
        prior,
        &data,
        theta,
        &CurvatureOptions::new(CurvatureKind::Dense),
        None,
    )?;
    let stable = normalize_grid(&assla_log_ppd(model, prior, &data, &fit, &curv, &[], grid)?)?;
    let ys = stable.y_values().to_vec();

    let mut s = model.new_scratch();
    let terms: Vec<f64> = data
        .iter()
        .map(|o| model.log_density_unchecked(theta, o.x, o.y, &mut s))
        .collect();
    let new_terms: Vec<f64> = ys
        .iter()
        .map(|y| model.log_density_unchecked(theta, &[], *y, &mut s))
        .collect();
    let deltas = naive_increments(&terms, &new_terms, precision);
    let mut naive_logd = Vec::with_capacity(ys.len());
    for (y, d) in ys.iter().zip(&deltas) {
        let dj = observation_logdet_increment(&curv, model, theta, &[], *y, &mut s)?;
        naive_logd.push(d - 0.5 * dj);
    }
    let frac_delta_zero = deltas.iter().filter(|d| **d == 0.0).count() as f64 / ys.len() as f64;
    let frac_nonfinite = naive_logd.iter().filter(|v| !v.is_finite()).count() as f64 / ys.len() as f64;
    if frac_nonfinite > 0.0 {
        return Ok(PrecisionSample {
            kl: f64::NAN,
            max_abs_log_err: f64::NAN,
            frac_delta_zero,
            frac_nonfinite,
        });
    }
    let naive = normalize_grid(&PredictiveGrid::new(ys, naive_logd)?)?;
    let max_abs_log_err = stable
        .log_density()
        .iter()
        .zip(naive.log_density())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(PrecisionSample {
        kl: kl_grid(&stable, &naive)?,
        max_abs_log_err,
        frac_delta_zero,
        frac_nonfinite,
    })
}

/// One row per `n`, aggregated over `cfg.replicates` seeds.
pub fn run_cancellation_study(cfg: &ExperimentConfig) -> Result<Vec<PrecisionStudyRow>> {
    cfg.validate()?;
    let grid = GridConfig {
        count: cfg.grid.count,
        span: cfg.grid.span,
        center: GridCenter::SelfPrediction,
        lattice: None,
    };
    let cells: Vec<(usize, usize)> = cfg
        .n
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let samples = cells
        .par_iter()
        .map(|&(n, r)| {
            let seed = data_seed(cfg.seed, n, r);
            precision_sample(n, seed, &grid, cfg.precision).map_err(|e| e.context(format!("n {n}, seed {seed}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, &n) in cfg.n.iter().enumerate() {
        let chunk = &samples[i * cfg.replicates..(i + 1) * cfg.replicates];
        let (kl_mean, kl_sd) = mean_sd(&chunk.iter().map(|s| s.kl).collect::<Vec<_>>());
        let (err_mean, err_sd) = mean_sd(&chunk.iter().map(|s| s.max_abs_log_err).collect::<Vec<_>>());
        rows.push(PrecisionStudyRow {
            n,
            runs: chunk.len(),
            kl_mean,
            kl_sd,
            max_abs_log_err_mean: err_mean,
            max_abs_log_err_sd: err_sd,
            frac_delta_zero: chunk.iter().map(|s| s.frac_delta_zero).sum::<f64>() / chunk.len() as f64,
            frac_nonfinite: chunk.iter().map(|s| s.frac_nonfinite).sum::<f64>() / chunk.len() as f64,
        });
    }
    if rows.iter().any(|r| !(0.0..=1.0).contains(&r.frac_delta_zero)) {
        return Err(Error::numeric(
            "experiments",
            "run_cancellation_study",
            "fraction outside [0, 1]",
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_precision_rounding_is_half_ulp_scale() {
        let terms = vec![-1.7655; 100_000];
        let d = naive_increments(&terms, &[-1.3], Precision::Single)[0];
        // ulp of |S| ≈ 1.77e5 in single precision is 2⁻⁶.
        assert!((d + 1.3).abs() <= 2f64.powi(-7) + 1e-12);
        assert_ne!(d, -1.3);
        let d64 = naive_increments(&terms, &[-1.3], Precision::Double)[0];
        assert!((d64 + 1.3).abs() < 1e-10);
    }

    #[test]
    fn small_n_paths_agree() {
        let grid = GridConfig::default();
        let s = precision_sample(1000, 3, &grid, Precision::Double).unwrap();
        assert!(s.max_abs_log_err < 1e-9 && s.frac_delta_zero == 0.0);
        let s = precision_sample(1000, 3, &grid, Precision::Single).unwrap();
        assert!(s.max_abs_log_err < 1e-3 && s.max_abs_log_err > 0.0);
    }
}

//! Posterior predictive engines on a target grid: SSLA (refit per grid
//! point), ASSLA (refit-free expansion) and Laplace Monte Carlo, plus grid
//! normalization and credible intervals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{
    curvature, observation_logdet_increment, CurvatureKind, CurvatureMatrix, CurvatureOptions, MAX_DENSE_DIM,
};
use crate::data::{Dataset, PseudoObservation};
use crate::error::{Error, Result};
use crate::fit::{refit_augmented, refit_augmented_preconditioned, Direction, FitConfig, FitResult};
use crate::model::LikelihoodModel;
use crate::prior::Prior;

/// The predictive engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Ssla,
    Assla,
    LaMc,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Ssla => "ssla",
            Engine::Assla => "assla",
            Engine::LaMc => "la-mc",
        }
    }

    pub const ALL: [Engine; 3] = [Engine::Ssla, Engine::Assla, Engine::LaMc];
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ssla" => Ok(Engine::Ssla),
            "assla" => Ok(Engine::Assla),
            "la-mc" | "lamc" | "la" => Ok(Engine::LaMc),
            other => Err(Error::config(format!("unknown engine '{other}'"))),
        }
    }
}

/// Target values and log-densities of a predictive distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGrid {
    y_values: Vec<f64>,
    log_density: Vec<f64>,
    normalized: bool,
    log_normalizer: f64,
    /// Integer-lattice grid of a count model; normalized by summation.
    discrete: bool,
    /// Grid indices whose SSLA refit did not converge.
    failed_points: Vec<usize>,
}

impl PredictiveGrid {
    /// An unnormalized continuous grid.
    pub fn new(y_values: Vec<f64>, log_density: Vec<f64>) -> Result<Self> {
        Self::build(y_values, log_density, false)
    }

    /// An unnormalized probability mass function on integer targets.
    pub fn new_discrete(y_values: Vec<f64>, log_density: Vec<f64>) -> Result<Self> {
        Self::build(y_values, log_density, true)
    }

    fn build(y_values: Vec<f64>, log_density: Vec<f64>, discrete: bool) -> Result<Self> {
        if y_values.len() != log_density.len() {
            return Err(Error::config("grid values and log-densities differ in length"));
        }
        if y_values.is_empty() {
            return Err(Error::config("grid is empty"));
        }
        if y_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("grid values must be strictly increasing"));
        }
        Ok(Self {
            y_values,
            log_density,
            normalized: false,
            log_normalizer: 0.0,
            discrete,
            failed_points: Vec::new(),
        })
    }

    /// Evaluates `log_density_fn` on a copy of `template`'s grid.
    pub fn from_fn(template: &PredictiveGrid, log_density_fn: impl Fn(f64) -> f64) -> Self {
        Self {
            log_density: template.y_values.iter().map(|&y| log_density_fn(y)).collect(),
            y_values: template.y_values.clone(),
            normalized: false,
            log_normalizer: 0.0,
            discrete: template.discrete,
            failed_points: Vec::new(),
        }
    }

    pub fn y_values(&self) -> &[f64] {
        &self.y_values
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn density(&self) -> Vec<f64> {
        self.log_density.iter().map(|l| l.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.y_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_discrete(&self) -> bool {
        self.discrete
    }

    /// The log of the mass removed by [`normalize_grid`].
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    pub fn failed_points(&self) -> &[usize] {
        &self.failed_points
    }

    /// Total mass: trapezoid integral, or sum for a lattice grid.
    pub fn mass(&self) -> f64 {
        let d = self.density();
        if self.discrete {
            d.iter().sum()
        } else {
            trapezoid(&self.y_values, &d)
        }
    }

    /// Log-density at `y` by linear interpolation of the density, clamped to
    /// the grid edges.
    pub fn log_density_at(&self, y: f64) -> f64 {
        let ys = &self.y_values;
        if y <= ys[0] {
            return self.log_density[0];
        }
        let last = ys.len() - 1;
        if y >= ys[last] {
            return self.log_density[last];
        }
        let i = ys.partition_point(|v| *v <= y) - 1;
        let t = (y - ys[i]) / (ys[i + 1] - ys[i]);
        let (a, b) = (self.log_density[i].exp(), self.log_density[i + 1].exp());
        ((1.0 - t) * a + t * b).ln()
    }

    /// Cumulative distribution at each grid point.
    pub fn cdf(&self) -> Vec<f64> {
        let d = self.density();
        let mut out = Vec::with_capacity(d.len());
        if self.discrete {
            let mut acc = 0.0;
            for v in d {
                acc += v;
                out.push(acc);
            }
        } else {
            out.push(0.0);
            for i in 1..d.len() {
                let prev = out[i - 1];
                out.push(prev + 0.5 * (d[i] + d[i - 1]) * (self.y_values[i] - self.y_values[i - 1]));
            }
        }
        out
    }

    /// Mean and variance under the (normalized) grid density.
    pub fn moments(&self) -> (f64, f64) {
        let d = self.density();
        let ys = &self.y_values;
        let m0 = self.mass();
        let f = |g: &dyn Fn(f64) -> f64| -> f64 {
            let v: Vec<f64> = ys.iter().zip(&d).map(|(y, p)| g(*y) * p).collect();
            if self.discrete {
                v.iter().sum()
            } else {
                trapezoid(ys, &v)
            }
        };
        let mean = f(&|y| y) / m0;
        let var = f(&|y| (y - mean) * (y - mean)) / m0;
        (mean, var)
    }
}

pub(crate) fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (fs[0] + fs[1]) * (xs[1] - xs[0]))
        .sum()
}

/// Where the grid is centred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridCenter {
    SelfPrediction,
    Explicit(f64),
}

/// Grid layout: `count` equispaced points spanning `center ± span·σ̂`, where
/// `σ̂` is the plug-in observation standard deviation at `θ̂`. A `lattice`
/// replaces this by the integers `lo..=hi` (count models).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub count: usize,
    pub span: f64,
    pub center: GridCenter,
    pub lattice: Option<(u32, u32)>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            count: 201,
            span: 6.0,
            center: GridCenter::SelfPrediction,
            lattice: None,
        }
    }
}

impl GridConfig {
    pub fn lattice(lo: u32, hi: u32) -> Self {
        Self {
            lattice: Some((lo, hi)),
            ..Self::default()
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.lattice {
            if hi <= lo {
                return Err(Error::config("lattice upper bound must exceed the lower bound"));
            }
            return Ok(());
        }
        if self.count < 3 || self.count % 2 == 0 {
            return Err(Error::config(format!(
                "grid count must be odd and >= 3, got {}",
                self.count
            )));
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(Error::config("grid span must be positive"));
        }
        Ok(())
    }

    /// Grid values for a model at `θ̂`.
    pub fn values(&self, model: &LikelihoodModel, theta_hat: &[f64], x_test: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some((lo, hi)) = self.lattice {
            return Ok((lo..=hi).map(f64::from).collect());
        }
        let pred = model.predict(theta_hat, x_test)?;
        let center = match self.center {
            GridCenter::SelfPrediction => model.self_prediction(theta_hat, x_test)?,
            GridCenter::Explicit(c) => c,
        };
        let sd = pred.variance.unwrap_or(1.0).sqrt();
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::numeric(
                "predictive",
                "grid",
                format!("plug-in scale {sd} is not positive"),
            ));
        }
        Ok(equispaced(center - self.span * sd, center + self.span * sd, self.count))
    }
}

/// `count` equispaced points from `lo` to `hi` inclusive.
pub fn equispaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let h = (hi - lo) / (count - 1) as f64;
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + i as f64 * h })
        .collect()
}

/// Equal-tailed credible interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lower: f64,
    pub upper: f64,
    pub nominal_level: f64,
}

impl CredibleInterval {
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Options shared by the SSLA and ASSLA engines.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub curvature: CurvatureOptions,
    pub refit: FitConfig,
    /// Fraction of SSLA refits allowed to end unconverged.
    pub max_failure_fraction: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            curvature: CurvatureOptions::new(CurvatureKind::Dense),
            refit: FitConfig::refit(),
            max_failure_fraction: 0.01,
        }
    }
}

impl EngineOptions {
    pub fn with_kind(kind: CurvatureKind) -> Self {
        Self {
            curvature: CurvatureOptions::new(kind),
            ..Self::default()
        }
    }
}

fn grid_for(model: &LikelihoodModel, ys: Vec<f64>, logd: Vec<f64>) -> Result<PredictiveGrid> {
    if model.is_discrete() {
        PredictiveGrid::new_discrete(ys, logd)
    } else {
        PredictiveGrid::new(ys, logd)
    }
}

fn check_engine_inputs(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    fit: &FitResult,
    x_test: &[f64],
) -> Result<()> {
    model.check_theta(&fit.theta_star)?;
    model.check_x(x_test)?;
    model.check_data(data)?;
    if prior.dim() != model.dim() {
        return Err(Error::config("prior and model dimensions differ"));
    }
    if !fit.converged {
        log::warn!(
            "predictive engine given an unconverged fit (gradient norm {:e})",
            fit.gradient_norm
        );
    }
    Ok(())
}

/// Self-supervised Laplace approximation: for every grid target `y`, refit
/// with the pseudo observation `(x_test, y)` and evaluate
/// `[ℓ_D(θ̃) − ℓ_D(θ̂)] + [log π(θ̃) − log π(θ̂)] + log p(y|x,θ̃) − log p(ŷ|x,θ̂)
///  − ½[log|J̃(θ̃)| − log|J(θ̂)|]`.
///
/// The result is unnormalized; the constant `log p(ŷ|x,θ̂)` makes the value at
/// `ŷ` identical to ASSLA's whenever the refit leaves `θ̂` unchanged.
pub fn ssla_log_ppd(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    fit: &FitResult,
    x_test: &[f64],
    grid_cfg: &GridConfig,
    options: &EngineOptions,
) -> Result<PredictiveGrid> {
    let kinds = std::slice::from_ref(&options.curvature);
    let mut grids = ssla_log_ppd_multi(model, prior, data, fit, x_test, grid_cfg, options, kinds)?;
    Ok(grids.remove(0))
}

/// SSLA under several curvature choices at once. The refit `θ̃(y)` does not
/// depend on the curvature, so each grid target is refitted once and only the
/// determinant terms are evaluated per entry of `kinds`. `options.curvature`
/// is ignored.
#[allow(clippy::too_many_arguments)]
pub fn ssla_log_ppd_multi(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    fit: &FitResult,
    x_test: &[f64],
    grid_cfg: &GridConfig,
    options: &EngineOptions,
    kinds: &[CurvatureOptions],
) -> Result<Vec<PredictiveGrid>> {
    check_engine_inputs(model, prior, data, fit, x_test)?;
    if kinds.is_empty() {
        return Err(Error::config("no curvature kinds given"));
    }
    let theta_hat = fit.theta_star.values();
    let ys = grid_cfg.values(model, theta_hat, x_test)?;
    let y_hat = model.self_prediction(theta_hat, x_test)?;
    let logdet_hat = kinds
        .iter()
        .map(|k| curvature(model, prior, data, theta_hat, k, None).map(|j| j.log_det()))
        .collect::<Result<Vec<f64>>>()?;
    // L-BFGS refits start from the Gauss-Newton metric at θ̂; it only
    // shortens the path to θ̃.
    let metric = match options.refit.direction {
        Direction::Lbfgs { .. } if model.dim() <= MAX_DENSE_DIM => curvature(
            model,
            prior,
            data,
            theta_hat,
            &CurvatureOptions::new(CurvatureKind::Ggn),
            None,
        )
        .ok(),
        _ => None,
    };

    let mut s = model.new_scratch();
    let base: Vec<f64> = data
        .iter()
        .map(|o| model.log_density_unchecked(theta_hat, o.x, o.y, &mut s))
        .collect();
    let prior_hat = prior.log_density_unchecked(theta_hat);
    let ref_term = model.log_density_unchecked(theta_hat, x_test, y_hat, &mut s);

    let results: Vec<Result<(Vec<f64>, bool)>> = ys
        .par_iter()
        .map(|&y| {
            let pseudo = PseudoObservation::new(x_test.to_vec(), y);
            let refit = match &metric {
                Some(m) => {
                    refit_augmented_preconditioned(model, prior, data, &pseudo, &fit.theta_star, &options.refit, m)?
                }
                None => refit_augmented(model, prior, data, &pseudo, &fit.theta_star, &options.refit)?,
            };
            let tt = refit.theta_star.values();
            let mut s = model.new_scratch();
            let d_lik: f64 = data
                .iter()
                .zip(&base)
                .map(|(o, b)| model.log_density_unchecked(tt, o.x, o.y, &mut s) - b)
                .sum();
            let d_prior = prior.log_density_unchecked(tt) - prior_hat;
            let new_term = model.log_density_unchecked(tt, x_test, y, &mut s);
            let fixed = d_lik + d_prior + (new_term - ref_term);
            let mut vals = Vec::with_capacity(kinds.len());
            for (k, ld) in kinds.iter().zip(&logdet_hat) {
                let j_tilde = curvature(model, prior, data, tt, k, Some(pseudo.as_ref()))?;
                vals.push(fixed - 0.5 * (j_tilde.log_det() - ld));
            }
            Ok((vals, refit.converged))
        })
        .collect();

    let mut logd: Vec<Vec<f64>> = vec![Vec::with_capacity(ys.len()); kinds.len()];
    let mut failed = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let (vals, ok) = r.map_err(|e| match e {
            Error::Numeric {
                module,
                operation,
                detail,
            } => Error::Numeric {
                module,
                operation,
                detail: format!("{detail} (SSLA grid point {i}, y = {})", ys[i]),
            },
            other => other,
        })?;
        if !ok {
            failed.push(i);
        }
        for (dst, v) in logd.iter_mut().zip(vals) {
            dst.push(v);
        }
    }
    if failed.len() as f64 > options.max_failure_fraction * ys.len() as f64 {
        return Err(Error::numeric(
            "predictive",
            "ssla_log_ppd",
            format!(
                "{} of {} refits did not converge (first at grid index {})",
                failed.len(),
                ys.len(),
                failed[0]
            ),
        ));
    }
    if !failed.is_empty() {
        log::warn!("{} of {} SSLA refits did not converge", failed.len(), ys.len());
    }
    logd.into_iter()
        .map(|l| {
            let mut grid = grid_for(model, ys.clone(), l)?;
            grid.failed_points = failed.clone();
            Ok(grid)
        })
        .collect()
}

/// Refit-free approximation: `Δℓ(y) − ½ΔJ(y)` with
/// `Δℓ(y) = log p(y|x,θ̂) − log p(ŷ|x,θ̂)` and
/// `ΔJ(y) = log|J(θ̂) + J_new(y;θ̂)| − log|J(θ̂)|`. The increment follows
/// `curv.kind()`. No prior term enters given `θ̂`.
pub fn assla_log_ppd(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    fit: &FitResult,
    curv: &CurvatureMatrix,
    x_test: &[f64],
    grid_cfg: &GridConfig,
) -> Result<PredictiveGrid> {
    check_engine_inputs(model, prior, data, fit, x_test)?;
    if curv.dim() != model.dim() {
        return Err(Error::config("curvature dimension does not match the model"));
    }
    let theta_hat = fit.theta_star.values();
    let ys = grid_cfg.values(model, theta_hat, x_test)?;
    let y_hat = model.self_prediction(theta_hat, x_test)?;
    let mut s = model.new_scratch();
    let ref_term = model.log_density_unchecked(theta_hat, x_test, y_hat, &mut s);
    let logd = ys
        .par_iter()
        .map_init(
            || model.new_scratch(),
            |s, &y| -> Result<f64> {
                let dl = model.log_density_unchecked(theta_hat, x_test, y, s) - ref_term;
                let dj = observation_logdet_increment(curv, model, theta_hat, x_test, y, s)?;
                Ok(dl - 0.5 * dj)
            },
        )
        .collect::<Result<Vec<f64>>>()?;
    grid_for(model, ys, logd)
}

/// Classical Laplace baseline: average `p(y|x,θ⁽ˢ⁾)` over
/// `θ⁽ˢ⁾ ~ N(θ̂, J⁻¹)`. Deterministic given `seed`.
pub fn laplace_mc_ppd(
    model: &LikelihoodModel,
    fit: &FitResult,
    curv: &CurvatureMatrix,
    x_test: &[f64],
    n_samples: usize,
    seed: u64,
    grid_cfg: &GridConfig,
) -> Result<PredictiveGrid> {
    model.check_theta(&fit.theta_star)?;
    model.check_x(x_test)?;
    if n_samples < 100 {
        return Err(Error::config(format!(
            "laplace_mc_ppd needs at least 100 samples, got {n_samples}"
        )));
    }
    if curv.dim() != model.dim() {
        return Err(Error::config("curvature dimension does not match the model"));
    }
    let theta_hat = fit.theta_star.values();
    let ys = grid_cfg.values(model, theta_hat, x_test)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..n_samples).map(|_| curv.sample(theta_hat, &mut rng)).collect();
    let per_sample: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|t| model.log_density_many(t, x_test, &ys))
        .collect();
    let ln_n = (n_samples as f64).ln();
    let logd: Vec<f64> = (0..ys.len())
        .map(|j| {
            let mx = per_sample.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
            if mx == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            let sum: f64 = per_sample.iter().map(|r| (r[j] - mx).exp()).sum();
            mx + sum.ln() - ln_n
        })
        .collect();
    grid_for(model, ys, logd)
}

/// Rescales a grid to unit mass (trapezoid rule, or summation on a lattice)
/// with a max-shift for stability.
pub fn normalize_grid(grid: &PredictiveGrid) -> Result<PredictiveGrid> {
    if grid.len() < 3 && !grid.discrete {
        return Err(Error::config("normalization needs at least 3 grid points"));
    }
    if grid.log_density.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::numeric(
            "predictive",
            "normalize_grid",
            "grid has NaN or +inf log-densities",
        ));
    }
    let mx = grid.log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return Err(Error::numeric("predictive", "normalize_grid", "all densities are zero"));
    }
    let shifted: Vec<f64> = grid.log_density.iter().map(|l| (l - mx).exp()).collect();
    let mass = if grid.discrete {
        shifted.iter().sum()
    } else {
        trapezoid(&grid.y_values, &shifted)
    };
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::numeric(
            "predictive",
            "normalize_grid",
            format!("integral underflow (mass {mass:e})"),
        ));
    }
    let shift = mx + mass.ln();
    let mut out = grid.clone();
    out.log_density.iter_mut().for_each(|l| *l -= shift);
    out.log_normalizer = grid.log_normalizer + shift;
    out.normalized = true;
    Ok(out)
}

/// Equal-tailed interval from the grid CDF with linear interpolation.
pub fn credible_interval(grid: &PredictiveGrid, level: f64) -> Result<CredibleInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("credible level must lie in (0,1), got {level}")));
    }
    if !grid.normalized {
        return Err(Error::config("credible_interval needs a normalized grid"));
    }
    let cdf = grid.cdf();
    let alpha = 1.0 - level;
    let lower = quantile(&grid.y_values, &cdf, 0.5 * alpha, grid.discrete);
    let upper = quantile(&grid.y_values, &cdf, 1.0 - 0.5 * alpha, grid.discrete);
    Ok(CredibleInterval {
        lower,
        upper,
        nominal_level: level,
    })
}

fn quantile(ys: &[f64], cdf: &[f64], p: f64, discrete: bool) -> f64 {
    let i = cdf.partition_point(|c| *c < p);
    if discrete {
        return ys[i.min(ys.len() - 1)];
    }
    if i == 0 {
        return ys[0];
    }
    if i >= ys.len() {
        return ys[ys.len() - 1];
    }
    let (c0, c1) = (cdf[i - 1], cdf[i]);
    let t = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
    ys[i - 1] + t * (ys[i] - ys[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::curvature_dense;
    use crate::fit::fit_map;
    use crate::prior::PriorKind;

    fn std_normal_grid(count: usize, span: f64) -> PredictiveGrid {
        let ys = equispaced(-span, span, count);
        let ld = ys
            .iter()
            .map(|y| -0.5 * y * y - 0.5 * (2.0 * std::f64::consts::PI).ln())
            .collect();
        PredictiveGrid::new(ys, ld).unwrap()
    }

    #[test]
    fn normalizing_proper_density() {
        let g = normalize_grid(&std_normal_grid(201, 6.0)).unwrap();
        assert!(g.log_normalizer().abs() < 1e-4);
        assert!((g.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalizing_constant() {
        let ys = equispaced(0.0, 1.0, 11);
        let g = PredictiveGrid::new(ys, vec![2.5; 11]).unwrap();
        let n = normalize_grid(&g).unwrap();
        assert!((n.log_normalizer() - 2.5).abs() < 1e-12);
        assert!(n.log_density().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn normalize_rejects_underflow() {
        let g = PredictiveGrid::new(vec![0.0, 1.0, 2.0], vec![f64::NEG_INFINITY; 3]).unwrap();
        assert!(matches!(normalize_grid(&g), Err(Error::Numeric { .. })));
    }

    #[test]
    fn grid_rejects_non_increasing() {
        assert!(PredictiveGrid::new(vec![0.0, 0.0, 1.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn intervals() {
        let g = normalize_grid(&std_normal_grid(2001, 8.0)).unwrap();
        let ci = credible_interval(&g, 0.95).unwrap();
        assert!((ci.lower + 1.959964).abs() < 0.01 && (ci.upper - 1.959964).abs() < 0.01);
        let ci90 = credible_interval(&g, 0.90).unwrap();
        let ci50 = credible_interval(&g, 0.50).unwrap();
        assert!(ci.lower <= ci90.lower && ci90.lower <= ci50.lower);
        assert!(ci.upper >= ci90.upper && ci90.upper >= ci50.upper);
        assert!(credible_interval(&g, 1.0).is_err());
        assert!(credible_interval(&g, 0.0).is_err());

        let u = normalize_grid(&PredictiveGrid::new(equispaced(0.0, 1.0, 101), vec![0.0; 101]).unwrap()).unwrap();
        let ci = credible_interval(&u, 0.5).unwrap();
        assert!((ci.lower - 0.25).abs() < 0.01 && (ci.upper - 0.75).abs() < 0.01);
    }

    fn conjugate_setup(n: usize) -> (LikelihoodModel, Prior, Dataset, FitResult) {
        let model = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let prior = Prior::new(
            PriorKind::IsotropicGaussian {
                mean: 4.0,
                variance: 1.0,
            },
            1,
        )
        .unwrap();
        let ys: Vec<f64> = (0..n).map(|i| 4.0 + ((i * 7919) % 13) as f64 / 6.0 - 1.0).collect();
        let data = Dataset::from_targets(ys).unwrap();
        let fit = fit_map(&model, &prior, &data, &FitConfig::default()).unwrap();
        (model, prior, data, fit)
    }

    #[test]
    fn assla_value_at_self_prediction() {
        let model = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let data = Dataset::from_targets((0..100).map(|i| (i % 5) as f64).collect()).unwrap();
        let prior = Prior::flat(1);
        let fit = fit_map(&model, &prior, &data, &FitConfig::default()).unwrap();
        let curv = curvature_dense(&model, &prior, &data, &fit.theta_star).unwrap();
        let g = assla_log_ppd(&model, &prior, &data, &fit, &curv, &[], &GridConfig::default()).unwrap();
        let mid = g.log_density()[100];
        assert_eq!(g.y_values()[100], fit.theta_star[0]);
        assert!((mid - (-0.5 * 1.01f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn ssla_and_assla_coincide_at_self_prediction() {
        let (model, prior, data, fit) = conjugate_setup(20);
        let opts = EngineOptions::default();
        let curv = curvature(&model, &prior, &data, &fit.theta_star, &opts.curvature, None).unwrap();
        let s = ssla_log_ppd(&model, &prior, &data, &fit, &[], &GridConfig::default(), &opts).unwrap();
        let a = assla_log_ppd(&model, &prior, &data, &fit, &curv, &[], &GridConfig::default()).unwrap();
        assert!((s.log_density()[100] - a.log_density()[100]).abs() < 1e-10);
    }

    #[test]
    fn ssla_is_exact_for_normal_normal() {
        let (model, prior, data, fit) = conjugate_setup(20);
        let s = normalize_grid(
            &ssla_log_ppd(
                &model,
                &prior,
                &data,
                &fit,
                &[],
                &GridConfig::default(),
                &EngineOptions::default(),
            )
            .unwrap(),
        )
        .unwrap();
        let n = 20.0;
        let sn2 = 1.0 / (n / 2.0 + 1.0);
        let mun = (4.0 + data.targets().iter().sum::<f64>() / 2.0) * sn2;
        let v = 2.0 + sn2;
        let (mean, var) = s.moments();
        assert!((mean - mun).abs() < 1e-6);
        assert!((var - v).abs() < 1e-5 * v, "{var} vs {v}");
    }

    #[test]
    fn la_mc_deterministic_and_degenerate() {
        let (model, prior, data, fit) = conjugate_setup(20);
        let curv = curvature_dense(&model, &prior, &data, &fit.theta_star).unwrap();
        let a = laplace_mc_ppd(&model, &fit, &curv, &[], 500, 7, &GridConfig::default()).unwrap();
        let b = laplace_mc_ppd(&model, &fit, &curv, &[], 500, 7, &GridConfig::default()).unwrap();
        assert_eq!(a, b);
        let tight = curv.scaled(1e8).unwrap();
        let g = laplace_mc_ppd(&model, &fit, &tight, &[], 200, 1, &GridConfig::default()).unwrap();
        let plug = model.log_density_many(&fit.theta_star, &[], g.y_values());
        let sup = g
            .log_density()
            .iter()
            .zip(&plug)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-3);
        assert!(laplace_mc_ppd(&model, &fit, &curv, &[], 50, 7, &GridConfig::default()).is_err());
    }

    #[test]
    fn engine_names_round_trip() {
        for e in Engine::ALL {
            assert_eq!(e.as_str().parse::<Engine>().unwrap(), e);
        }
    }
}

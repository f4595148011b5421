//! Ground truth: closed-form conjugate posterior predictives and a
//! tensor-grid quadrature of `∫ p(y|x,θ) p(θ|D) dθ` for `q ≤ 2`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::curvature::curvature_dense;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fit::{fit_map, FitConfig};
use crate::model::LikelihoodModel;
use crate::prior::Prior;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn normal_log_pdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln()) - 0.5 * (y - mean) * (y - mean) / var
}

/// Known-variance Gaussian likelihood with a Gaussian prior on the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalNormalSpec {
    pub mu0: f64,
    pub tau0_sq: f64,
    pub sigma_sq: f64,
}

impl NormalNormalSpec {
    pub fn new(mu0: f64, tau0_sq: f64, sigma_sq: f64) -> Result<Self> {
        if !(tau0_sq > 0.0 && sigma_sq > 0.0) || !mu0.is_finite() {
            return Err(Error::config("Normal–Normal variances must be positive"));
        }
        Ok(Self { mu0, tau0_sq, sigma_sq })
    }

    /// The configuration μ₀ = 4, τ₀² = 1, σ² = 2.
    pub fn reference() -> Self {
        Self {
            mu0: 4.0,
            tau0_sq: 1.0,
            sigma_sq: 2.0,
        }
    }

    /// Posterior `(μₙ, σₙ²)` of the mean.
    pub fn posterior(&self, targets: &[f64]) -> (f64, f64) {
        let n = targets.len() as f64;
        let sn2 = 1.0 / (n / self.sigma_sq + 1.0 / self.tau0_sq);
        let sum: f64 = targets.iter().sum();
        ((self.mu0 / self.tau0_sq + sum / self.sigma_sq) * sn2, sn2)
    }

    /// Predictive `(mean, variance) = (μₙ, σₙ² + σ²)`.
    pub fn predictive(&self, targets: &[f64]) -> (f64, f64) {
        let (m, v) = self.posterior(targets);
        (m, v + self.sigma_sq)
    }

    pub fn ppd_log_density(&self, targets: &[f64], y: f64) -> f64 {
        let (m, v) = self.predictive(targets);
        normal_log_pdf(y, m, v)
    }
}

/// Posterior predictive density of the Normal–Normal model.
pub fn normal_normal_ppd(spec: &NormalNormalSpec, data: &Dataset, y: f64) -> f64 {
    spec.ppd_log_density(data.targets(), y).exp()
}

/// Poisson likelihood with a Gamma(shape α, rate β) prior on the rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonGammaSpec {
    pub alpha: f64,
    pub beta: f64,
}

impl PoissonGammaSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::config("Poisson–Gamma shape and rate must be positive"));
        }
        Ok(Self { alpha, beta })
    }

    /// The configuration α = 6, β = 2.
    pub fn reference() -> Self {
        Self { alpha: 6.0, beta: 2.0 }
    }

    /// Negative binomial parameters `(r, p) = (ΣXᵢ + α, (n+β)/(n+β+1))`.
    pub fn negbin(&self, targets: &[f64]) -> (f64, f64) {
        let n = targets.len() as f64;
        let r = targets.iter().sum::<f64>() + self.alpha;
        (r, (n + self.beta) / (n + self.beta + 1.0))
    }

    /// `log pmf(k) = log Γ(k+r) − log Γ(r) − log k! + r log p + k log(1−p)`.
    pub fn ppd_log_pmf(&self, targets: &[f64], k: u64) -> f64 {
        let (r, p) = self.negbin(targets);
        let k = k as f64;
        ln_gamma(k + r) - ln_gamma(r) - ln_gamma(k + 1.0) + r * p.ln() + k * (-p).ln_1p()
    }
}

/// Posterior predictive pmf of the Poisson–Gamma model at count `k`.
pub fn poisson_gamma_ppd(spec: &PoissonGammaSpec, data: &Dataset, k: i64) -> Result<f64> {
    if k < 0 {
        return Err(Error::Domain(format!("count must be non-negative, got {k}")));
    }
    Ok(spec.ppd_log_pmf(data.targets(), k as u64).exp())
}

/// Conjugate Bayesian linear regression `y = xᵀβ + ε`, `β ~ N(β₀, Σ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlrSpec {
    pub beta0: DVector<f64>,
    pub sigma0: DMatrix<f64>,
    pub sigma_sq: f64,
}

impl BlrSpec {
    pub fn new(beta0: DVector<f64>, sigma0: DMatrix<f64>, sigma_sq: f64) -> Result<Self> {
        let d = beta0.len();
        if sigma0.nrows() != d || sigma0.ncols() != d {
            return Err(Error::config("Σ₀ must be d × d"));
        }
        if !(sigma_sq > 0.0) {
            return Err(Error::config("noise variance must be positive"));
        }
        if (&sigma0 - sigma0.transpose()).abs().max() > 1e-12 * sigma0.abs().max().max(1.0) {
            return Err(Error::config("Σ₀ must be symmetric"));
        }
        if sigma0.clone().cholesky().is_none() {
            return Err(Error::config("Σ₀ must be positive definite"));
        }
        Ok(Self {
            beta0,
            sigma0,
            sigma_sq,
        })
    }

    /// Posterior `(βₙ, Σₙ)` given the design `x` (n × d) and targets.
    pub fn posterior(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.beta0.len();
        if x.ncols() != d || x.nrows() != y.len() {
            return Err(Error::config("design matrix shape does not match the targets or β₀"));
        }
        let p0 = self
            .sigma0
            .clone()
            .cholesky()
            .ok_or_else(|| Error::config("Σ₀ is singular"))?
            .inverse();
        let yv = DVector::from_column_slice(y);
        let prec = x.transpose() * x / self.sigma_sq + &p0;
        let ch = prec
            .cholesky()
            .ok_or_else(|| Error::numeric("oracles", "blr_ppd", "posterior precision is not positive definite"))?;
        let cov = ch.inverse();
        let mean = &cov * (x.transpose() * yv / self.sigma_sq + p0 * &self.beta0);
        Ok((mean, cov))
    }

    /// Predictive `(mean, variance)` at `x_new`.
    pub fn predictive(&self, x: &DMatrix<f64>, y: &[f64], x_new: &[f64]) -> Result<(f64, f64)> {
        let (m, c) = self.posterior(x, y)?;
        if x_new.len() != m.len() {
            return Err(Error::config("x_new has the wrong dimension"));
        }
        let xn = DVector::from_column_slice(x_new);
        Ok((xn.dot(&m), self.sigma_sq + (xn.transpose() * c * &xn)[(0, 0)]))
    }
}

/// Posterior predictive density of conjugate Bayesian linear regression.
pub fn blr_ppd(spec: &BlrSpec, x: &DMatrix<f64>, y: &[f64], x_new: &[f64], y_query: f64) -> Result<f64> {
    let (m, v) = spec.predictive(x, y, x_new)?;
    Ok(normal_log_pdf(y_query, m, v).exp())
}

/// Normalized posterior weights on a tensor grid.
struct PosteriorGrid {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn axis(center: f64, half: (f64, f64), count: usize) -> Vec<f64> {
    crate::predictive::equispaced(center - half.0, center + half.1, count)
}

fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { xs[i] - xs[i - 1] } else { 0.0 };
            let right = if i + 1 < n { xs[i + 1] - xs[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Points per axis of the quadrature grid.
pub const QUADRATURE_POINTS: usize = 2001;

fn posterior_grid(model: &LikelihoodModel, prior: &Prior, data: &Dataset) -> Result<PosteriorGrid> {
    let q = model.dim();
    if q > 2 {
        return Err(Error::Unsupported(format!(
            "quadrature oracle supports q <= 2, got q = {q}"
        )));
    }
    let fit = fit_map(model, prior, data, &FitConfig::default().with_max_iterations(5000))?;
    let mode = fit.theta_star.values().to_vec();
    let sds: Vec<f64> = match curvature_dense(model, prior, data, &mode) {
        Ok(c) => {
            let cov = c.to_dense().try_inverse().unwrap_or_else(|| DMatrix::identity(q, q));
            (0..q).map(|i| cov[(i, i)].abs().sqrt().max(1e-12)).collect()
        }
        Err(_) => vec![1.0; q],
    };
    let log_post = |t: &[f64]| -> f64 {
        let lp = prior.log_density_unchecked(t);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let v = model.log_likelihood_grad(data, t, None) + lp;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let peak = log_post(&mode);

    // Half-widths per axis and side, widened until the edge weights vanish.
    let mut half: Vec<(f64, f64)> = sds.iter().map(|s| (10.0 * s, 10.0 * s)).collect();
    for _ in 0..20 {
        let mut grown = false;
        for a in 0..q {
            for side in [-1.0, 1.0] {
                let h = if side < 0.0 { half[a].0 } else { half[a].1 };
                let mut t = mode.clone();
                t[a] += side * h;
                if log_post(&t) > peak - 60.0 {
                    if side < 0.0 {
                        half[a].0 *= 1.5;
                    } else {
                        half[a].1 *= 1.5;
                    }
                    grown = true;
                }
            }
        }
        if !grown {
            break;
        }
    }

    let axes: Vec<Vec<f64>> = (0..q).map(|a| axis(mode[a], half[a], QUADRATURE_POINTS)).collect();
    let tw: Vec<Vec<f64>> = axes.iter().map(|x| trapezoid_weights(x)).collect();
    let nodes: Vec<Vec<f64>> = if q == 1 {
        axes[0].iter().map(|&t| vec![t]).collect()
    } else {
        axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| vec![a, b]))
            .collect()
    };
    let cell: Vec<f64> = if q == 1 {
        tw[0].clone()
    } else {
        tw[0].iter().flat_map(|&a| tw[1].iter().map(move |&b| a * b)).collect()
    };
    let logs: Vec<f64> = nodes.par_iter().map(|t| log_post(t)).collect();
    let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return Err(Error::numeric(
            "oracles",
            "quadrature_ppd",
            "posterior underflows on the whole grid",
        ));
    }
    let mut weights: Vec<f64> = logs.iter().zip(&cell).map(|(l, c)| (l - mx).exp() * c).collect();
    let z: f64 = weights.iter().sum();
    if !(z > 0.0) {
        return Err(Error::numeric("oracles", "quadrature_ppd", "posterior mass underflow"));
    }
    weights.iter_mut().for_each(|w| *w /= z);
    Ok(PosteriorGrid { nodes, weights })
}

/// Quadrature posterior predictive density at every `y` in `ys`.
pub fn quadrature_ppd_many(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    x_test: &[f64],
    ys: &[f64],
) -> Result<Vec<f64>> {
    model.check_x(x_test)?;
    let grid = posterior_grid(model, prior, data)?;
    let per_node: Vec<Vec<f64>> = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(t, w)| {
            model
                .log_density_many(t, x_test, ys)
                .iter()
                .map(|l| w * l.exp())
                .collect()
        })
        .collect();
    Ok((0..ys.len()).map(|j| per_node.iter().map(|r| r[j]).sum()).collect())
}

/// `∫ p(y|x,θ) p(θ|D) dθ` by tensor-grid quadrature around the posterior
/// mode (±10 Laplace standard deviations, widened until negligible).
pub fn quadrature_ppd(model: &LikelihoodModel, prior: &Prior, data: &Dataset, x_test: &[f64], y: f64) -> Result<f64> {
    Ok(quadrature_ppd_many(model, prior, data, x_test, &[y])?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, Predictor};
    use crate::prior::PriorKind;

    #[test]
    fn normal_normal_examples() {
        let spec = NormalNormalSpec::reference();
        let empty = Dataset::from_targets(vec![]).unwrap();
        let d0 = normal_normal_ppd(&spec, &empty, 4.0);
        assert!((d0 - 1.0 / (6.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((d0 - 0.23033).abs() < 1e-5);
        let (m, v) = spec.posterior(&[4.0, 4.0]);
        assert!((m - 4.0).abs() < 1e-14 && (v - 0.5).abs() < 1e-14);
        assert!((spec.predictive(&[4.0, 4.0]).1 - 2.5).abs() < 1e-14);
    }

    #[test]
    fn predictive_variance_contracts() {
        let spec = NormalNormalSpec::reference();
        let mut last = f64::INFINITY;
        for n in [1, 10, 100, 1000] {
            let v = spec.predictive(&vec![4.0; n]).1;
            assert!(v < last && v > 2.0);
            last = v;
        }
    }

    #[test]
    fn negbin_examples() {
        let spec = PoissonGammaSpec::reference();
        let empty = Dataset::from_targets(vec![]).unwrap();
        assert!((poisson_gamma_ppd(&spec, &empty, 0).unwrap() - (2.0f64 / 3.0).powi(6)).abs() < 1e-14);
        let d = Dataset::from_targets(vec![3.0, 2.0, 4.0]).unwrap();
        let v = poisson_gamma_ppd(&spec, &d, 0).unwrap();
        assert!((v - (5.0f64 / 6.0).powi(15)).abs() < 1e-14);
        assert!((v - 0.064905).abs() < 1e-6);
        assert!(matches!(poisson_gamma_ppd(&spec, &d, -1), Err(Error::Domain(_))));
        let total: f64 = (0..=500).map(|k| poisson_gamma_ppd(&spec, &empty, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn blr_nests_normal_normal() {
        let spec = BlrSpec::new(DVector::from_vec(vec![4.0]), DMatrix::from_element(1, 1, 1.0), 2.0).unwrap();
        let ys = [3.1, 5.2, 4.4, 2.9];
        let x = DMatrix::from_element(4, 1, 1.0);
        let nn = NormalNormalSpec::reference();
        let d = Dataset::from_targets(ys.to_vec()).unwrap();
        for q in [2.0, 4.0, 6.0] {
            let a = blr_ppd(&spec, &x, &ys, &[1.0], q).unwrap();
            let b = normal_normal_ppd(&nn, &d, q);
            assert!((a - b).abs() <= 1e-12 * b);
        }
        let empty = DMatrix::<f64>::zeros(0, 1);
        let (m, v) = spec.predictive(&empty, &[], &[2.0]).unwrap();
        assert!((m - 8.0).abs() < 1e-14 && (v - 6.0).abs() < 1e-14);
        assert!(BlrSpec::new(DVector::from_vec(vec![0.0]), DMatrix::from_element(1, 1, 0.0), 1.0).is_err());
    }

    #[test]
    fn quadrature_matches_normal_normal() {
        let model = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let prior = Prior::new(
            PriorKind::IsotropicGaussian {
                mean: 4.0,
                variance: 1.0,
            },
            1,
        )
        .unwrap();
        let d = Dataset::from_targets(vec![3.2, 4.9, 5.5, 2.8, 4.1]).unwrap();
        let spec = NormalNormalSpec::reference();
        let q = quadrature_ppd_many(&model, &prior, &d, &[], &[2.0, 4.0, 6.0]).unwrap();
        for (y, v) in [2.0, 4.0, 6.0].iter().zip(q) {
            let exact = normal_normal_ppd(&spec, &d, *y);
            assert!((v - exact).abs() <= 1e-8 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn quadrature_matches_poisson_gamma() {
        let model = LikelihoodModel::poisson_rate();
        let prior = Prior::new(PriorKind::Gamma { shape: 6.0, rate: 2.0 }, 1).unwrap();
        let d = Dataset::from_targets(vec![3.0, 2.0, 4.0, 1.0, 5.0]).unwrap();
        let spec = PoissonGammaSpec::reference();
        let ks: Vec<f64> = (0..=10).map(f64::from).collect();
        let q = quadrature_ppd_many(&model, &prior, &d, &[], &ks).unwrap();
        for (k, v) in q.iter().enumerate() {
            let exact = poisson_gamma_ppd(&spec, &d, k as i64).unwrap();
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn quadrature_rejects_large_q() {
        let model = LikelihoodModel::new(Family::GaussianFixed { variance: 1.0 }, Predictor::Linear, 2).unwrap();
        let prior = Prior::isotropic(1.0, 3).unwrap();
        let d = Dataset::from_flat(2, vec![0.0, 1.0], vec![0.5]).unwrap();
        assert!(matches!(
            quadrature_ppd(&model, &prior, &d, &[0.0, 0.0], 0.0),
            Err(Error::Unsupported(_))
        ));
    }
}

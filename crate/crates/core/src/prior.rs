//! Log-prior densities with analytic gradients and (diagonal) Hessians.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// The supported prior families.
///
/// Gaussian variants carry an explicit mean so that conjugate settings such as
/// `N(4, 1)` on a location parameter are expressible; the usual weight prior
/// is `mean = 0`. `Gamma` and `GaussianMixture` are univariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorKind {
    IsotropicGaussian {
        mean: f64,
        variance: f64,
    },
    DiagonalGaussian {
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    ImproperFlat,
    /// Shape/rate parameterization; density is zero for non-positive values.
    Gamma {
        shape: f64,
        rate: f64,
    },
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    },
}

/// A prior over a `dim`-dimensional parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prior {
    kind: PriorKind,
    dim: usize,
}

impl Prior {
    pub fn new(kind: PriorKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("prior dimension must be >= 1"));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match &kind {
            PriorKind::IsotropicGaussian { mean, variance } => {
                if !positive(*variance) || !mean.is_finite() {
                    return Err(Error::config(format!(
                        "isotropic Gaussian prior needs a positive variance, got {variance}"
                    )));
                }
            }
            PriorKind::DiagonalGaussian { means, variances } => {
                if means.len() != dim || variances.len() != dim {
                    return Err(Error::config("diagonal prior length does not match dimension"));
                }
                if !variances.iter().all(|&v| positive(v)) {
                    return Err(Error::config("diagonal prior variances must be positive"));
                }
            }
            PriorKind::ImproperFlat => {}
            PriorKind::Gamma { shape, rate } => {
                if dim != 1 || !positive(*shape) || !positive(*rate) {
                    return Err(Error::config(
                        "gamma prior must be univariate with positive shape and rate",
                    ));
                }
            }
            PriorKind::GaussianMixture {
                weights,
                means,
                variances,
            } => {
                let k = weights.len();
                if dim != 1 || k == 0 || means.len() != k || variances.len() != k {
                    return Err(Error::config(
                        "mixture prior must be univariate with matching component lists",
                    ));
                }
                if !variances.iter().all(|&v| positive(v)) || !weights.iter().all(|&w| positive(w)) {
                    return Err(Error::config("mixture weights and variances must be positive"));
                }
            }
        }
        Ok(Self { kind, dim })
    }

    /// `N(0, variance · I)`.
    pub fn isotropic(variance: f64, dim: usize) -> Result<Self> {
        Self::new(PriorKind::IsotropicGaussian { mean: 0.0, variance }, dim)
    }

    pub fn flat(dim: usize) -> Self {
        Self {
            kind: PriorKind::ImproperFlat,
            dim,
        }
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::config(format!(
                "prior has dimension {}, parameter has {}",
                self.dim,
                theta.len()
            )));
        }
        Ok(())
    }

    /// Exact log-density including normalizing constants. Returns `-inf`
    /// outside the support of a gamma prior.
    pub fn log_density(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.log_density_unchecked(theta))
    }

    pub(crate) fn log_density_unchecked(&self, theta: &[f64]) -> f64 {
        match &self.kind {
            PriorKind::IsotropicGaussian { mean, variance } => {
                let ss: f64 = theta.iter().map(|t| (t - mean) * (t - mean)).sum();
                -0.5 * theta.len() as f64 * (LN_2PI + variance.ln()) - 0.5 * ss / variance
            }
            PriorKind::DiagonalGaussian { means, variances } => theta
                .iter()
                .zip(means)
                .zip(variances)
                .map(|((t, m), v)| -0.5 * (LN_2PI + v.ln()) - 0.5 * (t - m) * (t - m) / v)
                .sum(),
            PriorKind::ImproperFlat => 0.0,
            PriorKind::Gamma { shape, rate } => {
                let t = theta[0];
                if t <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * t.ln() - rate * t
            }
            PriorKind::GaussianMixture { .. } => self.mixture_terms(theta[0]).0,
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let mut g = vec![0.0; self.dim];
        self.add_gradient(theta, &mut g);
        Ok(g)
    }

    /// Adds the log-prior gradient into `grad`.
    pub(crate) fn add_gradient(&self, theta: &[f64], grad: &mut [f64]) {
        match &self.kind {
            PriorKind::IsotropicGaussian { mean, variance } => {
                for (g, t) in grad.iter_mut().zip(theta) {
                    *g -= (t - mean) / variance;
                }
            }
            PriorKind::DiagonalGaussian { means, variances } => {
                for i in 0..theta.len() {
                    grad[i] -= (theta[i] - means[i]) / variances[i];
                }
            }
            PriorKind::ImproperFlat => {}
            PriorKind::Gamma { shape, rate } => {
                let t = theta[0];
                if t > 0.0 {
                    grad[0] += (shape - 1.0) / t - rate;
                }
            }
            PriorKind::GaussianMixture { .. } => grad[0] += self.mixture_terms(theta[0]).1,
        }
    }

    /// Diagonal of the log-prior Hessian. Every supported prior is separable.
    pub fn hessian_diagonal(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(self.hessian_diagonal_unchecked(theta))
    }

    pub(crate) fn hessian_diagonal_unchecked(&self, theta: &[f64]) -> Vec<f64> {
        match &self.kind {
            PriorKind::IsotropicGaussian { variance, .. } => vec![-1.0 / variance; theta.len()],
            PriorKind::DiagonalGaussian { variances, .. } => variances.iter().map(|v| -1.0 / v).collect(),
            PriorKind::ImproperFlat => vec![0.0; theta.len()],
            PriorKind::Gamma { shape, .. } => {
                let t = theta[0];
                if t > 0.0 {
                    vec![-(shape - 1.0) / (t * t)]
                } else {
                    vec![0.0]
                }
            }
            PriorKind::GaussianMixture { .. } => vec![self.mixture_terms(theta[0]).2],
        }
    }

    /// (log-density, first derivative, second derivative) of a 1-D mixture.
    fn mixture_terms(&self, t: f64) -> (f64, f64, f64) {
        let PriorKind::GaussianMixture {
            weights,
            means,
            variances,
        } = &self.kind
        else {
            unreachable!("mixture_terms on a non-mixture prior")
        };
        let wsum: f64 = weights.iter().sum();
        let logs: Vec<f64> = weights
            .iter()
            .zip(means)
            .zip(variances)
            .map(|((w, m), v)| (w / wsum).ln() - 0.5 * (LN_2PI + v.ln()) - 0.5 * (t - m) * (t - m) / v)
            .collect();
        let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
        let lse = mx + z.ln();
        let (mut d1, mut d2) = (0.0, 0.0);
        for ((l, m), v) in logs.iter().zip(means).zip(variances) {
            let r = (l - lse).exp();
            let g = -(t - m) / v;
            d1 += r * g;
            d2 += r * (g * g - 1.0 / v);
        }
        (lse, d1, d2 - d1 * d1)
    }
}

/// Log-prior density of `theta`.
pub fn log_prior(prior: &Prior, theta: &[f64]) -> Result<f64> {
    prior.log_density(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn standard_normal_at_mode() {
        let p = Prior::isotropic(1.0, 1).unwrap();
        assert_relative_eq!(
            log_prior(&p, &[0.0]).unwrap(),
            -0.918_938_533_204_672_7,
            epsilon = 1e-12
        );
    }

    #[test]
    fn near_noninformative() {
        let p = Prior::isotropic(1e6, 1).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * 1e6).ln() - 0.125e-6;
        let got = log_prior(&p, &[0.5]).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
        assert!((got - (-7.8267)).abs() < 1e-4);
    }

    #[test]
    fn flat_is_zero() {
        let p = Prior::flat(3);
        assert_eq!(log_prior(&p, &[1.0, -5.0, 1e9]).unwrap(), 0.0);
        assert_eq!(p.gradient(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
        assert_eq!(p.hessian_diagonal(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rejects_bad_variance() {
        assert!(Prior::isotropic(0.0, 1).is_err());
        assert!(Prior::isotropic(-1.0, 1).is_err());
        assert!(Prior::new(
            PriorKind::DiagonalGaussian {
                means: vec![0.0, 0.0],
                variances: vec![1.0, 0.0]
            },
            2
        )
        .is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let p = Prior::isotropic(1.0, 2).unwrap();
        assert!(matches!(p.log_density(&[1.0]), Err(Error::Config(_))));
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * f(lo + i as f64 * h)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn gaussian_priors_integrate_to_one() {
        for (mean, variance) in [(0.0, 1.0), (4.0, 1.0), (-2.0, 0.01), (0.0, 25.0)] {
            let p = Prior::new(PriorKind::IsotropicGaussian { mean, variance }, 1).unwrap();
            let sd: f64 = variance.sqrt();
            let mass = trapezoid(
                |t| p.log_density(&[t]).unwrap().exp(),
                mean - 12.0 * sd,
                mean + 12.0 * sd,
                20_000,
            );
            assert!((mass - 1.0).abs() < 1e-4, "mass {mass}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let priors = [
            Prior::new(
                PriorKind::IsotropicGaussian {
                    mean: 1.0,
                    variance: 2.0,
                },
                1,
            )
            .unwrap(),
            Prior::new(PriorKind::Gamma { shape: 6.0, rate: 2.0 }, 1).unwrap(),
            Prior::new(
                PriorKind::GaussianMixture {
                    weights: vec![0.3, 0.7],
                    means: vec![-2.0, 1.5],
                    variances: vec![0.5, 2.0],
                },
                1,
            )
            .unwrap(),
        ];
        for p in &priors {
            for &t in &[0.4, 1.3, 2.7] {
                let h = 1e-5;
                let f = |t: f64| p.log_density(&[t]).unwrap();
                let g = p.gradient(&[t]).unwrap()[0];
                let hd = p.hessian_diagonal(&[t]).unwrap()[0];
                let fd_g = (f(t + h) - f(t - h)) / (2.0 * h);
                let gp = p.gradient(&[t + h]).unwrap()[0];
                let gm = p.gradient(&[t - h]).unwrap()[0];
                let fd_h = (gp - gm) / (2.0 * h);
                assert!((g - fd_g).abs() < 1e-6, "{p:?} grad {g} vs {fd_g}");
                assert!((hd - fd_h).abs() < 1e-5, "{p:?} hess {hd} vs {fd_h}");
            }
        }
    }

    #[test]
    fn gamma_outside_support() {
        let p = Prior::new(PriorKind::Gamma { shape: 6.0, rate: 2.0 }, 1).unwrap();
        assert_eq!(p.log_density(&[-1.0]).unwrap(), f64::NEG_INFINITY);
    }
}

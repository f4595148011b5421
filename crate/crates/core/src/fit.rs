//! MAP estimation of `ℓ_D + log π` and of the augmented objective
//! `ℓ_D + ℓ_{(x,ŷ)} + log π` by first-order ascent with backtracking.

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureMatrix;
use crate::data::{Dataset, ObservationRef, ParameterVector, PseudoObservation};
use crate::error::{Error, Result};
use crate::model::LikelihoodModel;
use crate::prior::Prior;

/// Step-length rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum StepRule {
    Fixed {
        eta: f64,
    },
    /// Armijo backtracking: shrink the step by `shrink` until the objective
    /// rises by at least `sufficient_increase · α · gᵀd`.
    Backtracking {
        shrink: f64,
        sufficient_increase: f64,
    },
}

/// Search direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "direction", rename_all = "kebab-case")]
pub enum Direction {
    /// The gradient, with Barzilai–Borwein initial step lengths.
    Gradient,
    /// Limited-memory BFGS built from gradient differences.
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the sup-norm of the objective gradient.
    pub gradient_tolerance: f64,
    pub step_rule: StepRule,
    pub direction: Direction,
    /// Seeds the initial parameters when no warm start is given.
    pub seed: u64,
    pub warm_start: Option<ParameterVector>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            gradient_tolerance: 1e-8,
            step_rule: StepRule::Backtracking {
                shrink: 0.5,
                sufficient_increase: 1e-4,
            },
            direction: Direction::Gradient,
            seed: 0,
            warm_start: None,
        }
    }
}

impl FitConfig {
    /// The default refit budget for augmented objectives.
    pub fn refit() -> Self {
        Self {
            max_iterations: 200,
            ..Self::default()
        }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.gradient_tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::config("gradient_tolerance must be positive"));
        }
        match self.step_rule {
            StepRule::Fixed { eta } if !(eta > 0.0 && eta.is_finite()) => {
                return Err(Error::config("fixed step size must be positive"))
            }
            StepRule::Backtracking {
                shrink,
                sufficient_increase,
            } if !(shrink > 0.0 && shrink < 1.0 && sufficient_increase > 0.0 && sufficient_increase < 1.0) => {
                return Err(Error::config(
                    "backtracking needs shrink and sufficient_increase in (0,1)",
                ))
            }
            _ => {}
        }
        if let Direction::Lbfgs { memory: 0 } = self.direction {
            return Err(Error::config("L-BFGS memory must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_star: ParameterVector,
    pub objective_value: f64,
    /// Sup-norm of the objective gradient at `theta_star`.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Value and gradient of `ℓ_D(θ) + ℓ_pseudo(θ) + log π(θ)`.
pub(crate) fn penalized_objective(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    pseudo: Option<ObservationRef<'_>>,
    theta: &[f64],
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut f = model.log_likelihood_grad(data, theta, Some(grad));
    if let Some(p) = pseudo {
        let mut s = model.new_scratch();
        f += model.add_sample_gradient(theta, p.x, p.y, 1.0, &mut s, grad);
    }
    f += prior.log_density_unchecked(theta);
    prior.add_gradient(theta, grad);
    f
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximizes `objective` (returning value, filling gradient) from `start`.
pub fn maximize<F>(objective: F, start: Vec<f64>, config: &FitConfig) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    maximize_preconditioned(objective, start, config, None)
}

/// Like [`maximize`], with a fixed symmetric positive-definite metric `P`
/// (an estimate of the inverse negative Hessian) used as the initial L-BFGS
/// matrix. Only the path changes, not the optimum.
pub fn maximize_preconditioned<F>(
    mut objective: F,
    start: Vec<f64>,
    config: &FitConfig,
    precond: Option<&CurvatureMatrix>,
) -> Result<FitResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    if let Some(p) = precond {
        if p.dim() != start.len() {
            return Err(Error::config("preconditioner dimension does not match the parameters"));
        }
    }
    config.validate()?;
    let q = start.len();
    let mut theta = start;
    let mut g = vec![0.0; q];
    let mut f = objective(&theta, &mut g);
    if f.is_nan() || g.iter().any(|v| v.is_nan()) {
        return Err(Error::numeric("map_fit", "maximize", "NaN objective at iteration 0"));
    }
    if !f.is_finite() {
        return Err(Error::numeric(
            "map_fit",
            "maximize",
            format!("objective is {f} at the starting point (iteration 0)"),
        ));
    }

    let memory = match config.direction {
        Direction::Lbfgs { memory } => memory,
        Direction::Gradient => 0,
    };
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(memory);
    let mut bb_step: Option<f64> = None;

    let mut trial = vec![0.0; q];
    let mut g_trial = vec![0.0; q];
    let mut iterations = 0;
    let mut gnorm = sup_norm(&g);

    while iterations < config.max_iterations && gnorm > config.gradient_tolerance {
        let it = iterations + 1;
        let (dir, alpha0) = match config.direction {
            Direction::Gradient => {
                let a = bb_step.unwrap_or_else(|| 1.0 / gnorm.max(1.0));
                (g.clone(), a)
            }
            Direction::Lbfgs { .. } => {
                let d = lbfgs_direction(&g, &s_hist, &y_hist, precond);
                if dot(&d, &g) > 0.0 {
                    let a = if s_hist.is_empty() && precond.is_none() {
                        1.0 / gnorm.max(1.0)
                    } else {
                        1.0
                    };
                    (d, a)
                } else {
                    s_hist.clear();
                    y_hist.clear();
                    (g.clone(), 1.0 / gnorm.max(1.0))
                }
            }
        };
        let slope = dot(&g, &dir);

        let accepted = match config.step_rule {
            StepRule::Fixed { eta } => {
                for i in 0..q {
                    trial[i] = theta[i] + eta * g[i];
                }
                let ft = objective(&trial, &mut g_trial);
                if ft.is_nan() || g_trial.iter().any(|v| v.is_nan()) {
                    return Err(Error::numeric(
                        "map_fit",
                        "maximize",
                        format!("NaN objective at iteration {it}"),
                    ));
                }
                Some(ft)
            }
            StepRule::Backtracking {
                shrink,
                sufficient_increase,
            } => {
                let mut alpha = alpha0;
                let mut found = None;
                let mut saw_nan = false;
                for _ in 0..80 {
                    for i in 0..q {
                        trial[i] = theta[i] + alpha * dir[i];
                    }
                    let ft = objective(&trial, &mut g_trial);
                    if ft.is_nan() || g_trial.iter().any(|v| v.is_nan()) {
                        saw_nan = true;
                    } else if ft.is_finite() {
                        let armijo = ft >= f + sufficient_increase * alpha * slope;
                        let noise = ft >= f - 1e-12 * f.abs() && sup_norm(&g_trial) < gnorm;
                        if armijo || noise {
                            found = Some(ft);
                            break;
                        }
                    }
                    alpha *= shrink;
                    if alpha * sup_norm(&dir) <= 1e-300 {
                        break;
                    }
                }
                if found.is_none() && saw_nan {
                    return Err(Error::numeric(
                        "map_fit",
                        "maximize",
                        format!("NaN objective at iteration {it} for every trial step"),
                    ));
                }
                found
            }
        };

        let Some(f_new) = accepted else {
            log::debug!("line search stalled at iteration {it}, gradient norm {gnorm:e}");
            break;
        };

        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g.iter().zip(&g_trial).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        match config.direction {
            Direction::Gradient => {
                bb_step = if sy > 0.0 { Some(dot(&s, &s) / sy) } else { None };
            }
            Direction::Lbfgs { memory } => {
                if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
                    if s_hist.len() == memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(yv);
                }
            }
        }
        std::mem::swap(&mut theta, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        f = f_new;
        gnorm = sup_norm(&g);
        iterations = it;
    }

    let converged = config.max_iterations > 0 && gnorm <= config.gradient_tolerance;
    Ok(FitResult {
        theta_star: ParameterVector::new(theta)?,
        objective_value: f,
        gradient_norm: gnorm,
        iterations,
        converged,
    })
}

/// Two-loop recursion for the ascent direction `H g` with `H` approximating
/// the inverse negative Hessian. `H₀` is `P` when given, else `γI`.
fn lbfgs_direction(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], precond: Option<&CurvatureMatrix>) -> Vec<f64> {
    let m = s_hist.len();
    let mut r = g.to_vec();
    let mut alphas = vec![0.0; m];
    let rhos: Vec<f64> = (0..m).map(|i| 1.0 / dot(&s_hist[i], &y_hist[i])).collect();
    for i in (0..m).rev() {
        let a = rhos[i] * dot(&s_hist[i], &r);
        alphas[i] = a;
        for (rj, yj) in r.iter_mut().zip(&y_hist[i]) {
            *rj -= a * yj;
        }
    }
    if let Some(p) = precond {
        r = p.solve(&r);
    } else if m > 0 {
        let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
        r.iter_mut().for_each(|v| *v *= gamma);
    }
    for i in 0..m {
        let b = rhos[i] * dot(&y_hist[i], &r);
        for (rj, sj) in r.iter_mut().zip(&s_hist[i]) {
            *rj += (alphas[i] - b) * sj;
        }
    }
    r
}

fn check_inputs(model: &LikelihoodModel, prior: &Prior, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::config("cannot fit an empty dataset"));
    }
    model.check_data(data)?;
    if prior.dim() != model.dim() {
        return Err(Error::config(format!(
            "prior dimension {} does not match model dimension {}",
            prior.dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// `θ̂ = argmax ℓ_D(θ) + log π(θ)`.
pub fn fit_map(model: &LikelihoodModel, prior: &Prior, data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    check_inputs(model, prior, data)?;
    let start = match &config.warm_start {
        Some(w) => {
            model.check_theta(w)?;
            w.values().to_vec()
        }
        None => model.initial_parameters(config.seed),
    };
    maximize(
        |t, g| penalized_objective(model, prior, data, None, t, g),
        start,
        config,
    )
}

/// `θ̃ = argmax ℓ_D(θ) + log p(ŷ|x_new,θ) + log π(θ)`, started at `warm_start`.
/// The pseudo observation is a separate term, never appended to `data`.
pub fn refit_augmented(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    pseudo: &PseudoObservation,
    warm_start: &ParameterVector,
    config: &FitConfig,
) -> Result<FitResult> {
    check_inputs(model, prior, data)?;
    model.check_theta(warm_start)?;
    model.check_x(&pseudo.x_new)?;
    model.check_target(pseudo.y_hat)?;
    let p = pseudo.as_ref();
    maximize(
        |t, g| penalized_objective(model, prior, data, Some(p), t, g),
        warm_start.values().to_vec(),
        config,
    )
}

/// [`refit_augmented`] with L-BFGS started from the metric `curv⁻¹`,
/// typically the curvature at the original fit. Needs an L-BFGS direction.
pub fn refit_augmented_preconditioned(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    pseudo: &PseudoObservation,
    warm_start: &ParameterVector,
    config: &FitConfig,
    curv: &CurvatureMatrix,
) -> Result<FitResult> {
    check_inputs(model, prior, data)?;
    model.check_theta(warm_start)?;
    model.check_x(&pseudo.x_new)?;
    model.check_target(pseudo.y_hat)?;
    if !matches!(config.direction, Direction::Lbfgs { .. }) {
        return Err(Error::config("preconditioned refits need the L-BFGS direction"));
    }
    let p = pseudo.as_ref();
    maximize_preconditioned(
        |t, g| penalized_objective(model, prior, data, Some(p), t, g),
        warm_start.values().to_vec(),
        config,
        Some(curv),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Family, Predictor};
    use crate::prior::PriorKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normal_prior(mean: f64, variance: f64) -> Prior {
        Prior::new(PriorKind::IsotropicGaussian { mean, variance }, 1).unwrap()
    }

    #[test]
    fn conjugate_mode() {
        let m = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let d = Dataset::from_targets(vec![4.0, 4.0]).unwrap();
        let r = fit_map(&m, &normal_prior(4.0, 1.0), &d, &FitConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.theta_star[0] - 4.0).abs() < 1e-8);

        let d = Dataset::from_targets(vec![1.0, 5.0, 3.0]).unwrap();
        let r = fit_map(&m, &normal_prior(0.0, 0.5), &d, &FitConfig::default()).unwrap();
        let expected = (9.0 / 2.0) / (3.0 / 2.0 + 2.0);
        assert!((r.theta_star[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn flat_prior_sample_mean() {
        let m = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let d = Dataset::from_targets(vec![1.0, 2.0, 3.0]).unwrap();
        let r = fit_map(&m, &Prior::flat(1), &d, &FitConfig::default()).unwrap();
        assert!((r.theta_star[0] - 2.0).abs() < 1e-8);
        assert!(r.gradient_norm <= 1e-8);
    }

    #[test]
    fn zero_budget_returns_warm_start() {
        let m = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let d = Dataset::from_targets(vec![1.0, 2.0, 3.0]).unwrap();
        let mut cfg = FitConfig::default().with_max_iterations(0);
        cfg.warm_start = Some(ParameterVector::new(vec![0.5]).unwrap());
        let r = fit_map(&m, &Prior::flat(1), &d, &cfg).unwrap();
        assert_eq!(r.theta_star.values(), &[0.5]);
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn augmented_refits() {
        let m = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let d = Dataset::from_targets(vec![4.0, 4.0]).unwrap();
        let fit = fit_map(&m, &Prior::flat(1), &d, &FitConfig::default()).unwrap();
        let cfg = FitConfig::refit();
        let same = refit_augmented(
            &m,
            &Prior::flat(1),
            &d,
            &PseudoObservation::new(vec![], 4.0),
            &fit.theta_star,
            &cfg,
        )
        .unwrap();
        assert!((same.theta_star[0] - 4.0).abs() < 1e-12);
        let moved = refit_augmented(
            &m,
            &Prior::flat(1),
            &d,
            &PseudoObservation::new(vec![], 7.0),
            &fit.theta_star,
            &cfg,
        )
        .unwrap();
        assert!(moved.converged);
        assert!((moved.theta_star[0] - 5.0).abs() < 1e-8);
    }

    #[test]
    fn nan_objective_reports_iteration() {
        let r = maximize(
            |_, g| {
                g[0] = 0.0;
                f64::NAN
            },
            vec![0.0],
            &FitConfig::default(),
        );
        match r {
            Err(Error::Numeric { detail, .. }) => assert!(detail.contains("iteration 0")),
            other => panic!("{other:?}"),
        }
        let mut calls = 0;
        let r = maximize(
            |t, g| {
                calls += 1;
                g[0] = 1.0;
                if calls > 1 {
                    f64::NAN
                } else {
                    t[0]
                }
            },
            vec![0.0],
            &FitConfig {
                step_rule: StepRule::Fixed { eta: 0.1 },
                ..FitConfig::default()
            },
        );
        match r {
            Err(Error::Numeric { detail, .. }) => assert!(detail.contains("iteration 1"), "{detail}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_config() {
        let cfg = FitConfig {
            gradient_tolerance: 0.0,
            ..FitConfig::default()
        };
        assert!(maximize(|_, _| 0.0, vec![0.0], &cfg).is_err());
    }

    #[test]
    fn linear_gaussian_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 40;
        let xs: Vec<f64> = (0..n * 2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = (0..n)
            .map(|i| 0.7 * xs[2 * i] - 1.3 * xs[2 * i + 1] + 0.4 + rng.random_range(-0.5..0.5))
            .collect();
        let d = Dataset::from_flat(2, xs.clone(), ys.clone()).unwrap();
        let m = LikelihoodModel::new(Family::GaussianFixed { variance: 0.25 }, Predictor::Linear, 2).unwrap();
        let prior = Prior::isotropic(2.0, 3).unwrap();
        for direction in [Direction::Gradient, Direction::Lbfgs { memory: 8 }] {
            let cfg = FitConfig::default().with_direction(direction).with_tolerance(1e-10);
            let r = fit_map(&m, &prior, &d, &cfg).unwrap();
            assert!(r.converged, "{direction:?}");
            let mut a = nalgebra::DMatrix::<f64>::identity(3, 3) * 0.5;
            let mut b = nalgebra::DVector::<f64>::zeros(3);
            for i in 0..n {
                let z = nalgebra::DVector::from_vec(vec![xs[2 * i], xs[2 * i + 1], 1.0]);
                a += &z * z.transpose() / 0.25;
                b += &z * (ys[i] / 0.25);
            }
            let beta = a.cholesky().unwrap().solve(&b);
            for j in 0..3 {
                assert!((r.theta_star[j] - beta[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mlp_fit_converges_with_lbfgs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 60;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin() + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let d = Dataset::from_flat(1, xs, ys).unwrap();
        let m = LikelihoodModel::new(
            Family::GaussianHeteroscedastic,
            Predictor::Mlp {
                hidden: vec![8],
                activation: Activation::Tanh,
            },
            1,
        )
        .unwrap();
        let prior = Prior::isotropic(1.0, m.dim()).unwrap();
        let cfg = FitConfig::default()
            .with_direction(Direction::Lbfgs { memory: 20 })
            .with_tolerance(1e-6)
            .with_max_iterations(5000);
        let r = fit_map(&m, &prior, &d, &cfg).unwrap();
        assert!(r.converged, "gradient norm {}", r.gradient_norm);
    }

    #[test]
    fn warm_start_not_slower_than_cold() {
        let m = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let prior = normal_prior(4.0, 1.0);
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ys: Vec<f64> = (0..30).map(|_| 4.0 + rng.random_range(-2.0..2.0)).collect();
            let d = Dataset::from_targets(ys).unwrap();
            let fit = fit_map(&m, &prior, &d, &FitConfig::default()).unwrap();
            let pseudo = PseudoObservation::new(vec![], fit.theta_star[0] + 1.0);
            let warm = refit_augmented(&m, &prior, &d, &pseudo, &fit.theta_star, &FitConfig::refit()).unwrap();
            let cold = refit_augmented(
                &m,
                &prior,
                &d,
                &pseudo,
                &ParameterVector::new(vec![0.0]).unwrap(),
                &FitConfig::refit(),
            )
            .unwrap();
            assert!(warm.converged && cold.converged);
            assert!(
                warm.iterations <= cold.iterations,
                "{} > {}",
                warm.iterations,
                cold.iterations
            );
        }
    }
}

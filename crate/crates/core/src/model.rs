//! Likelihood models: a family of per-sample densities composed with a
//! predictor `f_θ(x)` producing one or two outputs.
//!
//! Parameter layout:
//! - constant predictor: one parameter per output head;
//! - linear predictor: per head, `input_dim` weights followed by a bias;
//! - mlp predictor: per layer, the row-major weight matrix (out × in) followed
//!   by the bias vector. Hidden layers apply the activation; the output layer
//!   is affine.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, ObservationRef};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Observation family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `y ~ N(f(x), variance)`.
    GaussianFixed { variance: f64 },
    /// `y ~ N(μ(x), exp(s(x)))` with heads `(μ, s = log σ²)`.
    GaussianHeteroscedastic,
    /// `y ~ Poisson(λ)`; identity link for the constant predictor, log link
    /// for the linear predictor.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "predictor", rename_all = "kebab-case")]
pub enum Predictor {
    ConstantMean,
    Linear,
    Mlp { hidden: Vec<usize>, activation: Activation },
}

/// Point prediction at one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    /// Observation variance at `x`: `σ²` (fixed Gaussian), `exp(s(x))`
    /// (heteroscedastic) or `λ` (Poisson).
    pub variance: Option<f64>,
}

/// Which output-space curvature to attach to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputCurvature {
    /// `−∂²_o log p(y|o)`, possibly indefinite.
    Observed,
    /// Positive semi-definite Gauss–Newton curvature: the observed curvature
    /// where it is PSD, the Fisher information for the heteroscedastic family.
    GaussNewton,
}

/// Internal link/head combination resolved at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Head {
    GaussFixed(f64),
    Hetero,
    PoissonIdentity,
    PoissonLog,
}

type Out = [f64; 2];
type Out2 = [[f64; 2]; 2];

impl Head {
    fn n_out(self) -> usize {
        match self {
            Head::Hetero => 2,
            _ => 1,
        }
    }

    fn log_density(self, o: Out, y: f64) -> f64 {
        match self {
            Head::GaussFixed(v) => {
                let r = y - o[0];
                -0.5 * (LN_2PI + v.ln()) - 0.5 * r * r / v
            }
            Head::Hetero => {
                let r = y - o[0];
                -0.5 * LN_2PI - 0.5 * o[1] - 0.5 * r * r * (-o[1]).exp()
            }
            Head::PoissonIdentity => {
                let lam = o[0];
                if lam <= 0.0 {
                    if lam == 0.0 && y == 0.0 {
                        return 0.0;
                    }
                    return f64::NEG_INFINITY;
                }
                y * lam.ln() - lam - ln_gamma(y + 1.0)
            }
            Head::PoissonLog => y * o[0] - o[0].exp() - ln_gamma(y + 1.0),
        }
    }

    fn gradient(self, o: Out, y: f64) -> Out {
        match self {
            Head::GaussFixed(v) => [(y - o[0]) / v, 0.0],
            Head::Hetero => {
                let r = y - o[0];
                let w = (-o[1]).exp();
                [r * w, -0.5 + 0.5 * r * r * w]
            }
            Head::PoissonIdentity => [y / o[0] - 1.0, 0.0],
            Head::PoissonLog => [y - o[0].exp(), 0.0],
        }
    }

    /// Negative Hessian of the log-density in output space.
    fn curvature(self, o: Out, y: f64, kind: OutputCurvature) -> Out2 {
        match self {
            Head::GaussFixed(v) => [[1.0 / v, 0.0], [0.0, 0.0]],
            Head::Hetero => {
                let w = (-o[1]).exp();
                match kind {
                    OutputCurvature::GaussNewton => [[w, 0.0], [0.0, 0.5]],
                    OutputCurvature::Observed => {
                        let r = y - o[0];
                        [[w, r * w], [r * w, 0.5 * r * r * w]]
                    }
                }
            }
            Head::PoissonIdentity => [[y / (o[0] * o[0]), 0.0], [0.0, 0.0]],
            Head::PoissonLog => [[o[0].exp(), 0.0], [0.0, 0.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

impl Layer {
    fn n_params(&self) -> usize {
        self.fan_out * (self.fan_in + 1)
    }

    fn bias_offset(&self) -> usize {
        self.offset + self.fan_out * self.fan_in
    }
}

/// Reusable buffers for one MLP forward/backward pass.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

/// A regression model: family, predictor and input dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    family: Family,
    predictor: Predictor,
    input_dim: usize,
    head: Head,
    layers: Vec<Layer>,
    dim: usize,
}

impl LikelihoodModel {
    pub fn new(family: Family, predictor: Predictor, input_dim: usize) -> Result<Self> {
        let head = match (&family, &predictor) {
            (Family::GaussianFixed { variance }, _) => {
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(Error::config(format!(
                        "Gaussian noise variance must be positive, got {variance}"
                    )));
                }
                Head::GaussFixed(*variance)
            }
            (Family::GaussianHeteroscedastic, _) => Head::Hetero,
            (Family::Poisson, Predictor::ConstantMean) => Head::PoissonIdentity,
            (Family::Poisson, Predictor::Linear) => Head::PoissonLog,
            (Family::Poisson, Predictor::Mlp { .. }) => {
                return Err(Error::config(
                    "the Poisson family supports only constant-rate and log-linear predictors",
                ))
            }
        };
        let n_out = head.n_out();
        let mut layers = Vec::new();
        let dim = match &predictor {
            Predictor::ConstantMean => n_out,
            Predictor::Linear => {
                if input_dim == 0 {
                    return Err(Error::config("linear predictor needs input_dim >= 1"));
                }
                n_out * (input_dim + 1)
            }
            Predictor::Mlp { hidden, .. } => {
                if input_dim == 0 || hidden.is_empty() || hidden.contains(&0) {
                    return Err(Error::config(
                        "mlp needs input_dim >= 1 and non-empty, non-zero hidden widths",
                    ));
                }
                let mut sizes = vec![input_dim];
                sizes.extend_from_slice(hidden);
                sizes.push(n_out);
                let mut offset = 0;
                for w in sizes.windows(2) {
                    let layer = Layer {
                        fan_in: w[0],
                        fan_out: w[1],
                        offset,
                    };
                    offset += layer.n_params();
                    layers.push(layer);
                }
                offset
            }
        };
        Ok(Self {
            family,
            predictor,
            input_dim,
            head,
            layers,
            dim,
        })
    }

    /// Gaussian likelihood with known variance and a constant mean parameter.
    pub fn gaussian_mean(variance: f64) -> Result<Self> {
        Self::new(Family::GaussianFixed { variance }, Predictor::ConstantMean, 0)
    }

    /// Poisson likelihood with the rate itself as parameter.
    pub fn poisson_rate() -> Self {
        Self::new(Family::Poisson, Predictor::ConstantMean, 0).expect("valid model")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of parameters `q`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of predictor outputs (1, or 2 for the heteroscedastic family).
    pub fn n_outputs(&self) -> usize {
        self.head.n_out()
    }

    /// Whether targets live on the non-negative integers.
    pub fn is_discrete(&self) -> bool {
        matches!(self.family, Family::Poisson)
    }

    /// Whether the outputs are affine in θ (constant or linear predictor).
    pub fn is_affine(&self) -> bool {
        !matches!(self.predictor, Predictor::Mlp { .. })
    }

    /// Parameter index ranges, one per layer for an mlp and a single block
    /// otherwise.
    pub fn layer_blocks(&self) -> Vec<Range<usize>> {
        if self.layers.is_empty() {
            vec![0..self.dim]
        } else {
            self.layers.iter().map(|l| l.offset..l.offset + l.n_params()).collect()
        }
    }

    pub fn new_scratch(&self) -> Scratch {
        let mut s = Scratch::default();
        if !self.layers.is_empty() {
            s.acts = std::iter::once(self.input_dim)
                .chain(self.layers.iter().map(|l| l.fan_out))
                .map(|w| vec![0.0; w])
                .collect();
            s.pre = self.layers.iter().map(|l| vec![0.0; l.fan_out]).collect();
            let widest = self.layers.iter().map(|l| l.fan_out.max(l.fan_in)).max().unwrap_or(0);
            s.delta = vec![0.0; widest];
            s.delta_prev = vec![0.0; widest];
        }
        s
    }

    // ---- validation -------------------------------------------------------

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::config(format!(
                "model has {} parameters, got {}",
                self.dim,
                theta.len()
            )));
        }
        Ok(())
    }

    pub fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::config(format!(
                "model expects input dimension {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn check_target(&self, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("non-finite target {y}")));
        }
        if self.is_discrete() && (y < 0.0 || y.fract() != 0.0) {
            return Err(Error::Domain(format!(
                "Poisson targets must be non-negative integers, got {y}"
            )));
        }
        Ok(())
    }

    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.input_dim() != self.input_dim {
            return Err(Error::config(format!(
                "dataset input dimension {} does not match model input dimension {}",
                data.input_dim(),
                self.input_dim
            )));
        }
        if self.is_discrete() {
            for (i, &y) in data.targets().iter().enumerate() {
                self.check_target(y)
                    .map_err(|e| Error::Domain(format!("row {i}: {e}")))?;
            }
        }
        Ok(())
    }

    // ---- forward / backward ----------------------------------------------

    /// Predictor outputs `f_θ(x)`.
    pub(crate) fn outputs(&self, theta: &[f64], x: &[f64], s: &mut Scratch) -> Out {
        match &self.predictor {
            Predictor::ConstantMean => {
                let mut o = [0.0; 2];
                o[..self.n_outputs()].copy_from_slice(&theta[..self.n_outputs()]);
                o
            }
            Predictor::Linear => {
                let d = self.input_dim;
                let mut o = [0.0; 2];
                for (k, ok) in o.iter_mut().enumerate().take(self.n_outputs()) {
                    let w = &theta[k * (d + 1)..(k + 1) * (d + 1)];
                    *ok = w[d] + w[..d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
                o
            }
            Predictor::Mlp { activation, .. } => {
                s.acts[0].copy_from_slice(x);
                let last = self.layers.len() - 1;
                for (l, layer) in self.layers.iter().enumerate() {
                    let (head, tail) = s.acts.split_at_mut(l + 1);
                    let input = &head[l];
                    let pre = &mut s.pre[l];
                    let b = layer.bias_offset();
                    for j in 0..layer.fan_out {
                        let row = &theta[layer.offset + j * layer.fan_in..][..layer.fan_in];
                        pre[j] = theta[b + j] + row.iter().zip(input).map(|(a, c)| a * c).sum::<f64>();
                    }
                    let out = &mut tail[0];
                    if l < last {
                        for (a, &z) in out.iter_mut().zip(pre.iter()) {
                            *a = activation.apply(z);
                        }
                    } else {
                        out.copy_from_slice(pre);
                    }
                }
                let out = &s.acts[self.layers.len()];
                let mut o = [0.0; 2];
                o[..out.len()].copy_from_slice(out);
                o
            }
        }
    }

    /// Adds `scale · seedᵀ ∂o/∂θ` into `grad`. For the mlp this requires the
    /// scratch state left by [`Self::outputs`] at the same `(θ, x)`.
    pub(crate) fn pullback(&self, theta: &[f64], x: &[f64], s: &mut Scratch, seed: Out, scale: f64, grad: &mut [f64]) {
        match &self.predictor {
            Predictor::ConstantMean => {
                for k in 0..self.n_outputs() {
                    grad[k] += scale * seed[k];
                }
            }
            Predictor::Linear => {
                let d = self.input_dim;
                for k in 0..self.n_outputs() {
                    let c = scale * seed[k];
                    let g = &mut grad[k * (d + 1)..(k + 1) * (d + 1)];
                    for (gj, xj) in g[..d].iter_mut().zip(x) {
                        *gj += c * xj;
                    }
                    g[d] += c;
                }
            }
            Predictor::Mlp { activation, .. } => {
                let n_out = self.n_outputs();
                for k in 0..n_out {
                    s.delta[k] = scale * seed[k];
                }
                for l in (0..self.layers.len()).rev() {
                    let layer = &self.layers[l];
                    let input = &s.acts[l];
                    let b = layer.bias_offset();
                    for j in 0..layer.fan_out {
                        let dj = s.delta[j];
                        if dj == 0.0 {
                            continue;
                        }
                        let row = &mut grad[layer.offset + j * layer.fan_in..][..layer.fan_in];
                        for (g, a) in row.iter_mut().zip(input) {
                            *g += dj * a;
                        }
                        grad[b + j] += dj;
                    }
                    if l > 0 {
                        let pre = &s.pre[l - 1];
                        for i in 0..layer.fan_in {
                            let mut acc = 0.0;
                            for j in 0..layer.fan_out {
                                acc += theta[layer.offset + j * layer.fan_in + i] * s.delta[j];
                            }
                            s.delta_prev[i] = acc * activation.derivative(pre[i]);
                        }
                        std::mem::swap(&mut s.delta, &mut s.delta_prev);
                    }
                }
            }
        }
    }

    // ---- per-sample quantities (unchecked) -------------------------------

    pub(crate) fn log_density_unchecked(&self, theta: &[f64], x: &[f64], y: f64, s: &mut Scratch) -> f64 {
        let o = self.outputs(theta, x, s);
        self.head.log_density(o, y)
    }

    /// Log-density at several targets sharing one input.
    pub(crate) fn log_density_many(&self, theta: &[f64], x: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut s = self.new_scratch();
        let o = self.outputs(theta, x, &mut s);
        ys.iter().map(|&y| self.head.log_density(o, y)).collect()
    }

    /// Adds `scale · ∇_θ log p(y|x,θ)` into `grad` and returns the log-density.
    pub(crate) fn add_sample_gradient(
        &self,
        theta: &[f64],
        x: &[f64],
        y: f64,
        scale: f64,
        s: &mut Scratch,
        grad: &mut [f64],
    ) -> f64 {
        let o = self.outputs(theta, x, s);
        let g = self.head.gradient(o, y);
        self.pullback(theta, x, s, g, scale, grad);
        self.head.log_density(o, y)
    }

    /// `Σᵢ log p(yᵢ|xᵢ,θ)`, accumulating `∇` into `grad` when given.
    pub(crate) fn log_likelihood_grad(&self, data: &Dataset, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let mut s = self.new_scratch();
        let mut total = 0.0;
        for obs in data.iter() {
            total += match grad.as_deref_mut() {
                Some(g) => self.add_sample_gradient(theta, obs.x, obs.y, 1.0, &mut s, g),
                None => self.log_density_unchecked(theta, obs.x, obs.y, &mut s),
            };
        }
        total
    }

    /// Output Jacobian `∂o/∂θ` as a `n_out × q` matrix, plus the outputs.
    pub(crate) fn output_jacobian_unchecked(&self, theta: &[f64], x: &[f64], s: &mut Scratch) -> (Out, DMatrix<f64>) {
        let n_out = self.n_outputs();
        let mut jac = DMatrix::zeros(n_out, self.dim);
        let o = self.outputs(theta, x, s);
        let mut row = vec![0.0; self.dim];
        for k in 0..n_out {
            row.iter_mut().for_each(|v| *v = 0.0);
            let mut seed = [0.0; 2];
            seed[k] = 1.0;
            // The mlp backward pass only reads activations, so it can be repeated.
            self.pullback(theta, x, s, seed, 1.0, &mut row);
            for (j, v) in row.iter().enumerate() {
                jac[(k, j)] = *v;
            }
        }
        (o, jac)
    }

    /// Output-space curvature `−∂²_o log p` at the sample.
    pub(crate) fn output_curvature(&self, o: Out, y: f64, kind: OutputCurvature) -> Out2 {
        self.head.curvature(o, y, kind)
    }

    /// Negative Hessian `−∇²_θ log p(y|x,θ)` of one sample. Exact for affine
    /// predictors, central differences of the gradient for the mlp.
    pub(crate) fn sample_neg_hessian(&self, theta: &[f64], x: &[f64], y: f64, s: &mut Scratch) -> DMatrix<f64> {
        if self.is_affine() {
            let (o, jac) = self.output_jacobian_unchecked(theta, x, s);
            let c = self.output_curvature(o, y, OutputCurvature::Observed);
            return sandwich(&jac, &c, self.n_outputs());
        }
        let q = self.dim;
        let mut h = DMatrix::zeros(q, q);
        let mut tp = theta.to_vec();
        let mut gp = vec![0.0; q];
        let mut gm = vec![0.0; q];
        for j in 0..q {
            let step = fd_step(theta[j]);
            tp[j] = theta[j] + step;
            gp.iter_mut().for_each(|v| *v = 0.0);
            self.add_sample_gradient(&tp, x, y, 1.0, s, &mut gp);
            tp[j] = theta[j] - step;
            gm.iter_mut().for_each(|v| *v = 0.0);
            self.add_sample_gradient(&tp, x, y, 1.0, s, &mut gm);
            tp[j] = theta[j];
            for i in 0..q {
                h[(i, j)] = -(gp[i] - gm[i]) / (2.0 * step);
            }
        }
        symmetrize(&mut h);
        h
    }

    // ---- public checked API ---------------------------------------------

    /// `log p(y|x,θ)` for one observation.
    pub fn log_density(&self, theta: &[f64], x: &[f64], y: f64) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_x(x)?;
        self.check_target(y)?;
        let v = self.log_density_unchecked(theta, x, y, &mut self.new_scratch());
        if self.head == Head::PoissonIdentity && theta[0] <= 0.0 && v == f64::NEG_INFINITY {
            return Err(Error::Domain(format!(
                "Poisson rate must be positive, got {}",
                theta[0]
            )));
        }
        Ok(v)
    }

    pub fn log_likelihood(&self, data: &Dataset, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        self.check_data(data)?;
        if self.head == Head::PoissonIdentity && theta[0] <= 0.0 {
            return Err(Error::Domain(format!(
                "Poisson rate must be positive, got {}",
                theta[0]
            )));
        }
        Ok(self.log_likelihood_grad(data, theta, None))
    }

    pub fn predict(&self, theta: &[f64], x: &[f64]) -> Result<Prediction> {
        self.check_theta(theta)?;
        self.check_x(x)?;
        let o = self.outputs(theta, x, &mut self.new_scratch());
        Ok(match self.head {
            Head::GaussFixed(v) => Prediction {
                mean: o[0],
                variance: Some(v),
            },
            Head::Hetero => Prediction {
                mean: o[0],
                variance: Some(o[1].exp()),
            },
            Head::PoissonIdentity => Prediction {
                mean: o[0],
                variance: Some(o[0]),
            },
            Head::PoissonLog => {
                let lam = o[0].exp();
                Prediction {
                    mean: lam,
                    variance: Some(lam),
                }
            }
        })
    }

    /// The pseudo target `ŷ`: the mean head, rounded to the nearest
    /// non-negative integer for count data.
    pub fn self_prediction(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        let p = self.predict(theta, x)?;
        Ok(if self.is_discrete() {
            p.mean.round().max(0.0)
        } else {
            p.mean
        })
    }

    pub fn per_sample_gradient(&self, theta: &[f64], obs: ObservationRef<'_>) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_x(obs.x)?;
        self.check_target(obs.y)?;
        let mut g = vec![0.0; self.dim];
        self.add_sample_gradient(theta, obs.x, obs.y, 1.0, &mut self.new_scratch(), &mut g);
        Ok(g)
    }

    /// `∂f_θ(x)/∂θ` as an `n_outputs × q` matrix.
    pub fn output_jacobian(&self, theta: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        self.check_x(x)?;
        Ok(self.output_jacobian_unchecked(theta, x, &mut self.new_scratch()).1)
    }

    /// A starting point for optimization: zeros for affine predictors (rate 1
    /// for the identity-link Poisson), Glorot-normal weights and zero biases
    /// for the mlp.
    pub fn initial_parameters(&self, seed: u64) -> Vec<f64> {
        let mut theta = vec![0.0; self.dim];
        if self.head == Head::PoissonIdentity {
            theta[0] = 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &self.layers {
            let sd = (2.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            let normal = Normal::new(0.0, sd).expect("positive sd");
            for w in &mut theta[layer.offset..layer.bias_offset()] {
                *w = normal.sample(&mut rng);
            }
        }
        theta
    }
}

/// `Jᵀ C J` for an `n_out × q` Jacobian and an output-space curvature.
pub(crate) fn sandwich(jac: &DMatrix<f64>, c: &Out2, n_out: usize) -> DMatrix<f64> {
    let q = jac.ncols();
    let mut h = DMatrix::zeros(q, q);
    for a in 0..n_out {
        for b in 0..n_out {
            let cab = c[a][b];
            if cab == 0.0 {
                continue;
            }
            let ra = jac.row(a);
            let rb = jac.row(b);
            h.ger(cab, &ra.transpose(), &rb.transpose(), 1.0);
        }
    }
    h
}

pub(crate) fn symmetrize(h: &mut DMatrix<f64>) {
    let q = h.nrows();
    for i in 0..q {
        for j in 0..i {
            let m = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = m;
            h[(j, i)] = m;
        }
    }
}

/// Central-difference step scaled to the coordinate.
pub(crate) fn fd_step(t: f64) -> f64 {
    1e-5 * t.abs().max(1.0)
}

/// `Σᵢ log p(yᵢ|xᵢ,θ)`.
pub fn log_likelihood(model: &LikelihoodModel, data: &Dataset, theta: &[f64]) -> Result<f64> {
    model.log_likelihood(data, theta)
}

/// Point prediction `f_θ(x)`.
pub fn predict(model: &LikelihoodModel, theta: &[f64], x: &[f64]) -> Result<Prediction> {
    model.predict(theta, x)
}

/// `∇_θ log p(y|x,θ)` for one observation.
pub fn per_sample_gradient(model: &LikelihoodModel, theta: &[f64], obs: ObservationRef<'_>) -> Result<Vec<f64>> {
    model.per_sample_gradient(theta, obs)
}

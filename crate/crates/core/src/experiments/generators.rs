//! Synthetic data for the validation studies.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::seeds::{SeedSplitter, Stream};

/// Conjugate normal setting: `y ~ N(4, 2)`, prior `N(4, 1)` on the mean.
pub const NORMAL_TRUE_MEAN: f64 = 4.0;
pub const NORMAL_VARIANCE: f64 = 2.0;
pub const NORMAL_PRIOR_MEAN: f64 = 4.0;
pub const NORMAL_PRIOR_VARIANCE: f64 = 1.0;
/// Conjugate Poisson setting: `y ~ Poisson(3)`, prior `Gamma(6, 2)`.
pub const POISSON_TRUE_RATE: f64 = 3.0;
pub const POISSON_PRIOR_SHAPE: f64 = 6.0;
pub const POISSON_PRIOR_RATE: f64 = 2.0;

const MIXTURE_CENTERS: [f64; 3] = [-4.0, 0.0, 4.0];
const MIXTURE_SDS: [f64; 3] = [0.4, 0.9, 0.4];

fn require_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("sample size must be at least 1"));
    }
    Ok(())
}

pub fn hetero_mean(x: f64) -> f64 {
    7.0 * x.sin()
}

pub fn hetero_noise_sd(x: f64) -> f64 {
    3.0 * (x / 2.0).cos().abs()
}

/// `y = 7 sin x + 3|cos(x/2)|·ε`, `x` from an equal-weight three-component
/// Gaussian mixture. Raw (unstandardized) units.
pub fn gen_hetero_toy(n: usize, seed: u64) -> Result<Dataset> {
    require_n(n)?;
    let mut rng = SeedSplitter::new(seed).rng(Stream::Data, 0);
    let eps = Normal::new(0.0, 1.0).expect("unit normal");
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..3);
        let x = MIXTURE_CENTERS[k] + MIXTURE_SDS[k] * eps.sample(&mut rng);
        xs.push(x);
        ys.push(hetero_mean(x) + hetero_noise_sd(x) * eps.sample(&mut rng));
    }
    Dataset::from_flat(1, xs, ys)
}

/// `n` draws of `N(4, 2)` with no inputs.
pub fn gen_normal_conjugate(n: usize, seed: u64) -> Result<Dataset> {
    require_n(n)?;
    let mut rng = SeedSplitter::new(seed).rng(Stream::Data, 0);
    let d = Normal::new(NORMAL_TRUE_MEAN, NORMAL_VARIANCE.sqrt()).expect("valid normal");
    Dataset::from_targets((0..n).map(|_| d.sample(&mut rng)).collect())
}

/// `n` draws of `Poisson(3)` with no inputs.
pub fn gen_poisson_conjugate(n: usize, seed: u64) -> Result<Dataset> {
    require_n(n)?;
    let mut rng = SeedSplitter::new(seed).rng(Stream::Data, 0);
    let d = Poisson::new(POISSON_TRUE_RATE).expect("valid rate");
    Dataset::from_targets((0..n).map(|_| d.sample(&mut rng)).collect())
}

/// One-dimensional regression `y = 0.5 + 1.2x + noise_sd·ε`, `x ~ U(−2, 2)`.
pub fn gen_linear_1d(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    require_n(n)?;
    if !(noise_sd > 0.0) {
        return Err(Error::config("noise_sd must be positive"));
    }
    let mut rng = SeedSplitter::new(seed).rng(Stream::Data, 0);
    let ux = Uniform::new(-2.0, 2.0).expect("valid range");
    let eps = Normal::new(0.0, noise_sd).expect("valid normal");
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x = ux.sample(&mut rng);
        xs.push(x);
        ys.push(0.5 + 1.2 * x + eps.sample(&mut rng));
    }
    Dataset::from_flat(1, xs, ys)
}

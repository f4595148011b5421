//! Experiment configuration as flat dotted `key = value` entries.

use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureKind;
use crate::error::{Error, Result};
use crate::model::Activation;
use crate::predictive::Engine;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ConjugateNormal,
    ConjugatePoisson,
    HeteroToy,
    CsvRegression,
    Cancellation,
    PriorModularity,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ConjugateNormal => "conjugate-normal",
            ExperimentKind::ConjugatePoisson => "conjugate-poisson",
            ExperimentKind::HeteroToy => "hetero-toy",
            ExperimentKind::CsvRegression => "csv-regression",
            ExperimentKind::Cancellation => "cancellation",
            ExperimentKind::PriorModularity => "prior-modularity",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "conjugate-normal" => ExperimentKind::ConjugateNormal,
            "conjugate-poisson" => ExperimentKind::ConjugatePoisson,
            "hetero-toy" => ExperimentKind::HeteroToy,
            "csv-regression" => ExperimentKind::CsvRegression,
            "cancellation" => ExperimentKind::Cancellation,
            "prior-modularity" => ExperimentKind::PriorModularity,
            other => return Err(Error::config(format!("unknown experiment '{other}'"))),
        })
    }
}

/// Arithmetic used by the naive aggregate-subtraction path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Single,
    Double,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::config(format!("unknown precision '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSettings {
    pub count: usize,
    /// Half-width in plug-in standard deviations.
    pub span: f64,
    /// Upper end of the `0..=lattice_max` support for count models.
    pub lattice_max: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroSettings {
    pub n_train: usize,
    pub n_test: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub prior_variance: f64,
    pub ssla_grid_count: usize,
    pub fit_iterations: usize,
    pub fit_tolerance: f64,
    pub refit_iterations: usize,
    pub refit_tolerance: f64,
    /// Fraction of SSLA refits per test point allowed to stop unconverged.
    pub max_refit_failures: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSettings {
    pub path: String,
    pub target: String,
    pub categorical: Vec<String>,
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularitySettings {
    pub n: usize,
    pub noise_sd: f64,
    pub x_test: f64,
    pub prior_variances: Vec<f64>,
    pub offset: f64,
}

/// Everything an experiment run depends on. Two runs with equal configs
/// produce byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub engines: Vec<Engine>,
    pub curvature: Vec<CurvatureKind>,
    pub grid: GridSettings,
    pub levels: Vec<f64>,
    pub n: Vec<usize>,
    pub seed: u64,
    pub replicates: usize,
    pub precision: Precision,
    pub mc_samples: usize,
    /// Test input for one-shot `ppd` evaluations.
    pub x_test: Vec<f64>,
    pub hetero: HeteroSettings,
    pub csv: CsvSettings,
    pub modularity: ModularitySettings,
}

impl ExperimentConfig {
    /// Defaults for an experiment kind.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            engines: Engine::ALL.to_vec(),
            curvature: vec![CurvatureKind::Dense],
            grid: GridSettings {
                count: 201,
                span: 6.0,
                lattice_max: 50,
            },
            levels: vec![0.95, 0.9, 0.75, 0.5],
            n: vec![20, 100, 1_000, 10_000, 100_000],
            seed: 0,
            replicates: 1,
            precision: Precision::Double,
            mc_samples: 1000,
            x_test: Vec::new(),
            hetero: HeteroSettings {
                n_train: 200,
                n_test: 25,
                hidden: vec![16, 16],
                activation: Activation::Tanh,
                prior_variance: 1.0,
                ssla_grid_count: 81,
                fit_iterations: 20_000,
                fit_tolerance: 1e-6,
                refit_iterations: 100,
                refit_tolerance: 1e-3,
                max_refit_failures: 1.0,
            },
            csv: CsvSettings {
                path: String::new(),
                target: "y".into(),
                categorical: Vec::new(),
                test_fraction: 0.1,
            },
            modularity: ModularitySettings {
                n: 50,
                noise_sd: 0.5,
                x_test: 1.5,
                prior_variances: vec![0.01, 0.1, 1.0, 10.0, 1e6],
                offset: 1.0,
            },
        };
        match kind {
            ExperimentKind::ConjugateNormal | ExperimentKind::ConjugatePoisson => {}
            ExperimentKind::Cancellation => {
                cfg.engines = vec![Engine::Assla];
                cfg.n = vec![
                    1_000, 10_000, 100_000, 200_000, 300_000, 500_000, 700_000, 900_000, 1_000_000,
                ];
                cfg.replicates = 6;
                cfg.precision = Precision::Single;
            }
            ExperimentKind::PriorModularity => {
                cfg.engines = vec![Engine::Ssla, Engine::Assla];
                cfg.n = vec![50];
            }
            ExperimentKind::HeteroToy => {
                cfg.curvature = vec![CurvatureKind::Blocked, CurvatureKind::Diag, CurvatureKind::Ggn];
                cfg.n = vec![200];
                cfg.x_test = vec![0.0];
            }
            ExperimentKind::CsvRegression => {
                cfg.engines = vec![Engine::Assla, Engine::LaMc];
                cfg.curvature = vec![CurvatureKind::Ggn];
                cfg.n = vec![0];
            }
        }
        cfg
    }

    /// Applies one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let ctx = |e: Error| e.context(format!("key '{key}'"));
        match key {
            "experiment" => self.experiment = value.parse().map_err(ctx)?,
            "engines" => self.engines = parse_list(value).map_err(ctx)?,
            "curvature" => self.curvature = parse_list(value).map_err(ctx)?,
            "grid.count" => self.grid.count = parse(value).map_err(ctx)?,
            "grid.span" => self.grid.span = parse(value).map_err(ctx)?,
            "grid.lattice_max" => self.grid.lattice_max = parse(value).map_err(ctx)?,
            "levels" => self.levels = parse_list(value).map_err(ctx)?,
            "n" => {
                self.n = parse_list::<f64>(value)
                    .map_err(ctx)?
                    .into_iter()
                    .map(|v| v as usize)
                    .collect()
            }
            "seed" => self.seed = parse(value).map_err(ctx)?,
            "replicates" => self.replicates = parse(value).map_err(ctx)?,
            "precision" => self.precision = value.parse().map_err(ctx)?,
            "mc.samples" => self.mc_samples = parse(value).map_err(ctx)?,
            "x_test" => self.x_test = parse_list(value).map_err(ctx)?,
            "hetero.n_train" => self.hetero.n_train = parse(value).map_err(ctx)?,
            "hetero.n_test" => self.hetero.n_test = parse(value).map_err(ctx)?,
            "hetero.hidden" => self.hetero.hidden = parse_list(value).map_err(ctx)?,
            "hetero.activation" => {
                self.hetero.activation = match value {
                    "tanh" => Activation::Tanh,
                    "relu" => Activation::Relu,
                    other => return Err(Error::config(format!("unknown activation '{other}'"))),
                }
            }
            "hetero.prior_variance" => self.hetero.prior_variance = parse(value).map_err(ctx)?,
            "hetero.ssla_grid_count" => self.hetero.ssla_grid_count = parse(value).map_err(ctx)?,
            "hetero.fit_iterations" => self.hetero.fit_iterations = parse(value).map_err(ctx)?,
            "hetero.fit_tolerance" => self.hetero.fit_tolerance = parse(value).map_err(ctx)?,
            "hetero.refit_iterations" => self.hetero.refit_iterations = parse(value).map_err(ctx)?,
            "hetero.refit_tolerance" => self.hetero.refit_tolerance = parse(value).map_err(ctx)?,
            "hetero.max_refit_failures" => self.hetero.max_refit_failures = parse(value).map_err(ctx)?,
            "csv.path" => self.csv.path = value.to_string(),
            "csv.target" => self.csv.target = value.to_string(),
            "csv.categorical" => {
                self.csv.categorical = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "csv.test_fraction" => self.csv.test_fraction = parse(value).map_err(ctx)?,
            "modularity.n" => self.modularity.n = parse(value).map_err(ctx)?,
            "modularity.noise_sd" => self.modularity.noise_sd = parse(value).map_err(ctx)?,
            "modularity.x_test" => self.modularity.x_test = parse(value).map_err(ctx)?,
            "modularity.prior_variances" => self.modularity.prior_variances = parse_list(value).map_err(ctx)?,
            "modularity.offset" => self.modularity.offset = parse(value).map_err(ctx)?,
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let h = &self.hetero;
        let m = &self.modularity;
        vec![
            ("experiment", self.experiment.as_str().to_string()),
            ("engines", join(self.engines.iter().map(|e| e.as_str()))),
            ("curvature", join(self.curvature.iter().map(|k| k.as_str()))),
            ("grid.count", self.grid.count.to_string()),
            ("grid.span", self.grid.span.to_string()),
            ("grid.lattice_max", self.grid.lattice_max.to_string()),
            ("levels", join(&self.levels)),
            ("n", join(&self.n)),
            ("seed", self.seed.to_string()),
            ("replicates", self.replicates.to_string()),
            ("precision", self.precision.as_str().to_string()),
            ("mc.samples", self.mc_samples.to_string()),
            ("x_test", join(&self.x_test)),
            ("hetero.n_train", h.n_train.to_string()),
            ("hetero.n_test", h.n_test.to_string()),
            ("hetero.hidden", join(&h.hidden)),
            (
                "hetero.activation",
                match h.activation {
                    Activation::Tanh => "tanh",
                    Activation::Relu => "relu",
                }
                .to_string(),
            ),
            ("hetero.prior_variance", h.prior_variance.to_string()),
            ("hetero.ssla_grid_count", h.ssla_grid_count.to_string()),
            ("hetero.fit_iterations", h.fit_iterations.to_string()),
            ("hetero.fit_tolerance", h.fit_tolerance.to_string()),
            ("hetero.refit_iterations", h.refit_iterations.to_string()),
            ("hetero.refit_tolerance", h.refit_tolerance.to_string()),
            ("hetero.max_refit_failures", h.max_refit_failures.to_string()),
            ("csv.path", self.csv.path.clone()),
            ("csv.target", self.csv.target.clone()),
            ("csv.categorical", self.csv.categorical.join(",")),
            ("csv.test_fraction", self.csv.test_fraction.to_string()),
            ("modularity.n", m.n.to_string()),
            ("modularity.noise_sd", m.noise_sd.to_string()),
            ("modularity.x_test", m.x_test.to_string()),
            ("modularity.prior_variances", join(&m.prior_variances)),
            ("modularity.offset", m.offset.to_string()),
        ]
    }

    /// The resolved configuration as `key = value` lines.
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::config("levels must lie in (0, 1)"));
        }
        let needs_n = !matches!(
            self.experiment,
            ExperimentKind::CsvRegression | ExperimentKind::HeteroToy
        );
        if needs_n && (self.n.is_empty() || self.n.contains(&0)) {
            return Err(Error::config("n must be a non-empty list of sizes >= 1"));
        }
        if self.engines.is_empty() {
            return Err(Error::config("at least one engine is required"));
        }
        if self.curvature.is_empty() {
            return Err(Error::config("at least one curvature kind is required"));
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates must be >= 1"));
        }
        if self.grid.count < 3 || self.grid.count % 2 == 0 {
            return Err(Error::config("grid.count must be odd and >= 3"));
        }
        if self.hetero.ssla_grid_count < 3 || self.hetero.ssla_grid_count % 2 == 0 {
            return Err(Error::config("hetero.ssla_grid_count must be odd and >= 3"));
        }
        if !(self.grid.span > 0.0) {
            return Err(Error::config("grid.span must be positive"));
        }
        if self.mc_samples < 100 {
            return Err(Error::config("mc.samples must be >= 100"));
        }
        if self.hetero.n_train == 0 || self.hetero.n_test == 0 {
            return Err(Error::config("hetero sizes must be >= 1"));
        }
        if self.experiment == ExperimentKind::CsvRegression && self.csv.path.is_empty() {
            return Err(Error::config("csv.path is required for csv-regression"));
        }
        Ok(())
    }
}

fn parse<T: FromStr>(value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(format!("cannot parse '{value}': {e}")))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

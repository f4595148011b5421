//! Posterior predictive distributions by self-supervised Laplace
//! approximations.

pub mod curvature;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod metrics;
pub mod model;
pub mod oracles;
pub mod predictive;
pub mod prior;

pub use curvature::{curvature, CurvatureKind, CurvatureMatrix, CurvatureOptions};
pub use data::{Dataset, Observation, ObservationRef, ParameterVector, PseudoObservation};
pub use error::{Error, Result};
pub use fit::{fit_map, refit_augmented, Direction, FitConfig, FitResult, StepRule};
pub use metrics::CalibrationReport;
pub use model::{Activation, Family, LikelihoodModel, Prediction, Predictor};
pub use predictive::{
    assla_log_ppd, credible_interval, laplace_mc_ppd, normalize_grid, ssla_log_ppd, ssla_log_ppd_multi,
    CredibleInterval, Engine, EngineOptions, GridCenter, GridConfig, PredictiveGrid,
};
pub use prior::{Prior, PriorKind};

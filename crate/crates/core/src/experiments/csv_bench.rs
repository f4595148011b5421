//! Calibration benchmark on a local CSV file.

use super::config::ExperimentConfig;
use super::hetero::{evaluate_setup, train_heteroscedastic, HeteroRun};
use super::ingest::{load_csv_dataset, IngestConfig, IngestedData};
use crate::error::{Error, Result};

pub fn ingest_for(cfg: &ExperimentConfig) -> Result<IngestedData> {
    let ingest = IngestConfig {
        categorical: cfg.csv.categorical.clone(),
        test_fraction: cfg.csv.test_fraction,
        seed: cfg.seed,
    };
    let data = load_csv_dataset(&cfg.csv.path, &cfg.csv.target, &ingest)?;
    if data.test.is_empty() {
        return Err(Error::config("csv.test_fraction leaves no test rows"));
    }
    if data.train.input_dim() == 0 {
        return Err(Error::config("no usable feature columns after encoding"));
    }
    Ok(data)
}

/// Trains the heteroscedastic mlp on the training split and evaluates every
/// engine on the held-out rows (standardized target scale).
pub fn run_csv_benchmark(cfg: &ExperimentConfig) -> Result<(IngestedData, HeteroRun)> {
    cfg.validate()?;
    let data = ingest_for(cfg)?;
    let setup = train_heteroscedastic(cfg, data.train.clone(), data.test.clone(), data.target.clone(), 0)?;
    let run = evaluate_setup(cfg, &setup, 0)?;
    Ok((data, run))
}

//! Data generators, ingestion, experiment orchestration and report files.

pub mod asymptotics;
pub mod config;
pub mod conjugate;
pub mod csv_bench;
pub mod generators;
pub mod hetero;
pub mod ingest;
pub mod modularity;
pub mod precision;
pub mod report;
pub mod run;
pub mod seeds;

pub use config::{ExperimentConfig, ExperimentKind, Precision};
pub use conjugate::{run_conjugate_validation, ConjugateRow};
pub use csv_bench::run_csv_benchmark;
pub use generators::{gen_hetero_toy, gen_normal_conjugate, gen_poisson_conjugate};
pub use hetero::{run_hetero_benchmark, HeteroRun};
pub use ingest::{load_csv_dataset, ColumnStats, IngestConfig, IngestedData};
pub use modularity::{run_prior_modularity, ModularityRow};
pub use precision::{run_cancellation_study, PrecisionStudyRow};
pub use run::{run_experiment, run_fit, run_ppd, RunSummary};
pub use seeds::SeedSplitter;

//! Fixtures shared by the criterion benches in `benches/`.

use ppd_laplace::experiments::conjugate::{fit_setting, ConjugateSetting};
use ppd_laplace::experiments::hetero::{prepare_hetero, HeteroSetup};
use ppd_laplace::experiments::{ExperimentConfig, ExperimentKind};
use ppd_laplace::{Dataset, FitResult};

/// Conjugate normal data of size `n` with its MAP fit.
pub fn conjugate_fixture(n: usize) -> (ConjugateSetting, Dataset, FitResult) {
    let setting = ConjugateSetting::new(ExperimentKind::ConjugateNormal).expect("valid setting");
    let data = setting.generate(n, 1).expect("data");
    let fit = fit_setting(&setting, &data).expect("fit");
    (setting, data, fit)
}

/// The trained 2x16 heteroscedastic mlp with its default test set.
pub fn hetero_fixture() -> (ExperimentConfig, HeteroSetup) {
    let cfg = ExperimentConfig::for_kind(ExperimentKind::HeteroToy);
    let setup = prepare_hetero(&cfg, 0).expect("training");
    (cfg, setup)
}

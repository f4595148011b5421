use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use ppd_laplace::experiments::conjugate::{fit_setting, ConjugateSetting};
use ppd_laplace::experiments::seeds::{SeedSplitter, Stream};
use ppd_laplace::experiments::{ColumnStats, ExperimentKind};
use ppd_laplace::metrics::{crps, kl_grid, total_variation};
use ppd_laplace::oracles::NormalNormalSpec;
use ppd_laplace::predictive::equispaced;
use ppd_laplace::{
    credible_interval, normalize_grid, ssla_log_ppd, CurvatureMatrix, Dataset, EngineOptions, GridConfig,
    LikelihoodModel, PredictiveGrid,
};

fn spd(entries: &[f64], q: usize) -> DMatrix<f64> {
    let b = DMatrix::from_column_slice(q, q, &entries[..q * q]);
    &b * b.transpose() + DMatrix::identity(q, q) * 0.05
}

fn grid_from(logd: Vec<f64>) -> PredictiveGrid {
    let ys = equispaced(-5.0, 5.0, logd.len());
    normalize_grid(&PredictiveGrid::new(ys, logd).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn rank_one_increment_matches_refactorization(
        q in 1usize..8,
        entries in prop::collection::vec(-2.0f64..2.0, 64),
        g in prop::collection::vec(-3.0f64..3.0, 8),
        s in 0.01f64..5.0,
    ) {
        let a = spd(&entries, q);
        let g = DVector::from_column_slice(&g[..q]);
        let before = CurvatureMatrix::from_dense(a.clone()).unwrap();
        let after = CurvatureMatrix::from_dense(&a + &g * g.transpose() * s).unwrap();
        let inc = before.rank_one_logdet_increment(g.as_slice(), s).unwrap();
        prop_assert!((inc - (after.log_det() - before.log_det())).abs() < 1e-8);
    }

    #[test]
    fn rank_one_increment_is_nonnegative_and_monotone_in_scale(
        q in 1usize..8,
        entries in prop::collection::vec(-2.0f64..2.0, 64),
        g in prop::collection::vec(-3.0f64..3.0, 8),
        s in 0.01f64..5.0,
    ) {
        let j = CurvatureMatrix::from_dense(spd(&entries, q)).unwrap();
        let small = j.rank_one_logdet_increment(&g[..q], s).unwrap();
        let large = j.rank_one_logdet_increment(&g[..q], 2.0 * s).unwrap();
        prop_assert!(small >= 0.0);
        prop_assert!(large >= small);
    }

    #[test]
    fn log_likelihood_is_additive_over_disjoint_data(
        ys in prop::collection::vec(-5.0f64..5.0, 2..40),
        split in 1usize..39,
        mu in -3.0f64..3.0,
    ) {
        let split = split.min(ys.len() - 1);
        let model = LikelihoodModel::gaussian_mean(2.0).unwrap();
        let all = Dataset::from_targets(ys.clone()).unwrap();
        let a = Dataset::from_targets(ys[..split].to_vec()).unwrap();
        let b = Dataset::from_targets(ys[split..].to_vec()).unwrap();
        let whole = model.log_likelihood(&all, &[mu]).unwrap();
        let parts = model.log_likelihood(&a, &[mu]).unwrap() + model.log_likelihood(&b, &[mu]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn normalization_has_unit_mass_and_ignores_constant_shifts(
        logd in prop::collection::vec(-20.0f64..5.0, 5..60),
        shift in -500.0f64..500.0,
    ) {
        let g = grid_from(logd.clone());
        prop_assert!((g.mass() - 1.0).abs() < 1e-10);
        let shifted = grid_from(logd.iter().map(|l| l + shift).collect());
        for (a, b) in g.log_density().iter().zip(shifted.log_density()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn credible_intervals_are_nested(
        logd in prop::collection::vec(-10.0f64..2.0, 5..60),
        lo in 0.05f64..0.9,
        gap in 0.01f64..0.09,
    ) {
        let g = grid_from(logd);
        let inner = credible_interval(&g, lo).unwrap();
        let outer = credible_interval(&g, lo + gap).unwrap();
        prop_assert!(inner.lower <= inner.upper);
        prop_assert!(outer.lower <= inner.lower + 1e-12);
        prop_assert!(outer.upper >= inner.upper - 1e-12);
    }

    #[test]
    fn divergences_are_bounded(
        p in prop::collection::vec(-8.0f64..2.0, 21),
        q in prop::collection::vec(-8.0f64..2.0, 21),
        y in -6.0f64..6.0,
    ) {
        let (p, q) = (grid_from(p), grid_from(q));
        prop_assert!(kl_grid(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_grid(&p, &p).unwrap().abs() < 1e-12);
        let tv = total_variation(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv));
        prop_assert!(crps(&p, y).unwrap() >= 0.0);
    }

    #[test]
    fn standardization_round_trips(
        values in prop::collection::vec(-1e3f64..1e3, 2..50),
        v in -1e4f64..1e4,
    ) {
        let stats = ColumnStats::from_values("c", &values);
        prop_assume!(stats.sd > 0.0);
        let back = stats.de_standardize(stats.standardize(v));
        prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0));
    }

    #[test]
    fn seed_streams_are_reproducible_and_distinct(root in any::<u64>(), index in 0u64..1_000_000) {
        let s = SeedSplitter::new(root);
        prop_assert_eq!(s.derive(Stream::Data, index), SeedSplitter::new(root).derive(Stream::Data, index));
        prop_assert_ne!(s.derive(Stream::Data, index), s.derive(Stream::MonteCarlo, index));
        prop_assert_ne!(s.derive(Stream::Data, index), s.derive(Stream::Data, index + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn map_matches_conjugate_posterior_mean(n in 1usize..300, seed in any::<u64>()) {
        let setting = ConjugateSetting::new(ExperimentKind::ConjugateNormal).unwrap();
        let data = setting.generate(n, seed).unwrap();
        let fit = fit_setting(&setting, &data).unwrap();
        let (mean, _) = NormalNormalSpec::reference().posterior(data.targets());
        prop_assert!((fit.theta_star.values()[0] - mean).abs() < 1e-6);
    }

    #[test]
    fn ssla_is_exact_on_the_conjugate_normal_model(n in 1usize..200, seed in any::<u64>()) {
        let setting = ConjugateSetting::new(ExperimentKind::ConjugateNormal).unwrap();
        let (model, prior) = (&setting.model, &setting.prior);
        let data = setting.generate(n, seed).unwrap();
        let fit = fit_setting(&setting, &data).unwrap();
        let options = EngineOptions::default();
        let grid = normalize_grid(
            &ssla_log_ppd(model, prior, &data, &fit, &[], &GridConfig::default().with_count(41), &options).unwrap(),
        )
        .unwrap();
        let analytic = setting.analytic(&data, &grid).unwrap();
        for (a, b) in grid.log_density().iter().zip(analytic.log_density()) {
            prop_assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

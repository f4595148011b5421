//! End-to-end acceptance checks. Each check prints one `PASS`/`FAIL` line;
//! the process exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as NormalSampler};
use sha2::{Digest, Sha256};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use ppd_laplace::curvature::{curvature_dense, curvature_ggn};
use ppd_laplace::experiments::asymptotics::{refit_shift, ssla_assla_gap};
use ppd_laplace::experiments::hetero::{evaluate_setup, prepare_hetero, HeteroRun};
use ppd_laplace::experiments::precision::precision_sample;
use ppd_laplace::experiments::{
    run_cancellation_study, run_conjugate_validation, run_experiment, run_prior_modularity, ExperimentConfig,
    ExperimentKind, Precision,
};
use ppd_laplace::metrics::{crps, empirical_coverage, kl_grid};
use ppd_laplace::predictive::equispaced;
use ppd_laplace::{
    credible_interval, normalize_grid, CurvatureKind, CurvatureMatrix, Dataset, Engine, Family, GridConfig,
    LikelihoodModel, PredictiveGrid, Predictor, Prior,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within_factor(value: f64, reference: f64, factor: f64) -> bool {
    value >= reference / factor && value <= reference * factor
}

fn conjugate_normal() -> Outcome {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ConjugateNormal);
    cfg.engines = vec![Engine::Ssla, Engine::Assla];
    cfg.n = vec![20, 1_000, 100_000];
    cfg.precision = Precision::Double;
    let start = Instant::now();
    let run = match run_conjugate_validation(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(60);
    let mut parts = Vec::new();
    for row in &run.rows {
        let limit = if row.engine == Engine::Ssla { 1e-3 } else { 1e-2 };
        pass &= row.kl < limit;
        parts.push(format!("{} n={} KL={:.2e}", row.engine, row.n, row.kl));
    }
    pass &= run.rows.len() == 6;
    outcome(pass, format!("{}; {:.1}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn conjugate_poisson() -> Outcome {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::ConjugatePoisson);
    cfg.n = vec![100];
    let run = match run_conjugate_validation(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let support_ok = run.grids.iter().all(|g| {
        let y = g.grid.y_values();
        y.len() == 51 && y[0] == 0.0 && y[50] == 50.0
    });
    let mut pass = support_ok && run.rows.len() == 3;
    let mut parts = Vec::new();
    for row in &run.rows {
        pass &= row.total_variation < 0.02;
        parts.push(format!("{} TV={:.2e}", row.engine, row.total_variation));
    }
    outcome(pass, parts.join(", "))
}

fn precision_study() -> Outcome {
    let cfg = ExperimentConfig::for_kind(ExperimentKind::Cancellation);
    let rows = match run_cancellation_study(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let at = |n: usize| rows.iter().find(|r| r.n == n);
    let (Some(r5), Some(r6)) = (at(100_000), at(1_000_000)) else {
        return outcome(false, "study lacks n = 1e5 or n = 1e6");
    };
    let err_ok = within_factor(r5.max_abs_log_err_mean, 7.57e-3, 3.0);
    let kl_ok = within_factor(r6.kl_mean, 4.75e-4, 3.0);
    let zero_ok = rows.windows(2).all(|w| w[1].frac_delta_zero >= w[0].frac_delta_zero);

    let grid = GridConfig {
        count: cfg.grid.count,
        span: cfg.grid.span,
        ..GridConfig::default()
    };
    let mut worst_double = 0.0f64;
    for &n in &cfg.n {
        for r in 0..cfg.replicates {
            let seed = ppd_laplace::experiments::conjugate::data_seed(cfg.seed, n, r);
            match precision_sample(n, seed, &grid, Precision::Double) {
                Ok(s) => worst_double = worst_double.max(s.max_abs_log_err),
                Err(e) => return outcome(false, format!("double path error at n={n}: {e}")),
            }
        }
    }
    let double_ok = worst_double <= 1e-9;
    outcome(
        err_ok && kl_ok && zero_ok && double_ok,
        format!(
            "n=1e5 max|log err|={:.3e} (ref 7.57e-3), n=1e6 KL={:.3e} (ref 4.75e-4), double worst={:.1e}, frac_delta_zero non-decreasing={}",
            r5.max_abs_log_err_mean, r6.kl_mean, worst_double, zero_ok
        ),
    )
}

fn refit_scaling() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [50usize, 100, 200] {
        let mut total = 0.0;
        for seed in 0..20u64 {
            let ratio = refit_shift(2 * n, seed, 1.0).and_then(|a| refit_shift(n, seed, 1.0).map(|b| a / b));
            match ratio {
                Ok(r) => total += r,
                Err(e) => return outcome(false, format!("error at n={n}, seed {seed}: {e}")),
            }
        }
        let mean = total / 20.0;
        pass &= (0.3..=0.7).contains(&mean);
        parts.push(format!("n={n} ratio={mean:.4}"));
    }
    outcome(pass, parts.join(", "))
}

fn ssla_assla_convergence() -> Outcome {
    let grid = GridConfig::default();
    let mut decreasing = 0;
    for seed in 0..10u64 {
        let gaps: Result<Vec<f64>, _> = [20usize, 100, 1000]
            .iter()
            .map(|&n| ssla_assla_gap(n, seed, &grid))
            .collect();
        match gaps {
            Ok(g) if g[1] < g[0] && g[2] < g[1] => decreasing += 1,
            Ok(_) => {}
            Err(e) => return outcome(false, format!("error at seed {seed}: {e}")),
        }
    }
    outcome(decreasing >= 7, format!("{decreasing}/10 seeds with decreasing gap"))
}

fn random_spd(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(q, q, |_, _| rng.random_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(q, q) * 0.1
}

fn gauss_newton_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_ggn = 0.0f64;
    for _ in 0..10 {
        let input_dim = rng.random_range(1..=9usize);
        let variance = rng.random_range(0.2..3.0);
        let model = match LikelihoodModel::new(Family::GaussianFixed { variance }, Predictor::Linear, input_dim) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("error: {e}")),
        };
        let n = rng.random_range(5..40usize);
        let xs: Vec<f64> = (0..n * input_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = Dataset::from_flat(input_dim, xs, ys).expect("valid data");
        let prior = Prior::isotropic(rng.random_range(0.5..5.0), model.dim()).expect("valid prior");
        let theta: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (g, d) = match (
            curvature_ggn(&model, &prior, &data, &theta),
            curvature_dense(&model, &prior, &data, &theta),
        ) {
            (Ok(g), Ok(d)) => (g.to_dense(), d.to_dense()),
            _ => return outcome(false, "curvature failed"),
        };
        worst_ggn = worst_ggn.max((&g - &d).amax() / d.amax());
    }

    let mut worst_rank_one = 0.0f64;
    for _ in 0..50 {
        let q = rng.random_range(1..=12usize);
        let a = random_spd(&mut rng, q);
        let g = DVector::from_fn(q, |_, _| rng.random_range(-2.0..2.0));
        let s = rng.random_range(0.05..3.0);
        let (Ok(before), Ok(after)) = (
            CurvatureMatrix::from_dense(a.clone()),
            CurvatureMatrix::from_dense(&a + &g * g.transpose() * s),
        ) else {
            return outcome(false, "factorization failed");
        };
        let inc = match before.rank_one_logdet_increment(g.as_slice(), s) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("error: {e}")),
        };
        worst_rank_one = worst_rank_one.max((inc - (after.log_det() - before.log_det())).abs());
    }
    outcome(
        worst_ggn < 1e-10 && worst_rank_one < 1e-8,
        format!("GGN vs dense rel err {worst_ggn:.1e}; rank-one vs refactorization {worst_rank_one:.1e}"),
    )
}

fn prior_modularity() -> Outcome {
    let cfg = ExperimentConfig::for_kind(ExperimentKind::PriorModularity);
    let mut rows = match run_prior_modularity(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    rows.sort_by(|a, b| a.prior_variance.total_cmp(&b.prior_variance));
    let spread = |f: &dyn Fn(&ppd_laplace::experiments::ModularityRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let self_spread = spread(&|r| r.ssla_self);
    let ssla_off = spread(&|r| r.ssla_off);
    let assla_off = spread(&|r| r.assla_off);
    let diffs: Vec<f64> = rows.iter().map(|r| r.ssla_minus_noninfo).collect();
    let monotone = diffs.windows(2).all(|w| w[1] > w[0]);
    outcome(
        self_spread < 1e-6 && ssla_off > assla_off && monotone,
        format!(
            "self spread {self_spread:.1e}; off spread SSLA {ssla_off:.3e} vs ASSLA {assla_off:.3e}; SSLA − flattest {:?}",
            diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn coverage_monotone(run: &HeteroRun) -> bool {
    run.cells.iter().all(|c| {
        let mut cov = c.report.coverage.clone();
        cov.sort_by(|a, b| a.level.total_cmp(&b.level));
        cov.windows(2).all(|w| w[1].percent >= w[0].percent)
    })
}

fn coverage_95(run: &HeteroRun, engine: Engine, kind: CurvatureKind) -> Option<f64> {
    run.cells
        .iter()
        .find(|c| c.engine == engine && c.kind == kind)
        .and_then(|c| c.report.coverage_at(0.95))
}

fn hetero_calibration() -> Outcome {
    let base = ExperimentConfig::for_kind(ExperimentKind::HeteroToy);
    let start = Instant::now();
    let full = prepare_hetero(&base, 0).and_then(|setup| evaluate_setup(&base, &setup, 0));
    let elapsed = start.elapsed();
    let full = match full {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let table_ok = full.cells.len() == 9;
    let mut monotone = coverage_monotone(&full);
    let mut runs = vec![full];
    for seed in 1..5u64 {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.engines = vec![Engine::Assla, Engine::LaMc];
        match prepare_hetero(&cfg, 0).and_then(|setup| evaluate_setup(&cfg, &setup, 0)) {
            Ok(r) => {
                monotone &= coverage_monotone(&r);
                runs.push(r);
            }
            Err(e) => return outcome(false, format!("error at seed {seed}: {e}")),
        }
    }
    let mut majority = true;
    let mut parts = Vec::new();
    for &kind in &base.curvature {
        let wins = runs
            .iter()
            .filter(
                |r| match (coverage_95(r, Engine::LaMc, kind), coverage_95(r, Engine::Assla, kind)) {
                    (Some(l), Some(a)) => l >= a,
                    _ => false,
                },
            )
            .count();
        majority &= wins * 2 > runs.len();
        parts.push(format!("{}: LA-MC >= ASSLA at 95% in {wins}/5", kind.as_str()));
    }
    let time_ok = elapsed < Duration::from_secs(600);
    outcome(
        table_ok && time_ok && monotone && majority,
        format!(
            "full table {:.0}s; coverage monotone={monotone}; {}",
            elapsed.as_secs_f64(),
            parts.join(", ")
        ),
    )
}

fn normal_grid(mean: f64, sd: f64, half_width: f64, count: usize) -> PredictiveGrid {
    let ys = equispaced(mean - half_width * sd, mean + half_width * sd, count);
    let d = Normal::new(mean, sd).unwrap();
    let logd = ys.iter().map(|&y| d.ln_pdf(y)).collect();
    normalize_grid(&PredictiveGrid::new(ys, logd).unwrap()).unwrap()
}

fn gaussian_crps(mean: f64, sd: f64, y: f64) -> f64 {
    let std = Normal::standard();
    let z = (y - mean) / sd;
    sd * (z * (2.0 * std.cdf(z) - 1.0) + 2.0 * std.pdf(z) - 1.0 / std::f64::consts::PI.sqrt())
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_crps = 0.0f64;
    for _ in 0..20 {
        let mean = rng.random_range(-3.0..3.0);
        let sd = rng.random_range(0.2..3.0);
        let y = mean + sd * rng.random_range(-3.0..3.0);
        let grid = normal_grid(mean, sd, 8.0, 801);
        match crps(&grid, y) {
            Ok(c) => worst_crps = worst_crps.max((c - gaussian_crps(mean, sd, y)).abs()),
            Err(e) => return outcome(false, format!("error: {e}")),
        }
    }

    let ys = equispaced(-8.0, 8.0, 801);
    let p =
        normalize_grid(&PredictiveGrid::new(ys.clone(), ys.iter().map(|y| -0.5 * y * y).collect()).unwrap()).unwrap();
    let q = normalize_grid(
        &PredictiveGrid::new(ys.clone(), ys.iter().map(|y| -0.5 * (y - 0.1) * (y - 0.1)).collect()).unwrap(),
    )
    .unwrap();
    let kl = kl_grid(&p, &q).unwrap_or(f64::NAN);

    let grid = normal_grid(1.0, 2.0, 8.0, 801);
    let interval = credible_interval(&grid, 0.95).unwrap();
    let sampler = NormalSampler::new(1.0, 2.0).unwrap();
    let truths: Vec<f64> = (0..2000).map(|_| sampler.sample(&mut rng)).collect();
    let intervals = vec![interval; truths.len()];
    let coverage = empirical_coverage(&intervals, &truths).unwrap_or(f64::NAN);

    outcome(
        worst_crps < 1e-3 && (kl - 0.005).abs() <= 1e-4 && (coverage - 95.0).abs() <= 3.0,
        format!("CRPS worst err {worst_crps:.1e}; KL {kl:.6}; coverage {coverage:.2}%"),
    )
}

fn hash_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(std::fs::read(&path).unwrap())));
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let mut configs = Vec::new();
    let mut normal = ExperimentConfig::for_kind(ExperimentKind::ConjugateNormal);
    normal.n = vec![20, 1_000];
    configs.push(normal);
    let mut poisson = ExperimentConfig::for_kind(ExperimentKind::ConjugatePoisson);
    poisson.n = vec![100];
    configs.push(poisson);
    let mut cancel = ExperimentConfig::for_kind(ExperimentKind::Cancellation);
    cancel.n = vec![1_000, 10_000];
    cancel.replicates = 2;
    configs.push(cancel);
    configs.push(ExperimentConfig::for_kind(ExperimentKind::PriorModularity));
    let mut hetero = ExperimentConfig::for_kind(ExperimentKind::HeteroToy);
    hetero.engines = vec![Engine::Ssla, Engine::Assla, Engine::LaMc];
    hetero.hetero.n_test = 2;
    hetero.hetero.ssla_grid_count = 11;
    configs.push(hetero);

    let mut mismatched = Vec::new();
    let mut files = 0;
    for cfg in &configs {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        if let Err(e) = run_experiment(cfg, a.path()).and_then(|_| run_experiment(cfg, b.path())) {
            return outcome(false, format!("{} error: {e}", cfg.experiment.as_str()));
        }
        let (ha, hb) = (hash_dir(a.path()), hash_dir(b.path()));
        files += ha.len();
        if ha != hb || ha.is_empty() {
            mismatched.push(cfg.experiment.as_str());
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "{files} files over {} experiments; mismatched: {mismatched:?}",
            configs.len()
        ),
    )
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("conjugate fidelity, normal", conjugate_normal),
        ("conjugate fidelity, poisson", conjugate_poisson),
        ("precision study", precision_study),
        ("refit shift scaling", refit_scaling),
        ("SSLA/ASSLA convergence in n", ssla_assla_convergence),
        ("Gauss-Newton exactness", gauss_newton_exactness),
        ("prior modularity", prior_modularity),
        ("heteroscedastic calibration", hetero_calibration),
        ("metric oracles", metric_oracles),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let result = check();
        if !result.pass {
            failures += 1;
        }
        println!(
            "{} {name} ({:.1}s): {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", checks.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

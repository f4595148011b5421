//! Calibration and divergence metrics on normalized predictive grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictive::{credible_interval, trapezoid, CredibleInterval, PredictiveGrid};

fn require_normalized(grid: &PredictiveGrid, op: &str) -> Result<()> {
    if !grid.is_normalized() {
        return Err(Error::config(format!("{op} needs a normalized grid")));
    }
    Ok(())
}

/// Percentage of truths inside their (closed) intervals.
pub fn empirical_coverage(intervals: &[CredibleInterval], truths: &[f64]) -> Result<f64> {
    if intervals.len() != truths.len() {
        return Err(Error::config(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if intervals.is_empty() {
        return Err(Error::config("coverage needs at least one interval"));
    }
    let hits = intervals.iter().zip(truths).filter(|(ci, y)| ci.contains(**y)).count();
    Ok(100.0 * hits as f64 / intervals.len() as f64)
}

/// Negative log predictive density at `y_true` and whether it was clamped
/// to the grid edge.
pub fn nll_with_flag(grid: &PredictiveGrid, y_true: f64) -> Result<(f64, bool)> {
    require_normalized(grid, "nll")?;
    let ys = grid.y_values();
    let outside = y_true < ys[0] || y_true > ys[ys.len() - 1];
    if outside {
        log::warn!("y_true = {y_true} outside the grid span; using the nearest edge");
    }
    let v = if grid.is_discrete() {
        let i = ys
            .iter()
            .position(|y| *y == y_true.round())
            .unwrap_or(if y_true < ys[0] { 0 } else { ys.len() - 1 });
        -grid.log_density()[i]
    } else {
        -grid.log_density_at(y_true)
    };
    Ok((v, outside))
}

/// Negative log of the linearly interpolated density at `y_true`.
pub fn nll(grid: &PredictiveGrid, y_true: f64) -> Result<f64> {
    nll_with_flag(grid, y_true).map(|r| r.0)
}

/// `∫ (F(y) − 1{y ≥ y_true})² dy` with `F` the cumulative-trapezoid CDF,
/// linear within cells; the cell holding `y_true` is split there. A target
/// outside the span adds the distance to the edge.
pub fn crps(grid: &PredictiveGrid, y_true: f64) -> Result<f64> {
    require_normalized(grid, "crps")?;
    let ys = grid.y_values();
    let cdf = grid.cdf();
    if grid.is_discrete() {
        let total: f64 = ys
            .iter()
            .zip(&cdf)
            .map(|(y, f)| {
                let step = if *y >= y_true { 1.0 } else { 0.0 };
                (f - step) * (f - step)
            })
            .sum();
        return Ok(total);
    }
    // ∫ over a cell of the square of a linear function from a to b.
    let sq = |a: f64, b: f64, h: f64| h * (a * a + a * b + b * b) / 3.0;
    let mut total = 0.0;
    for i in 0..ys.len() - 1 {
        let (y0, y1) = (ys[i], ys[i + 1]);
        let (f0, f1) = (cdf[i], cdf[i + 1]);
        if y1 <= y_true {
            total += sq(f0, f1, y1 - y0);
        } else if y0 >= y_true {
            total += sq(1.0 - f0, 1.0 - f1, y1 - y0);
        } else {
            let t = (y_true - y0) / (y1 - y0);
            let fm = f0 + t * (f1 - f0);
            total += sq(f0, fm, y_true - y0) + sq(1.0 - fm, 1.0 - f1, y1 - y_true);
        }
    }
    let (lo, hi) = (ys[0], ys[ys.len() - 1]);
    if y_true < lo {
        total += lo - y_true;
    } else if y_true > hi {
        total += y_true - hi;
    }
    Ok(total.max(0.0))
}

fn integrate(grid: &PredictiveGrid, values: &[f64]) -> f64 {
    if grid.is_discrete() {
        values.iter().sum()
    } else {
        trapezoid(grid.y_values(), values)
    }
}

/// `KL(p‖q) = ∫ p (log p − log q)`, clipped at 0.
pub fn kl_grid(p: &PredictiveGrid, q: &PredictiveGrid) -> Result<f64> {
    require_normalized(p, "kl_grid")?;
    require_normalized(q, "kl_grid")?;
    if p.y_values() != q.y_values() {
        return Err(Error::config("kl_grid needs identical grids"));
    }
    let terms: Vec<f64> = p
        .log_density()
        .iter()
        .zip(q.log_density())
        .map(|(lp, lq)| {
            let d = lp.exp();
            if d == 0.0 {
                0.0
            } else {
                d * (lp - lq)
            }
        })
        .collect();
    let kl = integrate(p, &terms);
    if kl.is_nan() {
        return Err(Error::numeric(
            "metrics",
            "kl_grid",
            "KL is NaN (q vanishes where p does not?)",
        ));
    }
    Ok(kl.max(0.0))
}

/// Differential entropy `−∫ p log p` (Shannon entropy on a lattice).
pub fn entropy_grid(p: &PredictiveGrid) -> Result<f64> {
    require_normalized(p, "entropy_grid")?;
    let terms: Vec<f64> = p
        .log_density()
        .iter()
        .map(|l| {
            let d = l.exp();
            if d == 0.0 {
                0.0
            } else {
                -d * l
            }
        })
        .collect();
    Ok(integrate(p, &terms))
}

/// Total-variation distance `½ Σ |p − q|` (lattice) or `½ ∫ |p − q|`.
pub fn total_variation(p: &PredictiveGrid, q: &PredictiveGrid) -> Result<f64> {
    require_normalized(p, "total_variation")?;
    require_normalized(q, "total_variation")?;
    if p.y_values() != q.y_values() {
        return Err(Error::config("total_variation needs identical grids"));
    }
    let diffs: Vec<f64> = p
        .density()
        .iter()
        .zip(q.density())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(0.5 * integrate(p, &diffs))
}

/// Sup-norm of the density difference on a common grid.
pub fn sup_density_gap(p: &PredictiveGrid, q: &PredictiveGrid) -> Result<f64> {
    if p.y_values() != q.y_values() {
        return Err(Error::config("sup_density_gap needs identical grids"));
    }
    Ok(p.density()
        .iter()
        .zip(q.density())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCoverage {
    pub level: f64,
    pub percent: f64,
}

/// Coverage per nominal level plus mean NLL and CRPS over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub coverage: Vec<LevelCoverage>,
    pub mean_nll: f64,
    pub mean_crps: f64,
    pub n_test: usize,
    /// Targets outside their grid span (NLL taken at the edge).
    pub n_clamped: usize,
}

impl CalibrationReport {
    /// Evaluates normalized grids against the realized targets.
    pub fn from_grids(grids: &[PredictiveGrid], truths: &[f64], levels: &[f64]) -> Result<Self> {
        if grids.len() != truths.len() || grids.is_empty() {
            return Err(Error::config("need one grid per truth and at least one test point"));
        }
        let mut coverage = Vec::with_capacity(levels.len());
        for &level in levels {
            let intervals = grids
                .iter()
                .map(|g| credible_interval(g, level))
                .collect::<Result<Vec<_>>>()?;
            coverage.push(LevelCoverage {
                level,
                percent: empirical_coverage(&intervals, truths)?,
            });
        }
        let mut nll_sum = 0.0;
        let mut crps_sum = 0.0;
        let mut n_clamped = 0;
        for (g, &y) in grids.iter().zip(truths) {
            let (v, clamped) = nll_with_flag(g, y)?;
            nll_sum += v;
            n_clamped += clamped as usize;
            crps_sum += crps(g, y)?;
        }
        let n = grids.len() as f64;
        Ok(Self {
            coverage,
            mean_nll: nll_sum / n,
            mean_crps: crps_sum / n,
            n_test: grids.len(),
            n_clamped,
        })
    }

    pub fn coverage_at(&self, level: f64) -> Option<f64> {
        self.coverage
            .iter()
            .find(|c| (c.level - level).abs() < 1e-12)
            .map(|c| c.percent)
    }
}

//! Curvature matrices `J(θ) = −∇²(ℓ_D + log π)` and their structured
//! approximations, with jittered Cholesky factorizations, log-determinants
//! and single-observation increments.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ObservationRef};
use crate::error::{Error, Result};
use crate::model::{fd_step, sandwich, symmetrize, LikelihoodModel, OutputCurvature};
use crate::prior::Prior;

/// Largest parameter dimension for which a dense `q × q` matrix is built.
pub const MAX_DENSE_DIM: usize = 2000;

const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Curvature construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureKind {
    /// Exact negative Hessian.
    #[serde(alias = "hessian")]
    Dense,
    /// Generalized Gauss–Newton, dense.
    Ggn,
    /// Diagonal of the generalized Gauss–Newton matrix.
    Diag,
    /// Per-layer blocks of the generalized Gauss–Newton matrix.
    Blocked,
}

impl CurvatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurvatureKind::Dense => "dense",
            CurvatureKind::Ggn => "ggn",
            CurvatureKind::Diag => "diag",
            CurvatureKind::Blocked => "blocked",
        }
    }

    /// Output-space curvature used for the likelihood terms.
    pub(crate) fn output_curvature(self) -> OutputCurvature {
        match self {
            CurvatureKind::Dense => OutputCurvature::Observed,
            _ => OutputCurvature::GaussNewton,
        }
    }
}

impl std::str::FromStr for CurvatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "hessian" => Ok(CurvatureKind::Dense),
            "ggn" => Ok(CurvatureKind::Ggn),
            "diag" | "diagonal" => Ok(CurvatureKind::Diag),
            "blocked" | "kfac" => Ok(CurvatureKind::Blocked),
            other => Err(Error::config(format!("unknown curvature kind '{other}'"))),
        }
    }
}

/// How to build a curvature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureOptions {
    pub kind: CurvatureKind,
    /// Add the negative prior Hessian (the penalized objective).
    pub include_prior: bool,
    /// Parameter partition for [`CurvatureKind::Blocked`]; defaults to the
    /// model's layer blocks.
    pub blocks: Option<Vec<Range<usize>>>,
}

impl CurvatureOptions {
    pub fn new(kind: CurvatureKind) -> Self {
        Self {
            kind,
            include_prior: true,
            blocks: None,
        }
    }

    pub fn without_prior(mut self) -> Self {
        self.include_prior = false;
        self
    }
}

#[derive(Debug, Clone)]
enum Structure {
    Dense(DMatrix<f64>),
    Diagonal(Vec<f64>),
    Blocks(Vec<Range<usize>>, Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone)]
enum Factor {
    Dense(Cholesky<f64, Dyn>),
    Diagonal(Vec<f64>),
    Blocks(Vec<Cholesky<f64, Dyn>>),
}

/// A symmetric positive-definite curvature matrix with a cached factorization.
#[derive(Debug, Clone)]
pub struct CurvatureMatrix {
    structure: Structure,
    factor: Factor,
    jitter: f64,
    kind: CurvatureKind,
}

fn smallest_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky with the escalating jitter ladder. Returns the factor and the
/// absolute jitter added to the diagonal.
fn factor_dense(m: &DMatrix<f64>, operation: &'static str) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let q = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("curvature", operation, "matrix has non-finite entries"));
    }
    let scale = (m.trace() / q as f64).abs();
    for eps in JITTER_LADDER {
        let jitter = eps * scale;
        if eps > 0.0 && jitter == 0.0 {
            break;
        }
        let mut a = m.clone();
        for i in 0..q {
            a[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(a) {
            if ch.l_dirty().diagonal().iter().all(|d| *d > 0.0 && d.is_finite()) {
                return Ok((ch, jitter));
            }
        }
    }
    Err(Error::numeric(
        "curvature",
        operation,
        format!(
            "not positive definite within the jitter budget; smallest eigenvalue {:e}",
            smallest_eigenvalue(m)
        ),
    ))
}

fn factor_diagonal(d: &[f64], operation: &'static str) -> Result<(Vec<f64>, f64)> {
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            "curvature",
            operation,
            "diagonal has non-finite entries",
        ));
    }
    let scale = (d.iter().sum::<f64>() / d.len() as f64).abs();
    for eps in JITTER_LADDER {
        let jitter = eps * scale;
        if d.iter().all(|v| v + jitter > 0.0) {
            return Ok((d.iter().map(|v| v + jitter).collect(), jitter));
        }
    }
    let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    Err(Error::numeric(
        "curvature",
        operation,
        format!("diagonal not positive within the jitter budget; smallest entry {min:e}"),
    ))
}

fn chol_logdet(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn check_blocks(blocks: &[Range<usize>], q: usize) -> Result<()> {
    let mut next = 0;
    for b in blocks {
        if b.start != next || b.end <= b.start {
            return Err(Error::config(format!(
                "block partition must tile 0..{q} contiguously; offending block {b:?}"
            )));
        }
        next = b.end;
    }
    if next != q {
        return Err(Error::config(format!(
            "block partition covers 0..{next}, parameters are 0..{q}"
        )));
    }
    Ok(())
}

impl CurvatureMatrix {
    pub fn from_dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::config("curvature matrix must be square and non-empty"));
        }
        let mut m = m;
        symmetrize(&mut m);
        let (ch, jitter) = factor_dense(&m, "factorize")?;
        Ok(Self {
            structure: Structure::Dense(m),
            factor: Factor::Dense(ch),
            jitter,
            kind: CurvatureKind::Dense,
        })
    }

    pub fn from_diagonal(d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::config("curvature diagonal must be non-empty"));
        }
        let (f, jitter) = factor_diagonal(&d, "factorize")?;
        Ok(Self {
            structure: Structure::Diagonal(d),
            factor: Factor::Diagonal(f),
            jitter,
            kind: CurvatureKind::Diag,
        })
    }

    /// Block-diagonal matrix; `ranges` must tile `0..q`.
    pub fn from_blocks(ranges: Vec<Range<usize>>, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let q = ranges.last().map(|r| r.end).unwrap_or(0);
        check_blocks(&ranges, q)?;
        if ranges.len() != blocks.len()
            || ranges
                .iter()
                .zip(&blocks)
                .any(|(r, b)| b.nrows() != r.len() || b.ncols() != r.len())
        {
            return Err(Error::config("block sizes do not match the partition"));
        }
        let mut factors = Vec::with_capacity(blocks.len());
        let mut jitter: f64 = 0.0;
        let mut blocks = blocks;
        for b in &mut blocks {
            symmetrize(b);
            let (ch, j) = factor_dense(b, "factorize")?;
            jitter = jitter.max(j);
            factors.push(ch);
        }
        Ok(Self {
            structure: Structure::Blocks(ranges, blocks),
            factor: Factor::Blocks(factors),
            jitter,
            kind: CurvatureKind::Blocked,
        })
    }

    /// Parameter dimension.
    pub fn dim(&self) -> usize {
        match &self.structure {
            Structure::Dense(m) => m.nrows(),
            Structure::Diagonal(d) => d.len(),
            Structure::Blocks(r, _) => r.last().map(|r| r.end).unwrap_or(0),
        }
    }

    /// The construction method; decides how single-observation increments
    /// are formed.
    pub fn kind(&self) -> CurvatureKind {
        self.kind
    }

    /// Relabels the construction method.
    pub fn with_kind(mut self, kind: CurvatureKind) -> Self {
        self.kind = kind;
        self
    }

    /// Largest absolute jitter added to a diagonal.
    pub fn jitter_applied(&self) -> f64 {
        self.jitter
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.structure, Structure::Diagonal(_))
    }

    /// The matrix (without jitter) as a dense array.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::Dense(m) => m.clone(),
            Structure::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Structure::Blocks(ranges, blocks) => {
                let q = self.dim();
                let mut m = DMatrix::zeros(q, q);
                for (r, b) in ranges.iter().zip(blocks) {
                    m.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(b);
                }
                m
            }
        }
    }

    /// Log-determinant of the (jittered) matrix from its factorization.
    pub fn log_det(&self) -> f64 {
        match &self.factor {
            Factor::Dense(ch) => chol_logdet(ch),
            Factor::Diagonal(d) => d.iter().map(|v| v.ln()).sum(),
            Factor::Blocks(chs) => chs.iter().map(chol_logdet).sum(),
        }
    }

    /// `J⁻¹ v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        match (&self.factor, &self.structure) {
            (Factor::Dense(ch), _) => ch.solve(&DVector::from_column_slice(v)).as_slice().to_vec(),
            (Factor::Diagonal(d), _) => v.iter().zip(d).map(|(a, b)| a / b).collect(),
            (Factor::Blocks(chs), Structure::Blocks(ranges, _)) => {
                let mut out = vec![0.0; v.len()];
                for (ch, r) in chs.iter().zip(ranges) {
                    let x = ch.solve(&DVector::from_column_slice(&v[r.clone()]));
                    out[r.clone()].copy_from_slice(x.as_slice());
                }
                out
            }
            _ => unreachable!("factor and structure always agree"),
        }
    }

    /// `log|J + s·g gᵀ| − log|J| = log(1 + s·gᵀJ⁻¹g)`.
    pub fn rank_one_logdet_increment(&self, g: &[f64], s: f64) -> Result<f64> {
        if g.len() != self.dim() {
            return Err(Error::config(format!(
                "increment vector has dimension {}, curvature has {}",
                g.len(),
                self.dim()
            )));
        }
        if !(s >= 0.0) {
            return Err(Error::config(format!("rank-one scale must be non-negative, got {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let u = DMatrix::from_row_slice(1, g.len(), g);
        self.low_rank_logdet_increment(&u, &[[s, 0.0], [0.0, 0.0]], 1)
    }

    /// `log|J + Uᵀ C U| − log|J|` for a `k × q` matrix `U` (`k ≤ 2`),
    /// restricted to this matrix's structure (diagonal or blocks).
    pub(crate) fn low_rank_logdet_increment(&self, u: &DMatrix<f64>, c: &[[f64; 2]; 2], k: usize) -> Result<f64> {
        let small = |rows: &DMatrix<f64>, solve: &dyn Fn(&[f64]) -> Vec<f64>| -> Result<f64> {
            // M = I + C (U J⁻¹ Uᵀ)
            let mut w = DMatrix::<f64>::zeros(k, k);
            let solved: Vec<Vec<f64>> = (0..k).map(|a| solve(rows.row(a).transpose().as_slice())).collect();
            for a in 0..k {
                for b in 0..k {
                    w[(a, b)] = rows.row(a).iter().zip(&solved[b]).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            // A = C W; |I + A| − 1 = tr A + det A for k ≤ 2.
            let mut a = [[0.0; 2]; 2];
            for r in 0..k {
                for col in 0..k {
                    for t in 0..k {
                        a[r][col] += c[r][t] * w[(t, col)];
                    }
                }
            }
            let excess = if k == 1 {
                a[0][0]
            } else {
                a[0][0] + a[1][1] + a[0][0] * a[1][1] - a[0][1] * a[1][0]
            };
            if !(excess > -1.0) || !excess.is_finite() {
                return Err(Error::numeric(
                    "curvature",
                    "logdet_increment",
                    format!(
                        "updated matrix is not positive definite (determinant ratio {:e})",
                        1.0 + excess
                    ),
                ));
            }
            Ok(excess.ln_1p())
        };
        match (&self.factor, &self.structure) {
            (Factor::Dense(ch), _) => small(u, &|v| ch.solve(&DVector::from_column_slice(v)).as_slice().to_vec()),
            (Factor::Diagonal(d), _) => {
                let mut total = 0.0;
                for i in 0..d.len() {
                    let mut add = 0.0;
                    for a in 0..k {
                        for b in 0..k {
                            add += u[(a, i)] * c[a][b] * u[(b, i)];
                        }
                    }
                    let r = add / d[i];
                    if !(r > -1.0) {
                        return Err(Error::numeric(
                            "curvature",
                            "logdet_increment",
                            format!("diagonal entry {i} becomes non-positive"),
                        ));
                    }
                    total += r.ln_1p();
                }
                Ok(total)
            }
            (Factor::Blocks(chs), Structure::Blocks(ranges, _)) => {
                let mut total = 0.0;
                for (ch, r) in chs.iter().zip(ranges) {
                    let sub = u.columns(r.start, r.len()).into_owned();
                    total += small(&sub, &|v| ch.solve(&DVector::from_column_slice(v)).as_slice().to_vec())?;
                }
                Ok(total)
            }
            _ => unreachable!("factor and structure always agree"),
        }
    }

    /// `log|J + H| − log|J|` for a full symmetric increment `H`, restricted
    /// to this matrix's structure; uses the same jitter as `J`.
    pub fn dense_logdet_increment(&self, h: &DMatrix<f64>) -> Result<f64> {
        let q = self.dim();
        if h.nrows() != q || h.ncols() != q {
            return Err(Error::config("increment matrix has the wrong shape"));
        }
        let fail = |d: String| Error::numeric("curvature", "logdet_increment", d);
        match (&self.factor, &self.structure) {
            (Factor::Dense(_), Structure::Dense(m)) => {
                let mut a = m + h;
                for i in 0..q {
                    a[(i, i)] += self.jitter;
                }
                symmetrize(&mut a);
                let ch = Cholesky::new(a).ok_or_else(|| fail("J + H is not positive definite".into()))?;
                Ok(chol_logdet(&ch) - self.log_det())
            }
            (Factor::Diagonal(d), _) => {
                let mut total = 0.0;
                for i in 0..q {
                    let r = h[(i, i)] / d[i];
                    if !(r > -1.0) {
                        return Err(fail(format!("diagonal entry {i} becomes non-positive")));
                    }
                    total += r.ln_1p();
                }
                Ok(total)
            }
            (Factor::Blocks(chs), Structure::Blocks(ranges, blocks)) => {
                let mut total = 0.0;
                for ((ch, r), b) in chs.iter().zip(ranges).zip(blocks) {
                    let mut a = b + h.view((r.start, r.start), (r.len(), r.len()));
                    for i in 0..r.len() {
                        a[(i, i)] += self.jitter;
                    }
                    symmetrize(&mut a);
                    let c2 = Cholesky::new(a)
                        .ok_or_else(|| fail(format!("block {r:?} of J + H is not positive definite")))?;
                    total += chol_logdet(&c2) - chol_logdet(ch);
                }
                Ok(total)
            }
            _ => unreachable!("factor and structure always agree"),
        }
    }

    /// Draws `θ ~ N(mean, J⁻¹)`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        let q = self.dim();
        let z: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = match (&self.factor, &self.structure) {
            (Factor::Dense(ch), _) => ch
                .l_dirty()
                .tr_solve_lower_triangular(&DVector::from_vec(z))
                .expect("non-singular triangular factor")
                .as_slice()
                .to_vec(),
            (Factor::Diagonal(d), _) => z.iter().zip(d).map(|(a, b)| a / b.sqrt()).collect(),
            (Factor::Blocks(chs), Structure::Blocks(ranges, _)) => {
                let mut out = vec![0.0; q];
                for (ch, r) in chs.iter().zip(ranges) {
                    let x = ch
                        .l_dirty()
                        .tr_solve_lower_triangular(&DVector::from_column_slice(&z[r.clone()]))
                        .expect("non-singular triangular factor");
                    out[r.clone()].copy_from_slice(x.as_slice());
                }
                out
            }
            _ => unreachable!("factor and structure always agree"),
        };
        x.iter().zip(mean).map(|(a, m)| a + m).collect()
    }

    /// Scales every entry by `factor` (> 0) and refactorizes.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let m = match &self.structure {
            Structure::Dense(m) => Self::from_dense(m * factor),
            Structure::Diagonal(d) => Self::from_diagonal(d.iter().map(|v| v * factor).collect()),
            Structure::Blocks(r, b) => Self::from_blocks(r.clone(), b.iter().map(|m| m * factor).collect()),
        }?;
        Ok(m.with_kind(self.kind))
    }
}

// ---- builders ----------------------------------------------------------------

/// Rows of `√c_kk · ∂o_k/∂θ` for every sample, accumulated into `GᵀG` in
/// chunks. The Gauss–Newton output curvature is diagonal for every family.
fn ggn_matrix(
    model: &LikelihoodModel,
    data: &Dataset,
    extra: Option<ObservationRef<'_>>,
    theta: &[f64],
) -> DMatrix<f64> {
    const CHUNK: usize = 2048;
    let q = model.dim();
    let n_out = model.n_outputs();
    let mut acc = DMatrix::zeros(q, q);
    let mut rows = DMatrix::zeros(CHUNK, q);
    let mut filled = 0;
    let mut s = model.new_scratch();
    let samples = data.iter().chain(extra);
    let flush = |rows: &DMatrix<f64>, filled: usize, acc: &mut DMatrix<f64>| {
        if filled > 0 {
            let g = rows.rows(0, filled);
            acc.gemm_tr(1.0, &g, &g, 1.0);
        }
    };
    for obs in samples {
        let (o, jac) = model.output_jacobian_unchecked(theta, obs.x, &mut s);
        let c = model.output_curvature(o, obs.y, OutputCurvature::GaussNewton);
        for k in 0..n_out {
            debug_assert!(k == 0 || c[0][1] == 0.0);
            let w = c[k][k].max(0.0).sqrt();
            if filled == CHUNK {
                flush(&rows, filled, &mut acc);
                filled = 0;
            }
            for j in 0..q {
                rows[(filled, j)] = w * jac[(k, j)];
            }
            filled += 1;
        }
    }
    flush(&rows, filled, &mut acc);
    acc
}

fn hessian_matrix(
    model: &LikelihoodModel,
    data: &Dataset,
    extra: Option<ObservationRef<'_>>,
    theta: &[f64],
) -> DMatrix<f64> {
    let q = model.dim();
    let mut s = model.new_scratch();
    if model.is_affine() {
        let mut acc = DMatrix::zeros(q, q);
        for obs in data.iter().chain(extra) {
            let (o, jac) = model.output_jacobian_unchecked(theta, obs.x, &mut s);
            let c = model.output_curvature(o, obs.y, OutputCurvature::Observed);
            acc += sandwich(&jac, &c, model.n_outputs());
        }
        return acc;
    }
    let grad_at = |t: &[f64], s: &mut crate::model::Scratch| {
        let mut g = vec![0.0; q];
        model.log_likelihood_grad(data, t, Some(&mut g));
        if let Some(p) = extra {
            model.add_sample_gradient(t, p.x, p.y, 1.0, s, &mut g);
        }
        g
    };
    let mut h = DMatrix::zeros(q, q);
    let mut tp = theta.to_vec();
    for j in 0..q {
        let step = fd_step(theta[j]);
        tp[j] = theta[j] + step;
        let gp = grad_at(&tp, &mut s);
        tp[j] = theta[j] - step;
        let gm = grad_at(&tp, &mut s);
        tp[j] = theta[j];
        for i in 0..q {
            h[(i, j)] = -(gp[i] - gm[i]) / (2.0 * step);
        }
    }
    symmetrize(&mut h);
    h
}

fn ggn_diagonal(model: &LikelihoodModel, data: &Dataset, extra: Option<ObservationRef<'_>>, theta: &[f64]) -> Vec<f64> {
    let q = model.dim();
    let mut d = vec![0.0; q];
    let mut s = model.new_scratch();
    for obs in data.iter().chain(extra) {
        let (o, jac) = model.output_jacobian_unchecked(theta, obs.x, &mut s);
        let c = model.output_curvature(o, obs.y, OutputCurvature::GaussNewton);
        for k in 0..model.n_outputs() {
            for j in 0..q {
                d[j] += c[k][k] * jac[(k, j)] * jac[(k, j)];
            }
        }
    }
    d
}

/// Builds the curvature of `ℓ_D (+ ℓ_extra) (+ log π)` at `theta`.
pub fn curvature(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    theta: &[f64],
    options: &CurvatureOptions,
    extra: Option<ObservationRef<'_>>,
) -> Result<CurvatureMatrix> {
    model.check_theta(theta)?;
    model.check_data(data)?;
    if prior.dim() != model.dim() {
        return Err(Error::config("prior and model dimensions differ"));
    }
    let q = model.dim();
    let prior_diag: Vec<f64> = if options.include_prior {
        prior.hessian_diagonal_unchecked(theta).iter().map(|h| -h).collect()
    } else {
        vec![0.0; q]
    };
    if options.kind != CurvatureKind::Diag && q > MAX_DENSE_DIM {
        return Err(Error::Unsupported(format!(
            "dense curvature for q = {q} exceeds the limit of {MAX_DENSE_DIM}"
        )));
    }
    let add_prior = |m: &mut DMatrix<f64>| {
        for i in 0..q {
            m[(i, i)] += prior_diag[i];
        }
    };
    match options.kind {
        CurvatureKind::Dense => {
            let mut m = hessian_matrix(model, data, extra, theta);
            add_prior(&mut m);
            CurvatureMatrix::from_dense(m)
        }
        CurvatureKind::Ggn => {
            let mut m = ggn_matrix(model, data, extra, theta);
            add_prior(&mut m);
            Ok(CurvatureMatrix::from_dense(m)?.with_kind(CurvatureKind::Ggn))
        }
        CurvatureKind::Diag => {
            let d = ggn_diagonal(model, data, extra, theta);
            CurvatureMatrix::from_diagonal(d.iter().zip(&prior_diag).map(|(a, b)| a + b).collect())
        }
        CurvatureKind::Blocked => {
            let ranges = options.blocks.clone().unwrap_or_else(|| model.layer_blocks());
            check_blocks(&ranges, q)?;
            let mut m = ggn_matrix(model, data, extra, theta);
            add_prior(&mut m);
            let blocks = ranges
                .iter()
                .map(|r| m.view((r.start, r.start), (r.len(), r.len())).into_owned())
                .collect();
            CurvatureMatrix::from_blocks(ranges, blocks)
        }
    }
}

/// Exact `−∇²(ℓ_D + log π)`: analytic for affine predictors, central
/// differences of the gradient for the mlp.
pub fn curvature_dense(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    theta: &[f64],
) -> Result<CurvatureMatrix> {
    curvature(
        model,
        prior,
        data,
        theta,
        &CurvatureOptions::new(CurvatureKind::Dense),
        None,
    )
}

/// `Σᵢ Jᵢᵀ Sᵢ Jᵢ − ∇² log π` with Gauss–Newton output curvatures `Sᵢ`.
pub fn curvature_ggn(model: &LikelihoodModel, prior: &Prior, data: &Dataset, theta: &[f64]) -> Result<CurvatureMatrix> {
    curvature(
        model,
        prior,
        data,
        theta,
        &CurvatureOptions::new(CurvatureKind::Ggn),
        None,
    )
}

/// Diagonal of [`curvature_ggn`].
pub fn curvature_diagonal(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    theta: &[f64],
) -> Result<CurvatureMatrix> {
    curvature(
        model,
        prior,
        data,
        theta,
        &CurvatureOptions::new(CurvatureKind::Diag),
        None,
    )
}

/// Block-diagonal restriction of [`curvature_ggn`] to `blocks`.
pub fn curvature_blocked(
    model: &LikelihoodModel,
    prior: &Prior,
    data: &Dataset,
    theta: &[f64],
    blocks: &[Range<usize>],
) -> Result<CurvatureMatrix> {
    let mut opts = CurvatureOptions::new(CurvatureKind::Blocked);
    opts.blocks = Some(blocks.to_vec());
    curvature(model, prior, data, theta, &opts, None)
}

/// Log-determinant of a curvature matrix.
pub fn log_det(curv: &CurvatureMatrix) -> f64 {
    curv.log_det()
}

/// `log|J + s·g gᵀ| − log|J|` by the matrix-determinant lemma.
pub fn rank_one_logdet_increment(curv: &CurvatureMatrix, g: &[f64], s: f64) -> Result<f64> {
    curv.rank_one_logdet_increment(g, s)
}

/// `log|J + J_new| − log|J|` where `J_new` is the curvature contributed by
/// one observation at `theta`, built consistently with `curv.kind()`.
pub(crate) fn observation_logdet_increment(
    curv: &CurvatureMatrix,
    model: &LikelihoodModel,
    theta: &[f64],
    x: &[f64],
    y: f64,
    scratch: &mut crate::model::Scratch,
) -> Result<f64> {
    let kind = curv.kind();
    if kind == CurvatureKind::Dense && !model.is_affine() {
        let h = model.sample_neg_hessian(theta, x, y, scratch);
        return curv.dense_logdet_increment(&h);
    }
    let (o, jac) = model.output_jacobian_unchecked(theta, x, scratch);
    let c = model.output_curvature(o, y, kind.output_curvature());
    curv.low_rank_logdet_increment(&jac, &c, model.n_outputs())
}

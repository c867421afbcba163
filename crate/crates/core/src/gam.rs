//! Additive regression `y ~ intercept + sum_m g_m(x_m)` fitted by backfitting
//! penalized cubic B-spline smoothers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dataset;

const DEGREE: usize = 3;

/// How the roughness penalty weight of each term is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Smoothing {
    /// The same weight for every term.
    Fixed(f64),
    /// Per term, the weight on a log grid minimizing generalized
    /// cross-validation of the partial-residual fit.
    Gcv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GamOptions {
    /// Basis functions per predictor, before merging tied quantile knots.
    /// Capped at a quarter of the sample size.
    pub n_basis: usize,
    pub smoothing: Smoothing,
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for GamOptions {
    fn default() -> Self {
        Self { n_basis: 200, smoothing: Smoothing::Gcv, tolerance: 1e-6, max_sweeps: 100 }
    }
}

/// log10 penalty grid searched under [`Smoothing::Gcv`].
const GCV_LOG10_RANGE: (f64, f64) = (-6.0, 10.0);
const GCV_STEPS: usize = 65;

/// One univariate smoother. A constant training predictor yields an empty
/// basis and a term that is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineTerm {
    /// Full clamped knot vector.
    pub knots: Vec<f64>,
    /// Coefficients on the response scale.
    pub coefficients: Vec<f64>,
    /// Penalty weight used in the final sweep.
    pub penalty: f64,
    pub min: f64,
    pub max: f64,
}

impl SplineTerm {
    /// Evaluates the term at `x`, clamped to the training range.
    pub fn eval(&self, x: f64) -> f64 {
        if self.coefficients.is_empty() {
            return 0.0;
        }
        let (start, vals) = basis_at(&self.knots, x.clamp(self.min, self.max));
        vals.iter().enumerate().map(|(r, v)| v * self.coefficients[start + r]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamFit {
    pub intercept: f64,
    pub terms: Vec<SplineTerm>,
    /// Predictor column indices, ascending.
    pub predictor_ids: Vec<usize>,
    /// Response column index when fitted from a dataset.
    pub target: Option<usize>,
    pub sweeps: usize,
    pub converged: bool,
}

impl GamFit {
    /// Prediction for predictor columns given in `predictor_ids` order.
    pub fn predict(&self, columns: &[&[f64]]) -> Result<Vec<f64>> {
        self.predict_rows(columns, columns.first().map_or(0, |c| c.len()))
    }

    fn predict_rows(&self, columns: &[&[f64]], n: usize) -> Result<Vec<f64>> {
        if columns.len() != self.terms.len() {
            return Err(Error::InvalidInput(format!(
                "model has {} predictors, got {} columns",
                self.terms.len(),
                columns.len()
            )));
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
        }
        let mut out = vec![self.intercept; n];
        for (term, col) in self.terms.iter().zip(columns) {
            for (o, &x) in out.iter_mut().zip(col.iter()) {
                *o += term.eval(x);
            }
        }
        Ok(out)
    }

    /// `y - prediction`, reading the response and predictors from `data`.
    pub fn residual(&self, data: &Dataset) -> Result<Vec<f64>> {
        let target = self
            .target
            .ok_or_else(|| Error::InvalidInput("fit has no associated response column".into()))?;
        if target >= data.n_vars() {
            return Err(Error::InvalidInput(format!("response column {target} missing")));
        }
        let cols = self
            .predictor_ids
            .iter()
            .map(|&j| {
                if j < data.n_vars() {
                    Ok(data.column_vec(j))
                } else {
                    Err(Error::InvalidInput(format!("predictor column {j} missing")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let pred = self.predict_rows(&refs, data.n_samples())?;
        Ok(data.column(target).iter().zip(pred).map(|(y, p)| y - p).collect())
    }
}

/// Clamped cubic knot vector with interior knots at equally spaced quantiles.
fn quantile_knots(x: &[f64], n_basis: usize) -> Option<(Vec<f64>, f64, f64)> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if !(hi > lo) {
        return None;
    }
    let n_interior = n_basis.saturating_sub(DEGREE + 1);
    let mut interior: Vec<f64> = Vec::with_capacity(n_interior);
    for q in 1..=n_interior {
        let pos = q as f64 / (n_interior + 1) as f64 * (sorted.len() - 1) as f64;
        let (i, frac) = (pos.floor() as usize, pos.fract());
        let v = if i + 1 < sorted.len() { sorted[i] * (1.0 - frac) + sorted[i + 1] * frac } else { sorted[i] };
        if v > lo && v < hi && interior.last().is_none_or(|&last| v > last) {
            interior.push(v);
        }
    }
    let mut knots = vec![lo; DEGREE + 1];
    knots.extend(interior);
    knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
    Some((knots, lo, hi))
}

/// Non-zero cubic B-spline values at `x`: returns the index of the first
/// non-zero basis function and the `DEGREE + 1` values.
fn basis_at(knots: &[f64], x: f64) -> (usize, [f64; DEGREE + 1]) {
    let n_basis = knots.len() - DEGREE - 1;
    // Span s with knots[s] <= x < knots[s + 1], s in [DEGREE, n_basis - 1].
    let mut span = DEGREE;
    let mut hi = n_basis;
    if x >= knots[n_basis] {
        span = n_basis - 1;
    } else {
        while hi - span > 1 {
            let mid = (span + hi) / 2;
            if x < knots[mid] {
                hi = mid;
            } else {
                span = mid;
            }
        }
    }
    let mut n = [0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    (span - DEGREE, n)
}

fn second_difference_penalty(k: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(k, k);
    if k < 3 {
        return p;
    }
    for r in 0..k - 2 {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(a, va) in &d {
            for &(b, vb) in &d {
                p[(a, b)] += va * vb;
            }
        }
    }
    p
}

/// Basis evaluations of one predictor plus the Demmler-Reinsch
/// diagonalization of its penalized normal equations: `W^T G W = I` and
/// `W^T P W = diag(eig)` for Gram `G` and penalty `P`. Depends only on the
/// predictor, so it can be shared between fits with different responses.
#[derive(Debug, Clone)]
pub struct Smoother {
    knots: Vec<f64>,
    min: f64,
    max: f64,
    starts: Vec<usize>,
    values: Vec<[f64; DEGREE + 1]>,
    w: DMatrix<f64>,
    eig: DVector<f64>,
}

impl Smoother {
    pub fn new(x: &[f64], opts: &GamOptions) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty predictor".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("predictor contains NaN or infinite values".into()));
        }
        let n_basis = opts.n_basis.min(n / 4).max(DEGREE + 1);
        let Some((knots, min, max)) = quantile_knots(x, n_basis) else {
            return Ok(Self {
                knots: Vec::new(),
                min: x[0],
                max: x[0],
                starts: Vec::new(),
                values: Vec::new(),
                w: DMatrix::zeros(0, 0),
                eig: DVector::zeros(0),
            });
        };
        let k = knots.len() - DEGREE - 1;
        let mut starts = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for &xi in x {
            let (s, v) = basis_at(&knots, xi);
            for a in 0..=DEGREE {
                for b in 0..=DEGREE {
                    gram[(s + a, s + b)] += v[a] * v[b];
                }
            }
            starts.push(s);
            values.push(v);
        }
        let mut ridge = 1e-10 * gram.diagonal().max().max(1.0);
        let chol = loop {
            let mut g = gram.clone();
            for d in 0..k {
                g[(d, d)] += ridge;
            }
            if let Some(c) = g.cholesky() {
                break c;
            }
            ridge *= 100.0;
            if ridge > 1e6 {
                return Err(Error::Linalg("spline Gram matrix is not positive definite".into()));
            }
        };
        let l = chol.l();
        let penalty = second_difference_penalty(k);
        // L^-1 P L^-T, symmetrized against rounding.
        let lp = l.solve_lower_triangular(&penalty).ok_or_else(|| Error::Linalg("singular Cholesky factor".into()))?;
        let m = l
            .solve_lower_triangular(&lp.transpose())
            .ok_or_else(|| Error::Linalg("singular Cholesky factor".into()))?;
        let m = (&m + m.transpose()) * 0.5;
        let eigen = SymmetricEigen::new(m);
        let w = l
            .tr_solve_lower_triangular(&eigen.eigenvectors)
            .ok_or_else(|| Error::Linalg("singular Cholesky factor".into()))?;
        let eig = eigen.eigenvalues.map(|v| v.max(0.0));
        Ok(Self { knots, min, max, starts, values, w, eig })
    }

    fn k(&self) -> usize {
        self.eig.len()
    }

    fn eval_into(&self, beta: &DVector<f64>, out: &mut [f64]) {
        for ((o, &s), v) in out.iter_mut().zip(&self.starts).zip(&self.values) {
            *o = (0..=DEGREE).map(|r| v[r] * beta[s + r]).sum();
        }
    }

    /// Penalized fit of `partial`; returns coefficients, penalty and
    /// effective degrees of freedom.
    fn solve(&self, partial: &[f64], smoothing: Smoothing, other_edf: f64) -> (DVector<f64>, f64, f64) {
        let k = self.k();
        let mut b = DVector::zeros(k);
        for ((&r, &s), v) in partial.iter().zip(&self.starts).zip(&self.values) {
            for a in 0..=DEGREE {
                b[s + a] += v[a] * r;
            }
        }
        let z = self.w.tr_mul(&b);
        let shrink = |lambda: f64| self.eig.map(|e| 1.0 / (1.0 + lambda * e));
        let lambda = match smoothing {
            Smoothing::Fixed(l) => l,
            Smoothing::Gcv => {
                let n = partial.len() as f64;
                let rr: f64 = partial.iter().map(|r| r * r).sum();
                let (lo, hi) = GCV_LOG10_RANGE;
                let mut best = (f64::INFINITY, 10f64.powf(hi));
                for g in 0..GCV_STEPS {
                    let lambda = 10f64.powf(lo + (hi - lo) * g as f64 / (GCV_STEPS - 1) as f64);
                    let s = shrink(lambda);
                    let edf = s.sum();
                    let explained: f64 = z.iter().zip(s.iter()).map(|(zi, si)| zi * zi * (2.0 * si - si * si)).sum();
                    let rss = (rr - explained).max(0.0);
                    let dof = n - 1.0 - other_edf - edf;
                    if dof <= 0.0 {
                        continue;
                    }
                    let score = n * rss / (dof * dof);
                    if score < best.0 {
                        best = (score, lambda);
                    }
                }
                best.1
            }
        };
        let s = shrink(lambda);
        let beta = &self.w * z.component_mul(&s);
        (beta, lambda, s.sum())
    }
}

fn check_inputs(y: &[f64], predictors: &[&[f64]]) -> Result<()> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot fit an empty response".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("response contains NaN or infinite values".into()));
    }
    for (m, col) in predictors.iter().enumerate() {
        if col.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: col.len() });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("predictor {m} contains NaN or infinite values")));
        }
    }
    Ok(())
}

/// Fits `y` on the given predictor columns (ids are used only for bookkeeping).
pub fn fit_gam_columns(y: &[f64], predictors: &[&[f64]], opts: &GamOptions) -> Result<GamFit> {
    check_inputs(y, predictors)?;
    let smoothers = predictors.iter().map(|x| Smoother::new(x, opts)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Smoother> = smoothers.iter().collect();
    fit_gam_smoothers(y, &refs, opts)
}

/// Backfitting on prebuilt smoothers, one per predictor.
pub fn fit_gam_smoothers(y: &[f64], smoothers: &[&Smoother], opts: &GamOptions) -> Result<GamFit> {
    let n = y.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot fit an empty response".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("response contains NaN or infinite values".into()));
    }
    if let Some(bad) = smoothers.iter().find(|s| s.k() > 0 && s.starts.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.starts.len() });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ids: Vec<usize> = (0..smoothers.len()).collect();
    if smoothers.is_empty() {
        return Ok(GamFit { intercept: mean, terms: Vec::new(), predictor_ids: ids, target: None, sweeps: 0, converged: true });
    }
    if n < 10 * (1 + smoothers.len()) {
        log::warn!(
            "GAM with {} predictors on only {n} samples; at least {} recommended",
            smoothers.len(),
            10 * (1 + smoothers.len())
        );
    }
    let sd = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / scale).collect();

    let mut smoothing = opts.smoothing;
    let total_coefs = 1 + smoothers.iter().map(|s| s.k()).sum::<usize>();
    if let Smoothing::Fixed(l) = smoothing {
        if n < total_coefs {
            let raised = l * 10.0 * total_coefs as f64 / n as f64;
            log::warn!("{n} samples for {total_coefs} coefficients; raising penalty to {raised}");
            smoothing = Smoothing::Fixed(raised);
        }
    }

    let m_terms = smoothers.len();
    let mut betas: Vec<DVector<f64>> = smoothers.iter().map(|s| DVector::zeros(s.k())).collect();
    let mut lambdas = vec![0.0; m_terms];
    let mut edfs = vec![0.0; m_terms];
    let mut fitted = vec![vec![0.0; n]; m_terms];
    let mut total = vec![0.0; n];
    let mut partial = vec![0.0; n];

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for (m, sys) in smoothers.iter().enumerate() {
            if sys.k() == 0 {
                continue;
            }
            for i in 0..n {
                partial[i] = ys[i] - (total[i] - fitted[m][i]);
            }
            let other_edf: f64 = edfs.iter().enumerate().filter(|&(j, _)| j != m).map(|(_, e)| e).sum();
            let (mut beta, lambda, edf) = sys.solve(&partial, smoothing, other_edf);
            let mut f = vec![0.0; n];
            sys.eval_into(&beta, &mut f);
            // B-splines sum to one, so shifting every coefficient centers the term.
            let shift = f.iter().sum::<f64>() / n as f64;
            beta.add_scalar_mut(-shift);
            f.iter_mut().for_each(|v| *v -= shift);
            max_change = max_change.max((&beta - &betas[m]).amax());
            for i in 0..n {
                total[i] += f[i] - fitted[m][i];
            }
            fitted[m] = f;
            betas[m] = beta;
            lambdas[m] = lambda;
            edfs[m] = edf;
        }
        if max_change < opts.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("backfitting stopped after {sweeps} sweeps without converging");
    }

    let terms = smoothers
        .iter()
        .zip(&betas)
        .zip(&lambdas)
        .map(|((sys, beta), &lambda)| SplineTerm {
            knots: sys.knots.clone(),
            coefficients: beta.iter().map(|b| b * scale).collect(),
            penalty: lambda,
            min: sys.min,
            max: sys.max,
        })
        .collect();
    Ok(GamFit { intercept: mean, terms, predictor_ids: ids, target: None, sweeps, converged })
}

/// Fits column `target` of `data` on the columns in `predictors`
/// (backfitted in ascending index order).
pub fn fit_gam(data: &Dataset, target: usize, predictors: &[usize], opts: &GamOptions) -> Result<GamFit> {
    let ids = check_columns(data, target, predictors)?;
    let y = data.column_vec(target);
    let cols: Vec<Vec<f64>> = ids.iter().map(|&j| data.column_vec(j)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let mut fit = fit_gam_columns(&y, &refs, opts)?;
    fit.predictor_ids = ids;
    fit.target = Some(target);
    Ok(fit)
}

/// Sorted, deduplicated predictor ids after range checks.
pub(crate) fn check_columns(data: &Dataset, target: usize, predictors: &[usize]) -> Result<Vec<usize>> {
    let p = data.n_vars();
    let mut ids = predictors.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if target >= p {
        return Err(Error::InvalidInput(format!("response column {target} out of range")));
    }
    if let Some(&bad) = ids.iter().find(|&&j| j >= p || j == target) {
        return Err(Error::InvalidInput(format!("invalid predictor column {bad} for response {target}")));
    }
    Ok(ids)
}

/// Residual of `data[target]` regressed on `predictors` with default options.
pub fn residual_of(data: &Dataset, target: usize, predictors: &[usize]) -> Result<Vec<f64>> {
    fit_gam(data, target, predictors, &GamOptions::default())?.residual(data)
}

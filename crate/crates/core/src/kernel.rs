//! Gaussian-kernel Gram matrices and the HSIC independence test.
//!
//! Bandwidths follow the median heuristic, computed separately for each
//! argument on every call. The null distribution of `n * HSIC` is approximated
//! by a two-moment gamma fit; a permutation test is provided as a reference.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::checked_gamma_ur;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsicResult {
    /// Biased HSIC estimate `tr(K~ L~) / n^2`.
    pub statistic: f64,
    pub p_value: f64,
    pub bandwidth_x: f64,
    pub bandwidth_y: f64,
    pub n: usize,
    /// Set when the gamma fit had a non-positive variance or mean and the
    /// p-value fell back to 1.
    pub degenerate: bool,
}

/// Row-major copy of an `n x k` sample matrix.
struct Rows {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Rows {
    fn from_view(x: ArrayView2<'_, f64>) -> Self {
        let (n, k) = x.dim();
        let data = x.iter().copied().collect();
        Self { n, k, data }
    }

    fn from_columns(cols: &[&[f64]]) -> Self {
        let n = cols.first().map_or(0, |c| c.len());
        let k = cols.len();
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            data.extend(cols.iter().map(|c| c[i]));
        }
        Self { n, k, data }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    /// Squared distances of all pairs `i < j`, in row-major upper-triangle order.
    fn pairwise_sq(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            let ri = self.row(i);
            for j in (i + 1)..n {
                let rj = self.row(j);
                let d: f64 = ri.iter().zip(rj).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(d);
            }
        }
        out
    }
}

fn median_from_sq(sq: &[f64]) -> Result<f64> {
    if sq.is_empty() {
        return Err(Error::DegenerateSample("need at least two rows".into()));
    }
    let mut work = sq.to_vec();
    let mut med = median_sqrt(&mut work);
    if med <= 0.0 {
        // Heavy ties: fall back to the median over strictly positive distances.
        let mut pos: Vec<f64> = sq.iter().copied().filter(|&d| d > 0.0).collect();
        if pos.is_empty() {
            return Err(Error::DegenerateSample("all rows identical".into()));
        }
        med = median_sqrt(&mut pos);
    }
    Ok(med)
}

/// Median of `sqrt(values)`; averages the two middle elements for even counts.
fn median_sqrt(values: &mut [f64]) -> f64 {
    let m = values.len();
    let cmp = |a: &f64, b: &f64| a.total_cmp(b);
    let mid = m / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, cmp);
    let upper = upper.sqrt();
    if m % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max.sqrt() + upper)
    }
}

/// Median of pairwise Euclidean distances between distinct rows of `x`.
pub fn median_heuristic_bandwidth(x: ArrayView2<'_, f64>) -> Result<f64> {
    let rows = Rows::from_view(x);
    if rows.n < 2 {
        return Err(Error::DegenerateSample("need at least two rows".into()));
    }
    median_from_sq(&rows.pairwise_sq())
}

/// Uncentered RBF Gram matrix with the bookkeeping needed for centering.
struct Gram {
    n: usize,
    k: Vec<f64>,
    row_mean: Vec<f64>,
    grand_mean: f64,
    bandwidth: f64,
}

impl Gram {
    fn build(rows: &Rows, bandwidth: Option<f64>) -> Result<Self> {
        let n = rows.n;
        let sq = rows.pairwise_sq();
        let bandwidth = match bandwidth {
            Some(b) if b > 0.0 && b.is_finite() => b,
            Some(b) => return Err(Error::InvalidInput(format!("bandwidth must be positive, got {b}"))),
            None => median_from_sq(&sq)?,
        };
        let scale = -1.0 / (2.0 * bandwidth * bandwidth);
        let mut k = vec![0.0; n * n];
        let mut idx = 0;
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let v = (sq[idx] * scale).exp();
                idx += 1;
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let row_mean: Vec<f64> =
            (0..n).map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
        let grand_mean = row_mean.iter().sum::<f64>() / n as f64;
        Ok(Self { n, k, row_mean, grand_mean, bandwidth })
    }

    #[inline]
    fn centered(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j] - self.row_mean[i] - self.row_mean[j] + self.grand_mean
    }

    fn centered_matrix(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.centered(i, j);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }

    /// Mean of the off-diagonal entries of the uncentered Gram.
    fn offdiag_mean(&self) -> f64 {
        let n = self.n as f64;
        let total = self.grand_mean * n * n;
        (total - n) / (n * (n - 1.0))
    }
}

/// `H K H` for the RBF kernel with the given bandwidth.
pub fn centered_gram(x: ArrayView2<'_, f64>, bandwidth: f64) -> Result<Array2<f64>> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let rows = Rows::from_view(x);
    let gram = Gram::build(&rows, Some(bandwidth))?;
    let n = rows.n;
    Ok(Array2::from_shape_vec((n, n), gram.centered_matrix()).expect("square shape"))
}

fn check_lengths(x: &Rows, y: &Rows) -> Result<()> {
    if x.n != y.n {
        return Err(Error::DimensionMismatch { expected: x.n, found: y.n });
    }
    if x.n < 2 {
        return Err(Error::DegenerateSample("need at least two rows".into()));
    }
    Ok(())
}

struct Moments {
    /// `sum_ij K~_ij L~_ij`
    cross: f64,
    /// `sum_{i != j} (K~_ij L~_ij)^2`
    cross_sq_offdiag: f64,
}

fn moments(gx: &Gram, gy: &Gram) -> Moments {
    let n = gx.n;
    let mut cross = 0.0;
    let mut sq = 0.0;
    for i in 0..n {
        let d = gx.centered(i, i) * gy.centered(i, i);
        cross += d;
        let (rx, ry) = (gx.row_mean[i], gy.row_mean[i]);
        let kx = &gx.k[i * n..(i + 1) * n];
        let ky = &gy.k[i * n..(i + 1) * n];
        let mut acc = 0.0;
        let mut acc_sq = 0.0;
        for j in (i + 1)..n {
            let a = kx[j] - rx - gx.row_mean[j] + gx.grand_mean;
            let b = ky[j] - ry - gy.row_mean[j] + gy.grand_mean;
            let prod = a * b;
            acc += prod;
            acc_sq += prod * prod;
        }
        cross += 2.0 * acc;
        sq += 2.0 * acc_sq;
    }
    Moments { cross, cross_sq_offdiag: sq }
}

/// Biased HSIC estimate `tr(K~ L~) / n^2` with median-heuristic bandwidths.
pub fn hsic_statistic(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
    let (rx, ry) = (Rows::from_view(x), Rows::from_view(y));
    check_lengths(&rx, &ry)?;
    let gx = Gram::build(&rx, None)?;
    let gy = Gram::build(&ry, None)?;
    let n = rx.n as f64;
    Ok((moments(&gx, &gy).cross / (n * n)).max(0.0))
}

fn gamma_test(rx: &Rows, ry: &Rows) -> Result<HsicResult> {
    check_lengths(rx, ry)?;
    let gx = Gram::build(rx, None)?;
    let gy = Gram::build(ry, None)?;
    let n = rx.n;
    let nf = n as f64;
    let m = moments(&gx, &gy);
    let statistic = (m.cross / (nf * nf)).max(0.0);
    let test_stat = nf * statistic;

    let mut var = m.cross_sq_offdiag / 36.0 / (nf * (nf - 1.0));
    var *= 72.0 * (nf - 4.0) * (nf - 5.0) / (nf * (nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    let mu_x = gx.offdiag_mean();
    let mu_y = gy.offdiag_mean();
    let mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / nf;

    let mut result = HsicResult {
        statistic,
        p_value: 1.0,
        bandwidth_x: gx.bandwidth,
        bandwidth_y: gy.bandwidth,
        n,
        degenerate: false,
    };
    if !(var > 0.0) || !(mean > 0.0) || !var.is_finite() {
        result.degenerate = true;
        return Ok(result);
    }
    let shape = mean * mean / var;
    let scale = var * nf / mean;
    let p = checked_gamma_ur(shape, test_stat / scale).unwrap_or(f64::NAN);
    if p.is_finite() {
        result.p_value = p.clamp(0.0, 1.0);
    } else {
        result.degenerate = true;
    }
    Ok(result)
}

/// HSIC test with a two-moment gamma approximation of the null distribution.
pub fn hsic_pvalue_gamma(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<HsicResult> {
    gamma_test(&Rows::from_view(x), &Rows::from_view(y))
}

/// HSIC test against `num_permutations` random relabelings of `y`.
pub fn hsic_pvalue_permutation(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    num_permutations: usize,
    seed: u64,
) -> Result<HsicResult> {
    if num_permutations < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 permutations, got {num_permutations}"
        )));
    }
    let (rx, ry) = (Rows::from_view(x), Rows::from_view(y));
    check_lengths(&rx, &ry)?;
    let gx = Gram::build(&rx, None)?;
    let gy = Gram::build(&ry, None)?;
    let n = rx.n;
    let kc = gx.centered_matrix();
    let lc = gy.centered_matrix();
    let observed: f64 = kc.iter().zip(&lc).map(|(a, b)| a * b).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut exceed = 0usize;
    // Compare against the observed value with a small relative slack so that
    // permutations reproducing the same statistic up to rounding count as ties.
    let slack = 1e-12 * observed.abs().max(f64::MIN_POSITIVE);
    for _ in 0..num_permutations {
        perm.shuffle(&mut rng);
        let mut s = 0.0;
        for i in 0..n {
            let pi = perm[i] * n;
            let krow = &kc[i * n..(i + 1) * n];
            for (j, kv) in krow.iter().enumerate() {
                s += kv * lc[pi + perm[j]];
            }
        }
        if s >= observed - slack {
            exceed += 1;
        }
    }
    let nf = n as f64;
    Ok(HsicResult {
        statistic: (observed / (nf * nf)).max(0.0),
        p_value: (1 + exceed) as f64 / (1 + num_permutations) as f64,
        bandwidth_x: gx.bandwidth,
        bandwidth_y: gy.bandwidth,
        n,
        degenerate: false,
    })
}

/// Z-scores a column, or returns `None` when it is numerically constant.
pub fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    if x.is_empty() {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let sd = var.sqrt();
    if !(sd > 1e-12 * scale) {
        return None;
    }
    Some(x.iter().map(|v| (v - mean) / sd).collect())
}

/// p-value of the joint independence test between `a` and the stacked,
/// standardized columns of `set`.
///
/// Constant columns carry no dependence: they are dropped from `set`, and a
/// constant `a` (or an all-constant `set`) yields `p = 1`.
pub fn p_hsic_set(a: &[f64], set: &[&[f64]]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidInput("p-HSIC needs a non-empty conditioning set".into()));
    }
    let n = a.len();
    if let Some(bad) = set.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    let Some(za) = standardize(a) else {
        return Ok(1.0);
    };
    let zb: Vec<Vec<f64>> = set.iter().filter_map(|c| standardize(c)).collect();
    if zb.is_empty() {
        return Ok(1.0);
    }
    let cols: Vec<&[f64]> = zb.iter().map(Vec::as_slice).collect();
    let rx = Rows::from_columns(&[&za]);
    let ry = Rows::from_columns(&cols);
    Ok(gamma_test(&rx, &ry)?.p_value)
}

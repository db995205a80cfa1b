//! Least squares and correlation helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares fit.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub rss: f64,
    /// (XᵀX)⁻¹
    pub xtx_inv: DMatrix<f64>,
    pub n: usize,
}

impl OlsFit {
    /// Coefficient standard errors using `rss / (n - k)`.
    pub fn std_errors(&self) -> Vec<f64> {
        let k = self.coef.len();
        let s2 = self.rss / (self.n as f64 - k as f64);
        (0..k).map(|i| (s2 * self.xtx_inv[(i, i)]).sqrt()).collect()
    }
}

/// Relative pivot tolerance for declaring the design rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// Solves min ||y - Xb|| by Householder QR. Returns `None` when X has
/// (numerically) dependent columns.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<OlsFit> {
    let (n, k) = x.shape();
    if n < k {
        return None;
    }
    if k == 0 {
        return Some(OlsFit {
            coef: DVector::zeros(0),
            rss: y.norm_squared(),
            xtx_inv: DMatrix::zeros(0, 0),
            n,
        });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    let coef = r.solve_upper_triangular(&qty)?;
    let resid = y - x * &coef;
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    Some(OlsFit {
        coef,
        rss: resid.norm_squared(),
        xtx_inv,
        n,
    })
}

/// Indices of a maximal set of linearly independent columns, scanning left to right.
pub fn independent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::new();
    for j in 0..x.ncols() {
        let col_norm = x.column(j).norm();
        if col_norm == 0.0 {
            continue;
        }
        let mut trial = keep.clone();
        trial.push(j);
        let sub = x.select_columns(&trial);
        let qr = sub.qr();
        let r = qr.r();
        let last = r[(trial.len() - 1, trial.len() - 1)].abs();
        if last > 1e-9 * col_norm {
            keep = trial;
        }
    }
    keep
}

/// Pearson correlation matrix of the columns of `data` (rows are observations).
pub fn correlation_matrix(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = data.shape();
    let mut centered = data.clone();
    for j in 0..p {
        let m = centered.column(j).mean();
        centered.column_mut(j).add_scalar_mut(-m);
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let mut corr = cov.clone();
    for i in 0..p {
        for j in 0..p {
            let d = (cov[(i, i)] * cov[(j, j)]).sqrt();
            corr[(i, j)] = if d > 0.0 { cov[(i, j)] / d } else { 0.0 };
        }
        corr[(i, i)] = 1.0;
    }
    corr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 1.0).abs() < 1e-12);
        assert!((fit.coef[1] - 2.0).abs() < 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn ols_flags_rank_deficiency() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(ols(&x, &y).is_none());
        assert_eq!(independent_columns(&x), vec![0]);
    }
}

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Columns whose component orthogonal to earlier columns is below this share
/// of their own norm are treated as collinear.
pub const COLLINEARITY_TOLERANCE: f64 = 1e-9;

/// Least-squares solution with the pieces the sandwich estimators need.
#[derive(Debug, Clone)]
pub struct OlsCore {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub beta: DVector<f64>,
    pub resid: DVector<f64>,
    /// (X'X)⁻¹.
    pub bread: DMatrix<f64>,
}

impl OlsCore {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn ssr(&self) -> f64 {
        self.resid.norm_squared()
    }
}

/// Householder-QR least squares. `names` label the columns of `x` for the
/// rank-deficiency report.
pub fn ols(x: DMatrix<f64>, y: DVector<f64>, names: &[String]) -> Result<OlsCore> {
    let (n, k) = x.shape();
    assert_eq!(names.len(), k, "one name per design column");
    assert_eq!(y.len(), n, "outcome length matches design rows");
    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..k)
        .filter(|&j| {
            let norm = x.column(j).norm();
            j >= n || norm == 0.0 || r[(j, j)].abs() <= COLLINEARITY_TOLERANCE * norm
        })
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    let qty = qr.q().transpose() * &y;
    let beta = r.solve_upper_triangular(&qty).expect("full-rank R is invertible");
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).expect("full-rank R is invertible");
    let bread = &r_inv * r_inv.transpose();
    let resid = &y - &x * &beta;
    Ok(OlsCore { x, y, beta, resid, bread })
}

fn sandwich(bread: &DMatrix<f64>, meat: &DMatrix<f64>) -> DMatrix<f64> {
    let v = bread * meat * bread;
    (&v + v.transpose()) * 0.5
}

/// Homoskedastic covariance s²(X'X)⁻¹ with s² = SSR/(N−K).
pub fn classical_cov(core: &OlsCore) -> Result<DMatrix<f64>> {
    let df = residual_df(core)?;
    let v = &core.bread * (core.ssr() / df as f64);
    Ok((&v + v.transpose()) * 0.5)
}

/// White's heteroskedasticity-robust covariance, no finite-sample factor.
pub fn hc0_cov(core: &OlsCore) -> DMatrix<f64> {
    let mut scores = core.x.clone();
    for (i, mut row) in scores.row_iter_mut().enumerate() {
        row *= core.resid[i];
    }
    sandwich(&core.bread, &(scores.transpose() * &scores))
}

/// Liang–Zeger one-way cluster covariance with factor
/// G/(G−1)·(N−1)/(N−K). `groups[i]` is a dense cluster index in 0..G.
pub fn cluster_cov(core: &OlsCore, groups: &[usize]) -> Result<DMatrix<f64>> {
    assert_eq!(groups.len(), core.n(), "one cluster label per observation");
    let g = groups.iter().copied().max().map_or(0, |m| m + 1);
    if g < 2 {
        return Err(Error::TooFewClusters { found: g });
    }
    let k = core.k();
    let mut scores = DMatrix::<f64>::zeros(g, k);
    for (i, &c) in groups.iter().enumerate() {
        let e = core.resid[i];
        for j in 0..k {
            scores[(c, j)] += core.x[(i, j)] * e;
        }
    }
    let meat = scores.transpose() * &scores;
    let df = residual_df(core)?;
    let (n, gf) = (core.n() as f64, g as f64);
    let factor = gf / (gf - 1.0) * (n - 1.0) / df as f64;
    Ok(sandwich(&core.bread, &meat) * factor)
}

pub(crate) fn residual_df(core: &OlsCore) -> Result<usize> {
    core.n().checked_sub(core.k()).filter(|&d| d > 0).ok_or_else(|| {
        Error::InvalidParams(format!(
            "{} observations cannot identify {} coefficients with residual variation",
            core.n(),
            core.k()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("x{j}")).collect()
    }

    fn design() -> (DMatrix<f64>, DVector<f64>) {
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (i as f64 * 0.37).sin(),
            _ => ((i * i) as f64 * 0.11).cos(),
        });
        let y = DVector::from_fn(n, |i, _| {
            1.0 + 2.0 * x[(i, 1)] - x[(i, 2)] + 0.3 * ((i as f64) * 1.7).sin() * (1.0 + x[(i, 1)].abs())
        });
        (x, y)
    }

    #[test]
    fn exact_fit() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64 + 1.0);
        let y = x.column(0) * 2.0;
        let core = ols(x, y, &names(1)).unwrap();
        assert_abs_diff_eq!(core.beta[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn names_collinear_columns() {
        let x = DMatrix::from_fn(10, 3, |i, j| {
            if j == 2 {
                2.0 * i as f64
            } else if j == 0 {
                1.0
            } else {
                i as f64
            }
        });
        let err = ols(x, DVector::zeros(10), &names(3)).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { columns } if columns == vec!["x2".to_string()]));
    }

    #[test]
    fn singleton_clusters_scale_hc0() {
        let (x, y) = design();
        let core = ols(x, y, &names(3)).unwrap();
        let groups: Vec<usize> = (0..core.n()).collect();
        let cl = cluster_cov(&core, &groups).unwrap();
        let hc0 = hc0_cov(&core);
        let (n, k) = (core.n() as f64, core.k() as f64);
        let scaled = &hc0 * (n / (n - k));
        assert!((cl - scaled).abs().max() < 1e-10);
    }

    #[test]
    fn two_identical_halves_are_valid() {
        let (x, y) = design();
        let n = x.nrows();
        let xx = DMatrix::from_fn(2 * n, 3, |i, j| x[(i % n, j)]);
        let yy = DVector::from_fn(2 * n, |i, _| y[i % n]);
        let core = ols(xx, yy, &names(3)).unwrap();
        let groups: Vec<usize> = (0..2 * n).map(|i| i / n).collect();
        let v = cluster_cov(&core, &groups).unwrap();
        assert!(v.iter().all(|x| x.is_finite()));
        assert!((&v - v.transpose()).abs().max() == 0.0);
        assert!(v.clone().symmetric_eigen().eigenvalues.min() > -1e-10);
    }

    #[test]
    fn one_cluster_is_rejected() {
        let (x, y) = design();
        let core = ols(x, y, &names(3)).unwrap();
        assert!(matches!(cluster_cov(&core, &vec![0; core.n()]), Err(Error::TooFewClusters { found: 1 })));
    }

    #[test]
    fn classical_matches_textbook() {
        let (x, y) = design();
        let core = ols(x.clone(), y, &names(3)).unwrap();
        let s2 = core.ssr() / (core.n() - 3) as f64;
        let want = (x.transpose() * &x).try_inverse().unwrap() * s2;
        assert!((classical_cov(&core).unwrap() - want).abs().max() < 1e-12);
    }
}

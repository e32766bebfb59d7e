//! Small dense symmetric solves used by the penalized least-squares engine.

use ndarray::{Array1, Array2};

use crate::error::{CircError, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    /// Factors `a` (symmetric, only the lower triangle is read). Retries with
    /// a small diagonal ridge when the matrix is semi-definite to working
    /// precision, which happens for unpenalized spline blocks on near-exact
    /// data.
    pub fn new(a: &Array2<f64>) -> Result<Cholesky> {
        match Self::factor(a, 0.0) {
            Ok(c) => Ok(c),
            Err(_) => {
                let n = a.nrows();
                let mean_diag = (0..n).map(|i| a[[i, i]].abs()).sum::<f64>() / n.max(1) as f64;
                Self::factor(a, 1e-10 * mean_diag.max(1e-300))
            }
        }
    }

    fn factor(a: &Array2<f64>, ridge: f64) -> Result<Cholesky> {
        let n = a.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]] + ridge;
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(CircError::NotPositiveDefinite);
            }
            let dj = d.sqrt();
            l[[j, j]] = dj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / dj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut x = b.clone();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.l[[i, k]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[[k, i]] * x[k];
            }
            x[i] = s / self.l[[i, i]];
        }
        x
    }

    /// trace(A⁻¹ B) for symmetric B, where A is the factored matrix.
    pub fn trace_solve(&self, b: &Array2<f64>) -> f64 {
        let n = self.l.nrows();
        let mut tr = 0.0;
        let mut col = Array1::<f64>::zeros(n);
        for j in 0..n {
            for i in 0..n {
                col[i] = b[[i, j]];
            }
            let x = self.solve(&col);
            tr += x[j];
        }
        tr
    }

    /// Per-index diagonal of A⁻¹ B; used for per-block EDF contributions.
    pub fn diag_solve(&self, b: &Array2<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut diag = Array1::<f64>::zeros(n);
        let mut col = Array1::<f64>::zeros(n);
        for j in 0..n {
            for i in 0..n {
                col[i] = b[[i, j]];
            }
            let x = self.solve(&col);
            diag[j] = x[j];
        }
        diag
    }
}

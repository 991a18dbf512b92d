//! Ridge regression readout on frozen embeddings.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub lambda: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig { lambda: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub coef: Array1<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.coef.len() {
            return Err(Error::Shape(format!(
                "model has {} coefficients, input has {} columns",
                self.coef.len(),
                x.ncols()
            )));
        }
        Ok((x.dot(&self.coef) + self.intercept).to_vec())
    }
}

/// Solves `(Xc^T Xc + lambda I) beta = Xc^T yc` on centered data; the
/// intercept restores the means. The intercept is not penalized.
pub fn ridge_fit(x: ArrayView2<'_, f64>, y: &[f64], config: &RidgeConfig) -> Result<RidgeModel> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::Input("ridge fit needs at least one sample".into()));
    }
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    if !(config.lambda.is_finite() && config.lambda >= 0.0) {
        return Err(Error::Config(format!(
            "ridge lambda must be finite and >= 0, got {}",
            config.lambda
        )));
    }
    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = &x - &x_mean;
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));

    let mut gram = xc.t().dot(&xc);
    for j in 0..d {
        gram[[j, j]] += config.lambda;
    }
    let rhs = xc.t().dot(&yc);
    let coef = cholesky_solve(gram, rhs)?;
    let intercept = y_mean - x_mean.dot(&coef);
    if !intercept.is_finite() || coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("ridge solution is not finite".into()));
    }
    Ok(RidgeModel { coef, intercept })
}

/// Pivots below this fraction of the largest diagonal entry count as singular.
const PIVOT_TOL: f64 = 1e-12;

/// Solves `A x = b` for symmetric positive definite `A`.
fn cholesky_solve(mut a: Array2<f64>, b: Array1<f64>) -> Result<Array1<f64>> {
    let d = a.nrows();
    let scale = (0..d).map(|j| a[[j, j]]).fold(0.0, f64::max);
    // In-place lower factor.
    for j in 0..d {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= a[[j, k]] * a[[j, k]];
        }
        if !diag.is_finite() || diag <= PIVOT_TOL * scale {
            return Err(Error::Numerical(format!(
                "normal equations are not positive definite (pivot {j} = {diag:e}); \
                 increase the ridge penalty"
            )));
        }
        let l_jj = diag.sqrt();
        a[[j, j]] = l_jj;
        for i in (j + 1)..d {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / l_jj;
        }
    }
    let mut z = b;
    for i in 0..d {
        for k in 0..i {
            z[i] -= a[[i, k]] * z[k];
        }
        z[i] /= a[[i, i]];
    }
    for i in (0..d).rev() {
        for k in (i + 1)..d {
            z[i] -= a[[k, i]] * z[k];
        }
        z[i] /= a[[i, i]];
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_point_line() {
        let m = ridge_fit(array![[1.0], [2.0]].view(), &[1.0, 2.0], &RidgeConfig { lambda: 0.0 }).unwrap();
        assert!((m.coef[0] - 1.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        let p = m.predict(array![[1.0], [2.0]].view()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && (p[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_penalty_predicts_mean() {
        let m = ridge_fit(array![[1.0], [2.0]].view(), &[1.0, 2.0], &RidgeConfig { lambda: 1e12 }).unwrap();
        for p in m.predict(array![[1.0], [2.0], [10.0]].view()).unwrap() {
            assert!((p - 1.5).abs() < 1e-3);
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((30, 4), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..10.0)).collect();
        let m = ridge_fit(x.view(), &y, &RidgeConfig { lambda: 0.0 }).unwrap();
        let pred = m.predict(x.view()).unwrap();
        let resid = Array1::from_iter(y.iter().zip(&pred).map(|(a, b)| a - b));
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        for v in xc.t().dot(&resid) {
            assert!(v.abs() < 1e-8, "{v}");
        }
        assert!(resid.sum().abs() < 1e-8);
    }

    #[test]
    fn singular_without_penalty_is_reported() {
        let x = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]];
        let err = ridge_fit(x.view(), &[1.0, 2.0, 3.0], &RidgeConfig { lambda: 0.0 }).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert!(ridge_fit(x.view(), &[1.0, 2.0, 3.0], &RidgeConfig { lambda: 0.1 }).is_ok());
    }

    #[test]
    fn input_errors() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(
            ridge_fit(x.view(), &[1.0], &RidgeConfig::default()),
            Err(Error::Shape(_))
        ));
        assert!(ridge_fit(x.view(), &[1.0, 2.0], &RidgeConfig { lambda: -1.0 }).is_err());
        let m = ridge_fit(x.view(), &[1.0, 2.0], &RidgeConfig::default()).unwrap();
        assert!(m.predict(array![[1.0, 2.0]].view()).is_err());
    }
}

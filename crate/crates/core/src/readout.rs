//! Linear readout trained by the Moore-Penrose pseudo-inverse, plus the error
//! measures used to score it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fit options. `rcond` is relative to the largest singular value; `None`
/// picks the scalar type's default.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default)]
    pub rcond: Option<f64>,
    #[serde(default)]
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { rcond: None, ridge: 0.0 }
    }
}

impl FitOptions {
    pub fn rcond_for<T: Real>(&self) -> T {
        T::lit(self.rcond.unwrap_or(T::DEFAULT_RCOND))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rcond {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidArgument(format!("rcond must be in (0, 1), got {r}")));
            }
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidArgument(format!("ridge must be finite and >= 0, got {}", self.ridge)));
        }
        Ok(())
    }
}

/// Stack feature vectors as rows of a design matrix.
pub fn design_matrix<T: Real>(rows: &[Vec<T>]) -> Result<DMatrix<T>> {
    let n_w = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != n_w) {
        return Err(Error::DimensionMismatch { expected: n_w, got: bad.len() });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("design matrix has non-finite entries".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), n_w, |i, j| rows[i][j]))
}

/// Minimum-norm least-squares weights for every column of `targets` at once,
/// sharing one SVD of the design matrix.
pub fn fit_many<T: Real>(design: &DMatrix<T>, targets: &DMatrix<T>, opts: &FitOptions) -> Result<DMatrix<T>> {
    opts.validate()?;
    if design.nrows() != targets.nrows() {
        return Err(Error::DimensionMismatch { expected: design.nrows(), got: targets.nrows() });
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("targets must be finite".into()));
    }
    let n_w = design.ncols();
    if design.iter().all(|v| *v == T::zero()) {
        log::warn!("readout fit on an all-zero design matrix; returning zero weights");
        return Ok(DMatrix::zeros(n_w, targets.ncols()));
    }
    let (a, b) = if opts.ridge > 0.0 {
        // [R; sqrt(lambda) I] w = [y; 0]
        let s = T::lit(opts.ridge.sqrt());
        let mut a = DMatrix::zeros(design.nrows() + n_w, n_w);
        a.view_mut((0, 0), design.shape()).copy_from(design);
        for k in 0..n_w {
            a[(design.nrows() + k, k)] = s;
        }
        let mut b = DMatrix::zeros(design.nrows() + n_w, targets.ncols());
        b.view_mut((0, 0), targets.shape()).copy_from(targets);
        (a, b)
    } else {
        (design.clone(), targets.clone())
    };
    let svd = a.clone().svd(true, true);
    let eps = opts.rcond_for::<T>() * svd.singular_values.max();
    let mut x = svd.solve(&b, eps).map_err(Error::Linalg)?;
    // One step of iterative refinement. The correction stays in the row space
    // of the truncated pseudo-inverse, so the solution remains minimum-norm.
    let r = &b - &a * &x;
    x += svd.solve(&r, eps).map_err(Error::Linalg)?;
    Ok(x)
}

/// Minimum-norm least-squares readout weights.
pub fn fit<T: Real>(design: &DMatrix<T>, targets: &DVector<T>, opts: &FitOptions) -> Result<DVector<T>> {
    let y = DMatrix::from_column_slice(targets.len(), 1, targets.as_slice());
    Ok(fit_many(design, &y, opts)?.column(0).into_owned())
}

/// `y = W_out . R`.
pub fn predict<T: Real>(weights: &DVector<T>, features: &[T]) -> Result<T> {
    if weights.len() != features.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: features.len() });
    }
    Ok(weights.iter().zip(features).fold(T::zero(), |acc, (w, r)| acc + *w * *r))
}

pub fn predict_all<T: Real>(weights: &DVector<T>, design: &DMatrix<T>) -> Result<DVector<T>> {
    if weights.len() != design.ncols() {
        return Err(Error::DimensionMismatch { expected: weights.len(), got: design.ncols() });
    }
    Ok(design * weights)
}

fn check_pair<T: Real>(pred: &[T], truth: &[T]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("error measures need at least one sample".into()));
    }
    if let Some(index) = truth.iter().position(|t| *t == T::zero()) {
        return Err(Error::ZeroTarget { index });
    }
    Ok(())
}

/// `mean((y - y_v)^2 / y_v^2)`.
pub fn nmse<T: Real>(pred: &[T], truth: &[T]) -> Result<T> {
    check_pair(pred, truth)?;
    let sum = pred.iter().zip(truth).fold(T::zero(), |acc, (p, t)| {
        let rel = (*p - *t) / *t;
        acc + rel * rel
    });
    Ok(sum / T::lit(truth.len() as f64))
}

/// `mean(|y - y_t| / |y_t|)`.
pub fn mean_abs_norm_err<T: Real>(pred: &[T], truth: &[T]) -> Result<T> {
    check_pair(pred, truth)?;
    let sum = pred.iter().zip(truth).fold(T::zero(), |acc, (p, t)| acc + ((*p - *t) / *t).abs());
    Ok(sum / T::lit(truth.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> FitOptions {
        FitOptions::default()
    }

    #[test]
    fn zero_targets_give_zero_weights() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let w = fit(&r, &DVector::zeros(2), &opts()).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn all_zero_design_gives_zero_weights() {
        let w = fit(&DMatrix::<f64>::zeros(3, 2), &DVector::from_element(3, 1.0), &opts()).unwrap();
        assert_eq!(w, DVector::zeros(2));
    }

    #[test]
    fn square_full_rank_interpolates() {
        let r = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let w = fit(&r, &y, &opts()).unwrap();
        assert!((&r * &w - &y).amax() < 1e-10 * y.amax());
    }

    #[test]
    fn ill_conditioned_square_fit_has_rounding_level_residual() {
        // Vandermonde on [0, 1]: condition number ~1e9 at n = 12. The
        // residual cannot beat the rounding of `R w` itself, eps |R| |w|.
        let n = 12;
        let r = DMatrix::from_fn(n, n, |i, j| (i as f64 / (n - 1) as f64).powi(j as i32));
        let y = DVector::from_fn(n, |i, _| 0.1 + (i as f64 * 0.37).sin().abs());
        let w = fit(&r, &y, &opts()).unwrap();
        let floor = f64::EPSILON * (r.abs() * w.abs()).amax();
        let residual = (&r * &w - &y).amax();
        assert!(residual < 10.0 * floor, "residual {residual:e}, floor {floor:e}");
    }

    #[test]
    fn duplicated_consistent_row_leaves_solution_unchanged() {
        let r = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 2.0]);
        let r2 = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 0.0]);
        let y2 = DVector::from_vec(vec![1.0, 2.0, 1.0]);
        let (a, b) = (fit(&r, &y, &opts()).unwrap(), fit(&r2, &y2, &opts()).unwrap());
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn underdetermined_fit_is_minimum_norm() {
        let r = DMatrix::<f64>::from_row_slice(1, 2, &[1.0, 1.0]);
        let w = fit(&r, &DVector::from_element(1, 2.0), &opts()).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ridge_shrinks_weights() {
        let r = DMatrix::<f64>::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 1.0]);
        let w = fit(&r, &y, &FitOptions { ridge: 1.0, ..opts() }).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn predict_basics() {
        let w = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(predict(&w, &[3.0, 4.0, 5.0]).unwrap(), 3.0);
        assert_eq!(predict(&DVector::zeros(2), &[3.0, 4.0]).unwrap(), 0.0);
        assert!(predict(&w, &[1.0]).is_err());
    }

    #[test]
    fn error_measure_arithmetic() {
        assert_eq!(nmse(&[1.0], &[2.0]).unwrap(), 0.25);
        assert_eq!(mean_abs_norm_err(&[1.0], &[2.0]).unwrap(), 0.5);
        assert_eq!(nmse(&[0.0, 0.0], &[3.0, -1.0]).unwrap(), 1.0);
        assert_eq!(nmse(&[3.0, -1.0], &[3.0, -1.0]).unwrap(), 0.0);
        assert!(matches!(nmse(&[1.0, 1.0], &[1.0, 0.0]), Err(Error::ZeroTarget { index: 1 })));
    }

    #[test]
    fn rcond_is_validated() {
        let bad = FitOptions { rcond: Some(2.0), ..opts() };
        assert!(fit(&DMatrix::<f64>::identity(2, 2), &DVector::zeros(2), &bad).is_err());
    }
}

//! Ridge regression for the linear readout, solved through a Cholesky
//! factorization of the regularized Gram matrix.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Factor a symmetric positive-definite matrix in place as L L^T and solve
/// A X = B column by column. Fails when a pivot is not strictly positive.
pub(crate) fn cholesky_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Shape(format!(
            "cholesky expects square A and matching B, got A {}x{}, B {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut l = a.clone();
    for j in 0..n {
        let mut diag = l[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::SolveFailed(format!(
                "non-positive pivot {diag:e} at column {j}"
            )));
        }
        let diag = diag.sqrt();
        l[[j, j]] = diag;
        for i in j + 1..n {
            let mut v = l[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / diag;
        }
    }

    let m = b.ncols();
    let mut x = b.clone();
    // Forward substitution L y = b, then back substitution L^T x = y.
    for c in 0..m {
        for i in 0..n {
            let mut v = x[[i, c]];
            for k in 0..i {
                v -= l[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = v / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut v = x[[i, c]];
            for k in i + 1..n {
                v -= l[[k, i]] * x[[k, c]];
            }
            x[[i, c]] = v / l[[i, i]];
        }
    }
    Ok(x)
}

/// Solve (R^T R + lambda I) W = R^T Y. On a factorization failure the
/// diagonal loading is increased once by 10*lambda before giving up.
pub fn ridge_solve(states: &Array2<f64>, targets: &Array2<f64>, lambda: f64) -> Result<Array2<f64>> {
    if states.nrows() != targets.nrows() {
        return Err(Error::Shape(format!(
            "states and targets disagree on rows: {} vs {}",
            states.nrows(),
            targets.nrows()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("ridge lambda must be positive, got {lambda}")));
    }
    let mut gram = states.t().dot(states);
    let rhs = states.t().dot(targets);
    for i in 0..gram.nrows() {
        gram[[i, i]] += lambda;
    }
    match cholesky_solve(&gram, &rhs) {
        Ok(w) => Ok(w),
        Err(_) => {
            for i in 0..gram.nrows() {
                gram[[i, i]] += 10.0 * lambda;
            }
            cholesky_solve(&gram, &rhs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_known_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![[2.0], [5.0]];
        let x = cholesky_solve(&a, &b).unwrap();
        // Solution of [[4,2],[2,3]] x = [2,5]: x = (-0.5, 2.0)
        assert!((x[[0, 0]] + 0.5).abs() < 1e-12);
        assert!((x[[1, 0]] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let b = array![[1.0], [1.0]];
        assert!(cholesky_solve(&a, &b).is_err());
    }

    #[test]
    fn huge_lambda_shrinks_solution() {
        let states = array![[1.0, 0.5], [0.2, 1.0], [0.7, -0.3], [0.1, 0.9]];
        let targets = array![[1.0], [2.0], [0.5], [1.5]];
        let w = ridge_solve(&states, &targets, 1e12).unwrap();
        let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "norm {norm}");
    }

    #[test]
    fn duplicated_rows_leave_solution_unchanged() {
        // Doubling every row scales both sides of the normal equations by 2;
        // with a tiny lambda the solutions agree to high precision.
        let states = array![[1.0, 0.5], [0.2, 1.0], [0.7, -0.3], [0.1, 0.9]];
        let targets = array![[1.0], [2.0], [0.5], [1.5]];
        let mut doubled_s = Vec::new();
        let mut doubled_t = Vec::new();
        for i in 0..states.nrows() {
            for _ in 0..2 {
                doubled_s.extend(states.row(i).iter().copied());
                doubled_t.extend(targets.row(i).iter().copied());
            }
        }
        let states2 = Array2::from_shape_vec((8, 2), doubled_s).unwrap();
        let targets2 = Array2::from_shape_vec((8, 1), doubled_t).unwrap();
        let w1 = ridge_solve(&states, &targets, 1e-12).unwrap();
        let w2 = ridge_solve(&states2, &targets2, 1e-12).unwrap();
        for (a, b) in w1.iter().zip(w2.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

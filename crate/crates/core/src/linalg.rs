//! Small dense helpers on top of nalgebra for the per-element solves.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-10;

/// Solve `a x = b` column by column with partial-pivoting LU and check the
/// residual of every column against `1e-10 * ‖rhs‖`.
pub(crate) fn solve_checked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::LinearSolve("singular local matrix".into()))?;
    let r = a * &x - b;
    for j in 0..b.ncols() {
        let rn = r.column(j).norm();
        let bn = b.column(j).norm();
        if !rn.is_finite() || rn > RESIDUAL_TOL * bn.max(1e-300) && rn > 1e-14 {
            return Err(Error::LinearSolve(format!(
                "residual {rn:e} exceeds tolerance for rhs norm {bn:e}"
            )));
        }
    }
    Ok(x)
}

pub(crate) fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve_checked(a, &bm)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

//! Dense linear-algebra helpers shared across the crate.
//!
//! Conventions fixed repo-wide:
//! - `vec` is column-stacking: `vec(M)[i + j*rows] = M[(i, j)]`. nalgebra stores
//!   matrices column-major, so `vec`/`unvec` are copies of the raw buffer.
//! - Rank-deficient systems are solved in the minimum-norm sense via SVD with
//!   singular-value cutoff `1e-10 * sigma_max`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for numerical rank decisions.
pub const RANK_CUTOFF_REL: f64 = 1e-10;

/// Column-stacking vectorization.
pub fn vec_mat(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_mat`]: reshapes a length `rows*cols` vector column-major.
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), rows * cols, "unvec: length mismatch");
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Largest eigenvalue modulus of a square real matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "spectral radius of a non-square matrix");
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Minimum-norm solution of `A x = b` together with the numerical rank used.
pub struct MinNormSolution {
    pub x: DVector<f64>,
    pub rank: usize,
    pub max_singular: f64,
}

/// Solves `A x = b` in the minimum-norm least-squares sense.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<MinNormSolution> {
    let svd = a.clone().svd(true, true);
    let max_singular = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = RANK_CUTOFF_REL * max_singular;
    let rank = svd.rank(eps);
    let x = svd
        .solve(b, eps)
        .map_err(|e| Error::Numerical(format!("SVD solve failed: {e}")))?;
    Ok(MinNormSolution {
        x,
        rank,
        max_singular,
    })
}

/// Minimum-norm least-squares solve with a matrix right-hand side.
pub fn min_norm_solve_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
    let svd = a.clone().svd(true, true);
    let max_singular = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = RANK_CUTOFF_REL * max_singular;
    let rank = svd.rank(eps);
    let x = svd
        .solve(b, eps)
        .map_err(|e| Error::Numerical(format!("SVD solve failed: {e}")))?;
    Ok((x, rank))
}

/// Effective rank a lifted-feature system can reach: lifted states `vec(xx')`
/// span only the symmetric subspace of `R^{d^2}`.
pub fn lift_required_rank(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Numerical rank of a matrix under the crate-wide cutoff.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let svd = a.clone().svd(false, false);
    let max_singular = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.rank(RANK_CUTOFF_REL * max_singular)
}

/// LU solve of a square system; errors if the factorization meets a zero pivot.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular matrix in direct solve".into()))
}

/// LU solve with a matrix right-hand side.
pub fn lu_solve_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular matrix in direct solve".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn vec_unvec_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = vec_mat(&m);
        // column-stacking: first column (1,4), then (2,5), then (3,6)
        assert_eq!(v.as_slice(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(unvec(&v, 2, 3), m);
    }

    #[test]
    fn kron_identity_vec_identity() {
        // (B ⊗ A) vec(X) = vec(A X Bᵀ) in the column-stacking convention.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.3, -0.7, 2.0, 1.1]);
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 3.0, 4.0]);
        let lhs = kron(&b, &a) * vec_mat(&x);
        let rhs = vec_mat(&(&a * &x * b.transpose()));
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
    }

    #[test]
    fn spectral_radius_of_rotation_scaling() {
        // 0.5 * rotation has both eigenvalues of modulus 0.5.
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert_relative_eq!(spectral_radius(&a), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn min_norm_picks_smallest_solution() {
        // x + y = 2 has min-norm solution (1, 1).
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_element(1, 2.0);
        let sol = min_norm_solve(&a, &b).unwrap();
        assert_eq!(sol.rank, 1);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-12);
    }
}

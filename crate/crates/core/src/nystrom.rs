//! Sketched Nyström rank-r approximation for PSD matrices, AS(SᵀAS)†(AS)ᵀ.

use thiserror::Error;

use crate::linalg::{frob_norm_sq, sym_eigenvalues, DenseMatrix, LinalgError};
use crate::pinv::{pinv_decell, DEFAULT_COEFF_TOL};

const SYMMETRY_TOL: f64 = 1e-8;
const EIGEN_FLOOR: f64 = -1e-8;

#[derive(Debug, Error)]
pub enum NystromError {
    #[error("input must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("input is not symmetric: max |A - Aᵀ| entry is {dev}")]
    NotSymmetric { dev: f64 },
    #[error("input is not positive semidefinite: smallest eigenvalue {eig}")]
    Indefinite { eig: f64 },
    #[error("sketch has {sketch_rows} rows, matrix is {n}x{n}")]
    ShapeMismatch { sketch_rows: usize, n: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

fn validate_psd(a: &DenseMatrix) -> Result<(), NystromError> {
    if a.rows() != a.cols() {
        return Err(NystromError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let dev = a.sub(&a.transpose()).max_abs_diff(&DenseMatrix::zeros(a.rows(), a.cols()));
    if dev > SYMMETRY_TOL {
        return Err(NystromError::NotSymmetric { dev });
    }
    let eigs = sym_eigenvalues(a)?;
    if let Some(&min) = eigs.last() {
        if min < EIGEN_FLOOR {
            return Err(NystromError::Indefinite { eig: min });
        }
    }
    Ok(())
}

/// Rank-r Nyström approximation AS(SᵀAS)†(AS)ᵀ with an n×r column sketch S.
/// The pseudo-inverse goes through the characteristic-polynomial route.
pub fn nystrom_approx(s: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix, NystromError> {
    validate_psd(a)?;
    if s.rows() != a.rows() {
        return Err(NystromError::ShapeMismatch {
            sketch_rows: s.rows(),
            n: a.rows(),
        });
    }
    let as_ = a.matmul(s); // n×r
    let core = s.transpose().matmul(&as_); // r×r = SᵀAS
    let core_pinv = pinv_decell(&core, DEFAULT_COEFF_TOL);
    Ok(as_.matmul(&core_pinv).matmul(&as_.transpose()))
}

/// ‖A − AS(SᵀAS)†(AS)ᵀ‖_F² for unit-Frobenius-norm A.
pub fn nystrom_loss(s: &DenseMatrix, a: &DenseMatrix) -> Result<f64, NystromError> {
    let approx = nystrom_approx(s, a)?;
    Ok(frob_norm_sq(&a.sub(&approx)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rank_k_tail_sq;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    /// PSD matrix GGᵀ with G of the given inner dimension, unit Frobenius norm.
    fn random_psd(n: usize, inner: usize, seed: u64) -> DenseMatrix {
        let g = random_matrix(n, inner, seed);
        let a = g.matmul(&g.transpose());
        a.scale(1.0 / a.frob_norm())
    }

    #[test]
    fn identity_with_basis_sketch() {
        let a = DenseMatrix::identity(2);
        let e1 = DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]);
        let out = nystrom_approx(&e1, &a).unwrap();
        assert!(out.max_abs_diff(&DenseMatrix::diag(&[1.0, 0.0])) < 1e-10);
    }

    #[test]
    fn range_spanning_sketch_is_exact() {
        let r = 3;
        let a = random_psd(6, r, 5);
        // The factor G spans range(A); use it as the sketch.
        let g = random_matrix(6, r, 5);
        let err = nystrom_loss(&g, &a).unwrap();
        assert!(err <= 1e-9, "loss {err}");
    }

    #[test]
    fn zero_sketch_gives_full_loss() {
        let a = random_psd(5, 5, 9);
        let zero = DenseMatrix::zeros(5, 2);
        let loss = nystrom_loss(&zero, &a).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_respects_rank_r_floor() {
        for seed in 0..10 {
            let a = random_psd(6, 6, 50 + seed);
            let s = random_matrix(6, 2, 200 + seed);
            let loss = nystrom_loss(&s, &a).unwrap();
            let floor = rank_k_tail_sq(&a, 2).unwrap();
            assert!(loss >= floor - 1e-9, "loss {loss} below floor {floor}");
        }
    }

    #[test]
    fn output_symmetric_and_rank_bounded() {
        let a = random_psd(6, 6, 13);
        let s = random_matrix(6, 2, 14);
        let out = nystrom_approx(&s, &a).unwrap();
        assert!(out.sub(&out.transpose()).frob_norm() < 1e-8);
        let f = crate::linalg::svd(&out, crate::linalg::DEFAULT_RANK_TOL).unwrap();
        assert!(f.rank <= 2);
    }

    #[test]
    fn invariant_under_right_multiplication() {
        // Only the column space of S matters.
        let a = random_psd(6, 6, 23);
        let s = random_matrix(6, 2, 24);
        let t = DenseMatrix::from_rows(&[vec![1.5, -0.3], vec![0.7, 2.0]]);
        let out1 = nystrom_approx(&s, &a).unwrap();
        let out2 = nystrom_approx(&s.matmul(&t), &a).unwrap();
        assert!(out1.sub(&out2).frob_norm() < 1e-7);
    }

    #[test]
    fn decell_path_matches_explicit_inverse() {
        let a = random_psd(5, 5, 33);
        let s = random_matrix(5, 2, 34);
        let as_ = a.matmul(&s);
        let core = s.transpose().matmul(&as_);
        // explicit 2x2 inverse
        let det = core.get(0, 0) * core.get(1, 1) - core.get(0, 1) * core.get(1, 0);
        let inv = DenseMatrix::from_rows(&[
            vec![core.get(1, 1) / det, -core.get(0, 1) / det],
            vec![-core.get(1, 0) / det, core.get(0, 0) / det],
        ]);
        let via_inv = as_.matmul(&inv).matmul(&as_.transpose());
        let via_decell = nystrom_approx(&s, &a).unwrap();
        assert!(via_inv.sub(&via_decell).frob_norm() < 1e-8);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut a = DenseMatrix::identity(3);
        a.set(0, 1, 0.5);
        let s = DenseMatrix::zeros(3, 1);
        assert!(matches!(
            nystrom_approx(&s, &a),
            Err(NystromError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn rejects_indefinite_input() {
        let a = DenseMatrix::diag(&[1.0, -0.5]);
        let s = DenseMatrix::zeros(2, 1);
        assert!(matches!(
            nystrom_approx(&s, &a),
            Err(NystromError::Indefinite { .. })
        ));
    }
}

//! Moore–Penrose pseudo-inverses via three routes: the characteristic-polynomial
//! (Decell) formula, greedy row selection with Cayley–Hamilton inversion, and an
//! SVD-based reference.

use crate::linalg::{svd, DenseMatrix, LinalgError};

/// Default absolute tolerance for the characteristic-coefficient scan.
///
/// Coefficients are wildly scale-sensitive (c_r is a degree-2r polynomial in the
/// entries), so the input is pre-scaled to unit Frobenius norm before scanning,
/// which makes a single absolute tolerance meaningful.
pub const DEFAULT_COEFF_TOL: f64 = 1e-10;

/// Characteristic polynomial coefficients c_1..c_m of a square matrix M,
/// with the convention det(λI − M) = λ^m + c_1 λ^{m−1} + ⋯ + c_m.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    pub coeffs: Vec<f64>,
}

/// Faddeev–LeVerrier recursion: M₁ = M, c_i = −tr(M_i)/i, M_{i+1} = M(M_i + c_i I).
pub fn char_poly_coeffs(m: &DenseMatrix) -> CharPoly {
    assert_eq!(m.rows(), m.cols(), "characteristic polynomial needs a square matrix");
    let n = m.rows();
    let mut coeffs = Vec::with_capacity(n);
    let mut mi = m.clone();
    for i in 1..=n {
        let trace: f64 = (0..n).map(|j| mi.get(j, j)).sum();
        let ci = -trace / i as f64;
        coeffs.push(ci);
        if i < n {
            let mut shifted = mi.clone();
            for j in 0..n {
                shifted.set(j, j, shifted.get(j, j) + ci);
            }
            mi = m.matmul(&shifted);
        }
    }
    CharPoly { coeffs }
}

/// Pseudo-inverse via the characteristic polynomial of M = ZZᵀ: find the largest
/// r with |c_r| above tolerance and return −(1/c_r)·Zᵀ(M^{r−1} + c_1 M^{r−2} + ⋯ + c_{r−1} I).
/// All coefficients below tolerance means Z† is the zero matrix.
pub fn pinv_decell(z: &DenseMatrix, coeff_tol: f64) -> DenseMatrix {
    assert!(coeff_tol > 0.0);
    let m = z.rows();
    let cols = z.cols();
    let norm = z.frob_norm();
    if norm == 0.0 {
        return DenseMatrix::zeros(cols, m);
    }
    // Z† of cZ is (1/c)Z†, so scan at unit norm and rescale at the end.
    let zn = z.scale(1.0 / norm);
    let gram = zn.matmul(&zn.transpose());
    let cp = char_poly_coeffs(&gram);
    let r = match (1..=m).rev().find(|&i| cp.coeffs[i - 1].abs() > coeff_tol) {
        Some(r) => r,
        None => return DenseMatrix::zeros(cols, m),
    };
    // T = M^{r−1} + c_1 M^{r−2} + ⋯ + c_{r−1} I, built as T_{j+1} = M·T_j + c_j I.
    let mut t = DenseMatrix::identity(m);
    for j in 1..r {
        t = gram.matmul(&t);
        let cj = cp.coeffs[j - 1];
        for i in 0..m {
            t.set(i, i, t.get(i, i) + cj);
        }
    }
    let pinv_unit = zn.transpose().matmul(&t).scale(-1.0 / cp.coeffs[r - 1]);
    pinv_unit.scale(1.0 / norm)
}

/// The projector Z†Z = Yᵀ(YYᵀ)⁻¹Y, where Y collects greedily selected
/// independent rows of Z (lowest index first), each candidate accepted when
/// det(YYᵀ) stays away from zero. The inverse uses the Cayley–Hamilton formula.
pub fn pinv_greedy_projector(z: &DenseMatrix, det_tol: f64) -> DenseMatrix {
    assert!(det_tol > 0.0);
    let cols = z.cols();
    let norm = z.frob_norm();
    if norm == 0.0 {
        return DenseMatrix::zeros(cols, cols);
    }
    let zn = z.scale(1.0 / norm); // the projector is scale-invariant
    let mut selected: Vec<usize> = Vec::new();
    for i in 0..zn.rows() {
        let mut candidate = selected.clone();
        candidate.push(i);
        let y = rows_matrix(&zn, &candidate);
        let gram = y.matmul(&y.transpose());
        let cp = char_poly_coeffs(&gram);
        let r = candidate.len();
        let det = if r % 2 == 0 { cp.coeffs[r - 1] } else { -cp.coeffs[r - 1] };
        if det.abs() > det_tol {
            selected = candidate;
        }
    }
    if selected.is_empty() {
        return DenseMatrix::zeros(cols, cols);
    }
    let y = rows_matrix(&zn, &selected);
    let gram = y.matmul(&y.transpose());
    let inv = cayley_hamilton_inverse(&gram);
    y.transpose().matmul(&inv).matmul(&y)
}

/// M⁻¹ = −(1/c_r)·(M^{r−1} + c_1 M^{r−2} + ⋯ + c_{r−1} I) for invertible M.
fn cayley_hamilton_inverse(m: &DenseMatrix) -> DenseMatrix {
    let r = m.rows();
    let cp = char_poly_coeffs(m);
    let mut t = DenseMatrix::identity(r);
    for j in 1..r {
        t = m.matmul(&t);
        let cj = cp.coeffs[j - 1];
        for i in 0..r {
            t.set(i, i, t.get(i, i) + cj);
        }
    }
    t.scale(-1.0 / cp.coeffs[r - 1])
}

fn rows_matrix(z: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let picked: Vec<Vec<f64>> = rows.iter().map(|&i| z.row(i).to_vec()).collect();
    DenseMatrix::from_rows(&picked)
}

/// Reference pseudo-inverse Z† = V Σ⁻¹ Uᵀ over retained singular values.
pub fn pinv_svd_oracle(z: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix, LinalgError> {
    let f = svd(z, rank_tol)?;
    if f.rank == 0 {
        return Ok(DenseMatrix::zeros(z.cols(), z.rows()));
    }
    let mut v_scaled = f.v.clone();
    for i in 0..v_scaled.rows() {
        for j in 0..f.rank {
            v_scaled.set(i, j, v_scaled.get(i, j) / f.sigma[j]);
        }
    }
    Ok(v_scaled.matmul(&f.u.transpose()))
}

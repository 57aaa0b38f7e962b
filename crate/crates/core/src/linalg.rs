//! Dense matrix arithmetic, compact SVD, truncated SVD, and norms.
//!
//! The SVD kernel is a one-sided Jacobi iteration, which is accurate and
//! self-contained at the matrix sizes this crate targets (a few hundred rows).

use thiserror::Error;

/// Default threshold under which singular values are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Maximum number of Jacobi sweeps before the SVD kernel gives up.
const MAX_SWEEPS: usize = 100;

/// Off-diagonal Gram tolerance at which the Jacobi sweep is considered converged.
const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("SVD did not converge after {MAX_SWEEPS} sweeps on a {rows}x{cols} matrix")]
    SvdNonConvergence { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// Real matrix with 64-bit entries in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty());
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        assert!(rows > 0 && cols > 0);
        DenseMatrix { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn check_finite(&self) -> Result<(), LinalgError> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if !self.get(r, c).is_finite() {
                    return Err(LinalgError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let lhs_row = l * other.cols;
                let out_row = i * other.cols;
                for j in 0..other.cols {
                    out.data[out_row + j] += a * other.data[lhs_row + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix::from_vec(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix::from_vec(self.rows, self.cols, data)
    }

    pub fn scale(&self, c: f64) -> DenseMatrix {
        let data = self.data.iter().map(|v| v * c).collect();
        DenseMatrix::from_vec(self.rows, self.cols, data)
    }

    pub fn frob_norm(&self) -> f64 {
        frob_norm_sq(self).sqrt()
    }

    /// Keeps the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> DenseMatrix {
        assert!(!cols.is_empty());
        let mut out = DenseMatrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.set(r, j, self.get(r, c));
            }
        }
        out
    }

    /// Keeps the first `k` columns.
    pub fn leading_columns(&self, k: usize) -> DenseMatrix {
        self.select_columns(&(0..k).collect::<Vec<_>>())
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Sum of squared entries, `tr(AᵀA)`.
pub fn frob_norm_sq(a: &DenseMatrix) -> f64 {
    a.data.iter().map(|v| v * v).sum()
}

/// Compact SVD triple with singular values sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
    pub rank: usize,
}

impl SvdResult {
    /// `U · diag(sigma) · Vᵀ`, or a zero matrix when the rank is zero.
    pub fn reconstruct(&self, rows: usize, cols: usize) -> DenseMatrix {
        if self.rank == 0 {
            return DenseMatrix::zeros(rows, cols);
        }
        let mut scaled = self.u.clone();
        for r in 0..scaled.rows() {
            for c in 0..self.rank {
                scaled.set(r, c, scaled.get(r, c) * self.sigma[c]);
            }
        }
        scaled.matmul(&self.v.transpose())
    }
}

/// Compact SVD via one-sided Jacobi; singular values below `rank_tol` are dropped.
///
/// Column signs are fixed so the largest-magnitude entry of each U column is
/// positive (ties go to the lowest row index), making factors directly comparable.
pub fn svd(a: &DenseMatrix, rank_tol: f64) -> Result<SvdResult, LinalgError> {
    a.check_finite()?;
    assert!(rank_tol > 0.0, "rank_tol must be positive");
    let n = a.rows();
    let d = a.cols();

    // Work on columns of W, accumulating rotations into V.
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(d);

    // Absolute floor for the Gram cross-term, so numerically-zero columns of
    // rank-deficient inputs cannot keep the sweep rotating forever.
    let global = a.frob_norm();
    let gamma_floor = (global * 1e-15) * (global * 1e-15);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() || gamma.abs() <= gamma_floor {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..d {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::SvdNonConvergence { rows: n, cols: d });
    }

    // Column norms are the singular values; sort descending, drop below tolerance.
    let mut order: Vec<(usize, f64)> = (0..d)
        .map(|j| {
            let norm_sq: f64 = (0..n).map(|i| w.get(i, j) * w.get(i, j)).sum();
            (j, norm_sq.sqrt())
        })
        .collect();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let kept: Vec<(usize, f64)> = order.into_iter().filter(|&(_, s)| s >= rank_tol).collect();
    let rank = kept.len();

    if rank == 0 {
        return Ok(SvdResult {
            u: DenseMatrix::zeros(n, 1),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(d, 1),
            rank: 0,
        });
    }

    let mut u_out = DenseMatrix::zeros(n, rank);
    let mut v_out = DenseMatrix::zeros(d, rank);
    let mut sigma = Vec::with_capacity(rank);
    for (out_j, &(j, s)) in kept.iter().enumerate() {
        sigma.push(s);
        // Sign convention: largest-|entry| of the U column is positive.
        let mut best_i = 0;
        let mut best_abs = -1.0;
        for i in 0..n {
            let x = (w.get(i, j) / s).abs();
            if x > best_abs {
                best_abs = x;
                best_i = i;
            }
        }
        let flip = if w.get(best_i, j) < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            u_out.set(i, out_j, flip * w.get(i, j) / s);
        }
        for i in 0..d {
            v_out.set(i, out_j, flip * v.get(i, j));
        }
    }

    Ok(SvdResult {
        u: u_out,
        sigma,
        v: v_out,
        rank,
    })
}

/// Optimal rank-`k` approximation `[A]_k = U_k Σ_k V_kᵀ`.
pub fn best_rank_k(a: &DenseMatrix, k: usize) -> Result<DenseMatrix, LinalgError> {
    assert!(k >= 1, "k must be at least 1");
    let f = svd(a, DEFAULT_RANK_TOL)?;
    let r = f.rank.min(k);
    if r == 0 {
        return Ok(DenseMatrix::zeros(a.rows(), a.cols()));
    }
    let truncated = SvdResult {
        u: f.u.leading_columns(r),
        sigma: f.sigma[..r].to_vec(),
        v: f.v.leading_columns(r),
        rank: r,
    };
    Ok(truncated.reconstruct(a.rows(), a.cols()))
}

/// Optimal rank-`k` squared error, `Σ_{i>k} σ_i²`.
pub fn rank_k_tail_sq(a: &DenseMatrix, k: usize) -> Result<f64, LinalgError> {
    let f = svd(a, DEFAULT_RANK_TOL)?;
    Ok(f.sigma.iter().skip(k).map(|s| s * s).sum())
}

/// Eigenvalues of a symmetric matrix by cyclic two-sided Jacobi, descending order.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "symmetric eigensolve needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    a.check_finite()?;
    let n = a.rows();
    let mut m = a.clone();
    // Symmetrize so roundoff asymmetry cannot stall the sweep.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let scale = m.frob_norm().max(1.0);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= JACOBI_TOL * scale {
                    continue;
                }
                rotated = true;
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let mip = m.get(i, p);
                    let miq = m.get(i, q);
                    m.set(i, p, c * mip - s * miq);
                    m.set(i, q, s * mip + c * miq);
                }
                for i in 0..n {
                    let mpi = m.get(p, i);
                    let mqi = m.get(q, i);
                    m.set(p, i, c * mpi - s * mqi);
                    m.set(q, i, s * mpi + c * mqi);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eigs)
}

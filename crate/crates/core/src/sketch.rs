//! Sparse sketching matrices: random initialization, the per-column
//! hard-threshold projection Π_s, and sparse application SA.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("sparsity budget s={s} exceeds row count m={m}")]
    BudgetTooLarge { s: usize, m: usize },
    #[error("shape mismatch: sketch has {sketch_cols} columns, matrix has {matrix_rows} rows")]
    ShapeMismatch {
        sketch_cols: usize,
        matrix_rows: usize,
    },
    #[error("mask for column {col} has {len} entries, budget is {s}")]
    MaskExceedsBudget { col: usize, len: usize, s: usize },
    #[error("mask row index {row} out of range for column {col} (m={m})")]
    MaskRowOutOfRange { col: usize, row: usize, m: usize },
    #[error("malformed sketch file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// An m×n sketching matrix with at most `s` non-zeros per column, stored as
/// per-column (row, value) entries sorted by row index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSketch {
    m: usize,
    n: usize,
    s: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl SparseSketch {
    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn budget(&self) -> usize {
        self.s
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.len()).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.columns
            .iter()
            .flatten()
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// The support of each column, as sorted row indices.
    pub fn support(&self) -> Vec<Vec<usize>> {
        self.columns
            .iter()
            .map(|c| c.iter().map(|&(r, _)| r).collect())
            .collect()
    }

    pub fn densify(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.m, self.n);
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                out.set(i, j, v);
            }
        }
        out
    }

    /// Exact sparse–dense product SA in O(nnz·d).
    pub fn apply(&self, a: &DenseMatrix) -> Result<DenseMatrix, SketchError> {
        if self.n != a.rows() {
            return Err(SketchError::ShapeMismatch {
                sketch_cols: self.n,
                matrix_rows: a.rows(),
            });
        }
        let d = a.cols();
        let mut out = DenseMatrix::zeros(self.m, d);
        for (j, col) in self.columns.iter().enumerate() {
            let a_row = a.row(j);
            for &(i, v) in col {
                for (c, &x) in a_row.iter().enumerate() {
                    let cur = out.get(i, c);
                    out.set(i, c, cur + v * x);
                }
            }
        }
        Ok(out)
    }

    /// Canonical text serialization: header `m n s`, then one `col row value`
    /// triple per line in column-major order, shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.m, self.n, self.s).unwrap();
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, v) in col {
                writeln!(out, "{} {} {}", j, i, v).unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SketchError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(SketchError::Parse {
            line: 1,
            reason: "empty file".into(),
        })?;
        let parse_usize = |tok: Option<&str>, line: usize| -> Result<usize, SketchError> {
            tok.ok_or(SketchError::Parse {
                line,
                reason: "missing field".into(),
            })?
            .parse()
            .map_err(|e| SketchError::Parse {
                line,
                reason: format!("{e}"),
            })
        };
        let mut toks = header.split_whitespace();
        let m = parse_usize(toks.next(), 1)?;
        let n = parse_usize(toks.next(), 1)?;
        let s = parse_usize(toks.next(), 1)?;
        let mut columns = vec![Vec::new(); n];
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut toks = line.split_whitespace();
            let j = parse_usize(toks.next(), lineno)?;
            let i = parse_usize(toks.next(), lineno)?;
            let v: f64 = toks
                .next()
                .ok_or(SketchError::Parse {
                    line: lineno,
                    reason: "missing value".into(),
                })?
                .parse()
                .map_err(|e| SketchError::Parse {
                    line: lineno,
                    reason: format!("{e}"),
                })?;
            if j >= n || i >= m {
                return Err(SketchError::Parse {
                    line: lineno,
                    reason: format!("index ({j}, {i}) out of range for {m}x{n}"),
                });
            }
            columns[j].push((i, v));
        }
        for (j, col) in columns.iter_mut().enumerate() {
            col.sort_by_key(|&(i, _)| i);
            if col.len() > s {
                return Err(SketchError::Parse {
                    line: 0,
                    reason: format!("column {j} has {} entries, budget {s}", col.len()),
                });
            }
        }
        Ok(SparseSketch { m, n, s, columns })
    }
}

/// Random init: exactly `s` entries per column at distinct uniformly sampled
/// rows with values ±1 equiprobable, then a global rescale to ‖S‖_F = 1.
pub fn random_sparse_init(
    m: usize,
    n: usize,
    s: usize,
    seed: u64,
) -> Result<SparseSketch, SketchError> {
    if s == 0 || s > m {
        return Err(SketchError::BudgetTooLarge { s, m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / ((n * s) as f64).sqrt();
    let mut columns = Vec::with_capacity(n);
    let all_rows: Vec<usize> = (0..m).collect();
    for _ in 0..n {
        let mut picked: Vec<usize> = all_rows
            .choose_multiple(&mut rng, s)
            .copied()
            .collect();
        picked.sort_unstable();
        let col = picked
            .into_iter()
            .map(|i| {
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                (i, sign * scale)
            })
            .collect();
        columns.push(col);
    }
    Ok(SparseSketch { m, n, s, columns })
}

/// Π_s: keeps the `s` largest-|value| entries of each column, ties broken
/// toward the lowest row index.
pub fn project_top_s(dense: &DenseMatrix, s: usize) -> Result<SparseSketch, SketchError> {
    let m = dense.rows();
    let n = dense.cols();
    if s == 0 || s > m {
        return Err(SketchError::BudgetTooLarge { s, m });
    }
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut entries: Vec<(usize, f64)> = (0..m)
            .map(|i| (i, dense.get(i, j)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        entries.sort_by(|a, b| {
            b.1.abs()
                .partial_cmp(&a.1.abs())
                .unwrap()
                .then(a.0.cmp(&b.0))
        });
        entries.truncate(s);
        entries.sort_by_key(|&(i, _)| i);
        columns.push(entries);
    }
    Ok(SparseSketch { m, n, s, columns })
}

/// Zeroes every entry of `dense` outside `mask` (per-column sorted row lists)
/// and returns the result as a sketch with budget `s`.
pub fn sparsify_mask(
    dense: &DenseMatrix,
    mask: &[Vec<usize>],
    s: usize,
) -> Result<SparseSketch, SketchError> {
    let m = dense.rows();
    let n = dense.cols();
    assert_eq!(mask.len(), n, "mask must have one row list per column");
    if s > m {
        return Err(SketchError::BudgetTooLarge { s, m });
    }
    let mut columns = Vec::with_capacity(n);
    for (j, rows) in mask.iter().enumerate() {
        if rows.len() > s {
            return Err(SketchError::MaskExceedsBudget {
                col: j,
                len: rows.len(),
                s,
            });
        }
        let mut col: Vec<(usize, f64)> = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= m {
                return Err(SketchError::MaskRowOutOfRange { col: j, row: i, m });
            }
            let v = dense.get(i, j);
            if v != 0.0 {
                col.push((i, v));
            }
        }
        col.sort_by_key(|&(i, _)| i);
        columns.push(col);
    }
    Ok(SparseSketch { m, n, s, columns })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_forced_support() {
        let s = random_sparse_init(2, 1, 2, 42).unwrap();
        assert_eq!(s.nnz(), 2);
        let mag = 1.0 / 2f64.sqrt();
        for &(_, v) in s.column(0) {
            assert!((v.abs() - mag).abs() < 1e-15);
        }
    }

    #[test]
    fn init_deterministic() {
        let a = random_sparse_init(5, 7, 2, 99).unwrap();
        let b = random_sparse_init(5, 7, 2, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
    }

    #[test]
    fn init_count_and_norm() {
        let s = random_sparse_init(10, 100, 3, 1).unwrap();
        assert_eq!(s.nnz(), 300);
        assert!((s.frob_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_rejects_oversized_budget() {
        assert!(random_sparse_init(3, 4, 5, 0).is_err());
    }

    #[test]
    fn init_distinct_seeds_distinct_supports() {
        let a = random_sparse_init(10, 50, 2, 1).unwrap();
        let b = random_sparse_init(10, 50, 2, 2).unwrap();
        let collisions = a
            .support()
            .iter()
            .zip(b.support())
            .filter(|(x, y)| *x == y)
            .count();
        // C(10,2) = 45 possible supports per column; expect ~1 collision in 50.
        assert!(collisions < 10, "{collisions} support collisions");
    }

    #[test]
    fn project_keeps_largest() {
        let dense = DenseMatrix::from_vec(3, 1, vec![3.0, -5.0, 1.0]);
        let s = project_top_s(&dense, 1).unwrap();
        assert_eq!(s.column(0), &[(1, -5.0)]);
    }

    #[test]
    fn project_tie_breaks_to_lowest_row() {
        let dense = DenseMatrix::from_vec(2, 1, vec![2.0, -2.0]);
        let s = project_top_s(&dense, 1).unwrap();
        assert_eq!(s.column(0), &[(0, 2.0)]);
    }

    #[test]
    fn project_full_budget_is_identity() {
        let dense = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let s = project_top_s(&dense, 2).unwrap();
        assert!(s.densify().max_abs_diff(&dense) == 0.0);
    }

    #[test]
    fn apply_identity_and_zero() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = DenseMatrix::from_vec(3, 2, (0..6).map(|_| rng.gen::<f64>()).collect());
        let id = project_top_s(&DenseMatrix::identity(3), 1).unwrap();
        assert!(id.apply(&a).unwrap().max_abs_diff(&a) == 0.0);

        let zero = sparsify_mask(&DenseMatrix::zeros(3, 3), &vec![vec![]; 3], 1).unwrap();
        assert!(zero.apply(&a).unwrap().max_abs_diff(&DenseMatrix::zeros(3, 2)) == 0.0);
    }

    #[test]
    fn apply_matches_dense_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let s = random_sparse_init(4, 6, 2, 3).unwrap();
        let a = DenseMatrix::from_vec(6, 5, (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let sparse = s.apply(&a).unwrap();
        let dense = s.densify().matmul(&a);
        assert!(sparse.max_abs_diff(&dense) < 1e-12);
    }

    #[test]
    fn apply_shape_mismatch() {
        let s = random_sparse_init(2, 3, 1, 0).unwrap();
        let a = DenseMatrix::zeros(4, 2);
        assert!(s.apply(&a).is_err());
    }

    #[test]
    fn mask_roundtrip_and_crosscheck() {
        let s = random_sparse_init(6, 4, 2, 17).unwrap();
        let back = sparsify_mask(&s.densify(), &s.support(), 2).unwrap();
        assert_eq!(s, back);

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let dense = DenseMatrix::from_vec(5, 3, (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let top = project_top_s(&dense, 2).unwrap();
        let via_mask = sparsify_mask(&dense, &top.support(), 2).unwrap();
        assert_eq!(top, via_mask);
    }

    #[test]
    fn mask_budget_enforced() {
        let dense = DenseMatrix::zeros(3, 1);
        assert!(sparsify_mask(&dense, &[vec![0, 1]], 1).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let s = random_sparse_init(7, 5, 3, 23).unwrap();
        let parsed = SparseSketch::from_text(&s.to_text()).unwrap();
        assert_eq!(s, parsed);
    }

    proptest! {
        #[test]
        fn apply_is_linear(seed in 0u64..50) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = random_sparse_init(3, 5, 2, seed).unwrap();
            let a = DenseMatrix::from_vec(5, 4, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let b = DenseMatrix::from_vec(5, 4, (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let lhs = s.apply(&a.add(&b)).unwrap();
            let rhs = s.apply(&a).unwrap().add(&s.apply(&b).unwrap());
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        // Π_s is the Frobenius-nearest column-s-sparse matrix: brute force over
        // all support subsets at small sizes.
        #[test]
        fn project_is_frobenius_optimal(seed in 0u64..30) {
            use itertools::Itertools;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
            let m = 4usize;
            let n = 3usize;
            let s = 2usize;
            let dense = DenseMatrix::from_vec(m, n, (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let projected = project_top_s(&dense, s).unwrap().densify();
            let err = crate::linalg::frob_norm_sq(&dense.sub(&projected));
            // best achievable per column: keep any s entries, zero the rest
            let mut best = 0.0;
            for j in 0..n {
                let col: Vec<f64> = (0..m).map(|i| dense.get(i, j)).collect();
                let col_best = (0..m)
                    .combinations(s)
                    .map(|keep| {
                        col.iter()
                            .enumerate()
                            .filter(|(i, _)| !keep.contains(i))
                            .map(|(_, v)| v * v)
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                best += col_best;
            }
            prop_assert!(err <= best + 1e-12);
        }
    }
}

//! The power-method proxy loss: enumerates k-subsets of standard basis vectors
//! and measures how well the chosen subspace reconstructs the sketched matrix.
//! A verification instrument for small instances, not a production path.

use itertools::Itertools;
use thiserror::Error;

use crate::linalg::{frob_norm_sq, DenseMatrix};
use crate::pinv::{pinv_decell, DEFAULT_COEFF_TOL};
use crate::sketch::{SketchError, SparseSketch};

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("C({d},{k}) = {combos} subsets exceeds the enumeration cap {cap}")]
    EnumCapExceeded {
        d: usize,
        k: usize,
        combos: u128,
        cap: u128,
    },
    #[error("input matrix must be normalized to unit Frobenius norm, got ‖A‖_F = {norm}")]
    Unnormalized { norm: f64 },
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// Proxy parameters: approximation level ε, power-iteration count q, and a cap
/// on the number of enumerated subsets.
#[derive(Debug, Clone)]
pub struct ProxyParams {
    pub epsilon: f64,
    pub q: usize,
    pub enum_cap: u128,
}

pub const DEFAULT_ENUM_CAP: u128 = 100_000;

impl ProxyParams {
    pub fn new(epsilon: f64, d: usize) -> Self {
        ProxyParams {
            epsilon,
            q: default_q(epsilon, d),
            enum_cap: DEFAULT_ENUM_CAP,
        }
    }
}

/// q = ⌈(1/ε)·ln(d/ε)⌉, clamped below at 1.
pub fn default_q(epsilon: f64, d: usize) -> usize {
    assert!(epsilon > 0.0 && epsilon < 1.0 + 1e-12);
    let q = ((1.0 / epsilon) * (d as f64 / epsilon).ln()).ceil();
    (q.max(1.0)) as usize
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k.min(n - k) {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The four-step proxy loss:
/// 1. B = A(SA)†(SA)
/// 2. Z_i = (BBᵀ)^q B P_i over all k-subsets P_i of standard basis vectors
/// 3. Z = argmin_i ‖B − Z_i Z_i† B‖_F² (lexicographically first on ties)
/// 4. L̂ = ‖A − ZZ†B‖_F²
///
/// Every pseudo-inverse goes through the characteristic-polynomial route.
pub fn proxy_loss(
    s: &SparseSketch,
    a: &DenseMatrix,
    k: usize,
    params: &ProxyParams,
) -> Result<f64, ProxyError> {
    let norm = a.frob_norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(ProxyError::Unnormalized { norm });
    }
    let d = a.cols();
    let combos = binomial(d, k);
    if combos > params.enum_cap {
        return Err(ProxyError::EnumCapExceeded {
            d,
            k,
            combos,
            cap: params.enum_cap,
        });
    }

    let sa = s.apply(a)?;
    let sa_pinv = pinv_decell(&sa, DEFAULT_COEFF_TOL);
    let b = a.matmul(&sa_pinv).matmul(&sa); // n×d

    // Power iterations applied once: (BBᵀ)^q B, then each Z_i is a column subset.
    let gram = b.matmul(&b.transpose());
    let mut powered = b.clone();
    for _ in 0..params.q {
        powered = gram.matmul(&powered);
    }

    let mut best: Option<(f64, DenseMatrix)> = None;
    for subset in (0..d).combinations(k) {
        let z = powered.select_columns(&subset);
        let z_pinv = pinv_decell(&z, DEFAULT_COEFF_TOL);
        let projected = z.matmul(&z_pinv.matmul(&b));
        let step3 = frob_norm_sq(&b.sub(&projected));
        // strict < keeps the lexicographically first subset on ties
        if best.as_ref().map_or(true, |(v, _)| step3 < *v) {
            best = Some((step3, projected));
        }
    }
    let (_, chosen) = best.expect("at least one subset");
    Ok(frob_norm_sq(&a.sub(&chosen)))
}

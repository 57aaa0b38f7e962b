//! Instrumentation for branching arithmetic programs: scalars carry rational
//! degree bounds and a structural expression-DAG identity, and branch nodes are
//! collected into a per-audit predicate set. Running the two pseudo-inverse
//! algorithms under this tracer yields empirical (degree, predicate) certificates.

use std::collections::HashSet;

use thiserror::Error;

use crate::linalg::DenseMatrix;

/// Zero-test tolerance inside traced branches, applied after inputs are
/// pre-scaled to unit Frobenius norm.
pub const BRANCH_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("audit fault: division with zero denominator value (missing branch guard)")]
    DivisionByZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchKind {
    NonNeg,
    NonPos,
    Zero,
}

/// A value together with degree bounds for the rational function it computes
/// and a structural hash identifying its expression DAG node.
#[derive(Debug, Clone, Copy)]
pub struct TracedScalar {
    pub value: f64,
    pub num_deg: u32,
    pub den_deg: u32,
    pub node: u64,
}

// FNV-1a style mixing; stable across runs and platforms.
fn mix(tag: u64, a: u64, b: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for x in [tag, a, b] {
        for byte in x.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

const TAG_VAR: u64 = 1;
const TAG_CONST: u64 = 2;
const TAG_ADD: u64 = 3;
const TAG_SUB: u64 = 4;
const TAG_MUL: u64 = 5;
const TAG_DIV: u64 = 6;

/// Run-local audit state: the predicate set, branch counter, and the running
/// maximum degree over all nodes created under this tracer.
#[derive(Debug, Default)]
pub struct Tracer {
    predicates: HashSet<(u64, BranchKind)>,
    branch_events: u64,
    max_degree: u32,
    fault: bool,
}

/// Union statistics over an audited input suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GjReport {
    pub max_degree: u32,
    pub predicate_count: usize,
    pub branch_events: u64,
}

/// The operations a branching arithmetic program is allowed to perform.
/// Implementations decide what bookkeeping rides along with each value.
pub trait GjContext {
    type Scalar: Clone;
    fn var(&mut self, index: usize, value: f64) -> Self::Scalar;
    fn constant(&mut self, value: f64) -> Self::Scalar;
    fn arith(&mut self, op: Op, a: &Self::Scalar, b: &Self::Scalar) -> Self::Scalar;
    fn branch(&mut self, v: &Self::Scalar, kind: BranchKind) -> bool;
    fn value(&self, v: &Self::Scalar) -> f64;
}

impl Tracer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn report(&self) -> Result<GjReport, AuditError> {
        if self.fault {
            return Err(AuditError::DivisionByZero);
        }
        Ok(GjReport {
            max_degree: self.max_degree,
            predicate_count: self.predicates.len(),
            branch_events: self.branch_events,
        })
    }
}

impl GjContext for Tracer {
    type Scalar = TracedScalar;

    fn var(&mut self, index: usize, value: f64) -> TracedScalar {
        self.max_degree = self.max_degree.max(1);
        TracedScalar {
            value,
            num_deg: 1,
            den_deg: 0,
            node: mix(TAG_VAR, index as u64, 0),
        }
    }

    /// All constants share one node identity.
    fn constant(&mut self, value: f64) -> TracedScalar {
        TracedScalar {
            value,
            num_deg: 0,
            den_deg: 0,
            node: mix(TAG_CONST, 0, 0),
        }
    }

    fn arith(&mut self, op: Op, a: &TracedScalar, b: &TracedScalar) -> TracedScalar {
        let (num_deg, den_deg, tag, value) = match op {
            Op::Add => (
                (a.num_deg + b.den_deg).max(b.num_deg + a.den_deg),
                a.den_deg + b.den_deg,
                TAG_ADD,
                a.value + b.value,
            ),
            Op::Sub => (
                (a.num_deg + b.den_deg).max(b.num_deg + a.den_deg),
                a.den_deg + b.den_deg,
                TAG_SUB,
                a.value - b.value,
            ),
            Op::Mul => (
                a.num_deg + b.num_deg,
                a.den_deg + b.den_deg,
                TAG_MUL,
                a.value * b.value,
            ),
            Op::Div => {
                if b.value == 0.0 {
                    self.fault = true;
                }
                (
                    a.num_deg + b.den_deg,
                    a.den_deg + b.num_deg,
                    TAG_DIV,
                    a.value / b.value,
                )
            }
        };
        self.max_degree = self.max_degree.max(num_deg.max(den_deg));
        TracedScalar {
            value,
            num_deg,
            den_deg,
            node: mix(tag, a.node, b.node),
        }
    }

    /// Records the branch predicate and evaluates the sign test on the value;
    /// the `Zero` kind uses the module's zero tolerance.
    fn branch(&mut self, v: &TracedScalar, kind: BranchKind) -> bool {
        self.predicates.insert((v.node, kind));
        self.branch_events += 1;
        match kind {
            BranchKind::NonNeg => v.value >= 0.0,
            BranchKind::NonPos => v.value <= 0.0,
            BranchKind::Zero => v.value.abs() <= BRANCH_ZERO_TOL,
        }
    }

    fn value(&self, v: &TracedScalar) -> f64 {
        v.value
    }
}

fn traced_input<C: GjContext>(ctx: &mut C, z: &DenseMatrix) -> Vec<Vec<C::Scalar>> {
    (0..z.rows())
        .map(|i| {
            (0..z.cols())
                .map(|j| ctx.var(i * z.cols() + j, z.get(i, j)))
                .collect()
        })
        .collect()
}

fn dot<C: GjContext>(ctx: &mut C, a: &[C::Scalar], b: &[C::Scalar]) -> C::Scalar {
    let mut acc = ctx.arith(Op::Mul, &a[0], &b[0]);
    for i in 1..a.len() {
        let term = ctx.arith(Op::Mul, &a[i], &b[i]);
        acc = ctx.arith(Op::Add, &acc, &term);
    }
    acc
}

// A · Bᵀ where both operands have the same column count.
fn mat_mul_t<C: GjContext>(
    ctx: &mut C,
    a: &[Vec<C::Scalar>],
    b: &[Vec<C::Scalar>],
) -> Vec<Vec<C::Scalar>> {
    a.iter()
        .map(|row_a| b.iter().map(|row_b| dot(ctx, row_a, row_b)).collect())
        .collect()
}

fn square_mul<C: GjContext>(
    ctx: &mut C,
    a: &[Vec<C::Scalar>],
    b: &[Vec<C::Scalar>],
) -> Vec<Vec<C::Scalar>> {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let col: Vec<C::Scalar> = (0..n).map(|l| b[l][j].clone()).collect();
                    dot(ctx, &a[i], &col)
                })
                .collect()
        })
        .collect()
}

/// Faddeev–LeVerrier over traced scalars: returns c_1..c_m of det(λI − M).
fn traced_char_poly<C: GjContext>(ctx: &mut C, m: &[Vec<C::Scalar>]) -> Vec<C::Scalar> {
    let n = m.len();
    let zero = ctx.constant(0.0);
    let mut coeffs: Vec<C::Scalar> = Vec::with_capacity(n);
    let mut mi = m.to_vec();
    for i in 1..=n {
        let mut trace = mi[0][0].clone();
        for j in 1..n {
            trace = ctx.arith(Op::Add, &trace, &mi[j][j]);
        }
        let neg_trace = ctx.arith(Op::Sub, &zero, &trace);
        let count = ctx.constant(i as f64);
        let ci = ctx.arith(Op::Div, &neg_trace, &count);
        coeffs.push(ci.clone());
        if i < n {
            let mut shifted = mi.clone();
            for j in 0..n {
                shifted[j][j] = ctx.arith(Op::Add, &shifted[j][j], &ci);
            }
            mi = square_mul(ctx, m, &shifted);
        }
    }
    coeffs
}

/// The characteristic-polynomial pseudo-inverse run under tracing. The input is
/// numerically pre-scaled to unit Frobenius norm before variables are created,
/// so the branch tolerance is meaningful; the scan itself branches on the m
/// coefficients only. Returns the traced Z† entries (cols×m).
pub fn traced_pinv_decell<C: GjContext>(ctx: &mut C, z: &DenseMatrix) -> Vec<Vec<C::Scalar>> {
    let m = z.rows();
    let cols = z.cols();
    let norm = z.frob_norm();
    let scaled = if norm > 0.0 { z.scale(1.0 / norm) } else { z.clone() };
    let zt = traced_input(ctx, &scaled);
    let gram = mat_mul_t(ctx, &zt, &zt);
    let coeffs = traced_char_poly(ctx, &gram);

    let mut rank = 0;
    for i in (1..=m).rev() {
        if !ctx.branch(&coeffs[i - 1], BranchKind::Zero) {
            rank = i;
            break;
        }
    }
    let zero = ctx.constant(0.0);
    if rank == 0 {
        return vec![vec![zero; m]; cols];
    }
    // T = M^{r−1} + c_1 M^{r−2} + ⋯ + c_{r−1} I
    let mut t: Vec<Vec<C::Scalar>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| ctx.constant(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for j in 1..rank {
        t = square_mul(ctx, &gram, &t);
        for i in 0..m {
            t[i][i] = ctx.arith(Op::Add, &t[i][i], &coeffs[j - 1]);
        }
    }
    // −(1/c_r)·Zᵀ·T, then undo the input pre-scaling by a constant factor
    let neg_cr = ctx.arith(Op::Sub, &zero, &coeffs[rank - 1]);
    let rescale = ctx.constant(if norm > 0.0 { 1.0 / norm } else { 1.0 });
    let mut out = vec![vec![zero; m]; cols];
    for c in 0..cols {
        for i in 0..m {
            let col: Vec<C::Scalar> = (0..m).map(|l| zt[l][c].clone()).collect();
            let t_col: Vec<C::Scalar> = (0..m).map(|l| t[l][i].clone()).collect();
            let num = dot(ctx, &col, &t_col);
            let unit = ctx.arith(Op::Div, &num, &neg_cr);
            out[c][i] = ctx.arith(Op::Mul, &unit, &rescale);
        }
    }
    out
}

/// The greedy row-selection projector run under tracing: each candidate row is
/// accepted when the traced det(YYᵀ) branches non-zero, then Z†Z comes from the
/// Cayley–Hamilton inverse of YYᵀ.
pub fn traced_pinv_greedy<C: GjContext>(ctx: &mut C, z: &DenseMatrix) -> Vec<Vec<C::Scalar>> {
    let m = z.rows();
    let cols = z.cols();
    let norm = z.frob_norm();
    let scaled = if norm > 0.0 { z.scale(1.0 / norm) } else { z.clone() };
    let zt = traced_input(ctx, &scaled);

    let mut selected: Vec<usize> = Vec::new();
    for i in 0..m {
        let mut candidate = selected.clone();
        candidate.push(i);
        let y: Vec<Vec<C::Scalar>> = candidate.iter().map(|&r| zt[r].clone()).collect();
        let gram = mat_mul_t(ctx, &y, &y);
        let coeffs = traced_char_poly(ctx, &gram);
        // det(YYᵀ) = (−1)^r c_r
        let r = candidate.len();
        let last = coeffs[r - 1].clone();
        let det = if r % 2 == 0 {
            last
        } else {
            let zero = ctx.constant(0.0);
            ctx.arith(Op::Sub, &zero, &last)
        };
        if !ctx.branch(&det, BranchKind::Zero) {
            selected = candidate;
        }
    }
    let zero = ctx.constant(0.0);
    if selected.is_empty() {
        return vec![vec![zero; cols]; cols];
    }
    let y: Vec<Vec<C::Scalar>> = selected.iter().map(|&r| zt[r].clone()).collect();
    let gram = mat_mul_t(ctx, &y, &y);
    let r = selected.len();
    let coeffs = traced_char_poly(ctx, &gram);
    // (YYᵀ)⁻¹ = −(1/c_r)(M^{r−1} + c_1 M^{r−2} + ⋯ + c_{r−1} I)
    let mut t: Vec<Vec<C::Scalar>> = (0..r)
        .map(|i| {
            (0..r)
                .map(|j| ctx.constant(if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    for j in 1..r {
        t = square_mul(ctx, &gram, &t);
        for i in 0..r {
            t[i][i] = ctx.arith(Op::Add, &t[i][i], &coeffs[j - 1]);
        }
    }
    let neg_cr = ctx.arith(Op::Sub, &zero, &coeffs[r - 1]);
    // projector = Yᵀ·(YYᵀ)⁻¹·Y, with the division folded into the last step
    let mut out = vec![vec![zero; cols]; cols];
    for a in 0..cols {
        for b in 0..cols {
            let mut acc: Option<C::Scalar> = None;
            for p in 0..r {
                for q in 0..r {
                    let ya = y[p][a].clone();
                    let yb = y[q][b].clone();
                    let prod = ctx.arith(Op::Mul, &ya, &t[p][q]);
                    let prod = ctx.arith(Op::Mul, &prod, &yb);
                    acc = Some(match acc {
                        None => prod,
                        Some(s) => ctx.arith(Op::Add, &s, &prod),
                    });
                }
            }
            let num = acc.unwrap();
            out[a][b] = ctx.arith(Op::Div, &num, &neg_cr);
        }
    }
    out
}

/// Runs the characteristic-polynomial pseudo-inverse under tracing over a whole
/// input suite and reports the union statistics.
pub fn audit_pinv_decell(suite: &[DenseMatrix]) -> Result<GjReport, AuditError> {
    let mut tracer = Tracer::new();
    for z in suite {
        traced_pinv_decell(&mut tracer, z);
    }
    tracer.report()
}

/// Same audit for the greedy row-selection algorithm.
pub fn audit_pinv_greedy(suite: &[DenseMatrix]) -> Result<GjReport, AuditError> {
    let mut tracer = Tracer::new();
    for z in suite {
        traced_pinv_greedy(&mut tracer, z);
    }
    tracer.report()
}

/// Matrices with `m` rows covering every rank 0..=m, all with `cols` columns
/// and a clear singular-value gap.
pub fn rank_covering_suite(m: usize, cols: usize, seed: u64) -> Vec<DenseMatrix> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Vec::with_capacity(m + 1);
    suite.push(DenseMatrix::zeros(m, cols));
    for rank in 1..=m {
        let left = DenseMatrix::from_vec(
            m,
            rank,
            (0..m * rank).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let right = DenseMatrix::from_vec(
            rank,
            cols,
            (0..rank * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        suite.push(left.matmul(&right));
    }
    suite
}

/// Matrices with varied row-dependence patterns: for every subset of rows, the
/// marked rows are linear combinations of the unmarked rows before them (or
/// zero when none precede), so the greedy selection takes a different path per
/// pattern.
pub fn mixed_dependence_suite(m: usize, cols: usize, seed: u64) -> Vec<DenseMatrix> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut suite = Vec::new();
    for pattern in 0..(1u32 << m) {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut independent: Vec<usize> = Vec::new();
        for i in 0..m {
            if pattern & (1 << i) == 0 {
                rows.push((0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect());
                independent.push(i);
            } else if independent.is_empty() {
                rows.push(vec![0.0; cols]);
            } else {
                let mut combo = vec![0.0; cols];
                for &j in &independent {
                    let w = rng.gen_range(-1.0..1.0);
                    for (c, x) in combo.iter_mut().enumerate() {
                        *x += w * rows[j][c];
                    }
                }
                rows.push(combo);
            }
        }
        suite.push(DenseMatrix::from_rows(&rows));
    }
    suite
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pinv::{pinv_decell, pinv_greedy_projector, DEFAULT_COEFF_TOL};

    #[test]
    fn degree_rules() {
        let mut t = Tracer::new();
        let x = t.var(0, 2.0);
        let y = t.var(1, 3.0);
        let xx = t.arith(Op::Mul, &x, &x);
        assert_eq!((xx.num_deg, xx.den_deg), (2, 0));
        assert_eq!(xx.value, 4.0);

        let frac = t.arith(Op::Div, &x, &y);
        assert_eq!((frac.num_deg, frac.den_deg), (1, 1));

        // (x·y + 1) ÷ x → (2, 1)
        let xy = t.arith(Op::Mul, &x, &y);
        let one = t.constant(1.0);
        let sum = t.arith(Op::Add, &xy, &one);
        let out = t.arith(Op::Div, &sum, &x);
        assert_eq!((out.num_deg, out.den_deg), (2, 1));
    }

    #[test]
    fn predicate_set_semantics() {
        let mut t = Tracer::new();
        let x = t.var(0, 1.0);
        let y = t.var(1, -1.0);
        let p = t.arith(Op::Mul, &x, &y);
        t.branch(&p, BranchKind::Zero);
        t.branch(&p, BranchKind::Zero); // same syntactic predicate
        let report = t.report().unwrap();
        assert_eq!(report.predicate_count, 1);
        assert_eq!(report.branch_events, 2);

        let q = t.arith(Op::Add, &x, &y);
        t.branch(&q, BranchKind::Zero);
        assert_eq!(t.report().unwrap().predicate_count, 2);
    }

    #[test]
    fn predicate_identity_is_value_independent() {
        // Same DAG shape over different numeric inputs: one predicate.
        let mut t = Tracer::new();
        for v in [1.0, 2.0, -3.0] {
            let x = t.var(0, v);
            let p = t.arith(Op::Mul, &x, &x);
            t.branch(&p, BranchKind::Zero);
        }
        assert_eq!(t.report().unwrap().predicate_count, 1);
    }

    #[test]
    fn division_by_zero_is_a_fault() {
        let mut t = Tracer::new();
        let x = t.var(0, 1.0);
        let z = t.constant(0.0);
        t.arith(Op::Div, &x, &z);
        assert!(matches!(t.report(), Err(AuditError::DivisionByZero)));
    }

    #[test]
    fn traced_decell_values_match_untraced() {
        let suite = rank_covering_suite(4, 6, 11);
        for z in &suite {
            let mut tracer = Tracer::new();
            let traced = traced_pinv_decell(&mut tracer, z);
            let plain = pinv_decell(z, DEFAULT_COEFF_TOL);
            for i in 0..z.cols() {
                for j in 0..z.rows() {
                    assert!(
                        (traced[i][j].value - plain.get(i, j)).abs() < 1e-9,
                        "mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn traced_greedy_values_match_untraced() {
        let suite = mixed_dependence_suite(3, 4, 13);
        for z in &suite {
            let mut tracer = Tracer::new();
            let traced = traced_pinv_greedy(&mut tracer, z);
            let plain = pinv_greedy_projector(z, BRANCH_ZERO_TOL);
            for i in 0..z.cols() {
                for j in 0..z.cols() {
                    assert!(
                        (traced[i][j].value - plain.get(i, j)).abs() < 1e-9,
                        "mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn decell_audit_m1() {
        let suite = rank_covering_suite(1, 3, 5);
        let report = audit_pinv_decell(&suite).unwrap();
        assert_eq!(report.predicate_count, 1);
    }

    #[test]
    fn decell_audit_predicates_and_degree() {
        for m in [3usize, 5] {
            let suite = rank_covering_suite(m, 6, 21 + m as u64);
            let report = audit_pinv_decell(&suite).unwrap();
            assert_eq!(report.predicate_count, m, "m={m}");
            assert!(report.max_degree <= 2 * m as u32, "m={m}: {}", report.max_degree);
        }
    }

    #[test]
    fn greedy_audit_full_rank_single_path() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = 3;
        let suite: Vec<DenseMatrix> = (0..4)
            .map(|_| {
                DenseMatrix::from_vec(m, 5, (0..m * 5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            })
            .collect();
        let report = audit_pinv_greedy(&suite).unwrap();
        assert_eq!(report.predicate_count, 3);
    }

    // Oracle for degree-bound soundness: scalars additionally carry an exact
    // univariate polynomial fraction in one distinguished input variable (all
    // other variables fixed at their numeric values). At every node the actual
    // numerator/denominator degrees must stay within the traced bounds.
    mod degree_oracle {
        use super::*;

        #[derive(Clone, Debug)]
        pub struct Poly(pub Vec<f64>); // coefficients, ascending powers

        impl Poly {
            fn trim(mut self) -> Poly {
                let scale = self.0.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
                while self.0.len() > 1 && self.0.last().unwrap().abs() <= 1e-9 * scale {
                    self.0.pop();
                }
                Poly(self.0)
            }

            pub fn degree(&self) -> u32 {
                let trimmed = self.clone().trim();
                if trimmed.0.len() == 1 && trimmed.0[0] == 0.0 {
                    0
                } else {
                    (trimmed.0.len() - 1) as u32
                }
            }

            fn mul(&self, other: &Poly) -> Poly {
                let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
                for (i, a) in self.0.iter().enumerate() {
                    for (j, b) in other.0.iter().enumerate() {
                        out[i + j] += a * b;
                    }
                }
                Poly(out).trim()
            }

            fn add(&self, other: &Poly, sign: f64) -> Poly {
                let len = self.0.len().max(other.0.len());
                Poly(
                    (0..len)
                        .map(|i| {
                            self.0.get(i).copied().unwrap_or(0.0)
                                + sign * other.0.get(i).copied().unwrap_or(0.0)
                        })
                        .collect(),
                )
                .trim()
            }
        }

        #[derive(Clone)]
        pub struct MirrorScalar {
            pub traced: TracedScalar,
            pub num: Poly,
            pub den: Poly,
        }

        pub struct MirrorCtx {
            pub inner: Tracer,
            pub target_var: usize,
        }

        impl MirrorCtx {
            fn check(&self, s: &MirrorScalar) {
                assert!(
                    s.num.degree() <= s.traced.num_deg,
                    "numerator degree {} exceeds bound {}",
                    s.num.degree(),
                    s.traced.num_deg
                );
                assert!(
                    s.den.degree() <= s.traced.den_deg,
                    "denominator degree {} exceeds bound {}",
                    s.den.degree(),
                    s.traced.den_deg
                );
            }
        }

        impl GjContext for MirrorCtx {
            type Scalar = MirrorScalar;

            fn var(&mut self, index: usize, value: f64) -> MirrorScalar {
                let num = if index == self.target_var {
                    Poly(vec![0.0, 1.0]) // the distinguished variable itself
                } else {
                    Poly(vec![value])
                };
                MirrorScalar {
                    traced: self.inner.var(index, value),
                    num,
                    den: Poly(vec![1.0]),
                }
            }

            fn constant(&mut self, value: f64) -> MirrorScalar {
                MirrorScalar {
                    traced: self.inner.constant(value),
                    num: Poly(vec![value]),
                    den: Poly(vec![1.0]),
                }
            }

            fn arith(&mut self, op: Op, a: &MirrorScalar, b: &MirrorScalar) -> MirrorScalar {
                let traced = self.inner.arith(op, &a.traced, &b.traced);
                let (num, den) = match op {
                    Op::Add => (
                        a.num.mul(&b.den).add(&b.num.mul(&a.den), 1.0),
                        a.den.mul(&b.den),
                    ),
                    Op::Sub => (
                        a.num.mul(&b.den).add(&b.num.mul(&a.den), -1.0),
                        a.den.mul(&b.den),
                    ),
                    Op::Mul => (a.num.mul(&b.num), a.den.mul(&b.den)),
                    Op::Div => (a.num.mul(&b.den), a.den.mul(&b.num)),
                };
                let out = MirrorScalar { traced, num, den };
                self.check(&out);
                out
            }

            fn branch(&mut self, v: &MirrorScalar, kind: BranchKind) -> bool {
                self.check(v);
                self.inner.branch(&v.traced, kind)
            }

            fn value(&self, v: &MirrorScalar) -> f64 {
                v.traced.value
            }
        }
    }

    #[test]
    fn degree_bounds_are_sound() {
        // Spot-check both audited algorithms at m ≤ 3 against the polynomial
        // oracle, distinguishing a few different input variables.
        for m in 1..=3usize {
            let suite = rank_covering_suite(m, 4, 90 + m as u64);
            for target in [0usize, m * 4 - 1] {
                for z in &suite {
                    let mut ctx = degree_oracle::MirrorCtx {
                        inner: Tracer::new(),
                        target_var: target,
                    };
                    traced_pinv_decell(&mut ctx, z);
                    let mut ctx = degree_oracle::MirrorCtx {
                        inner: Tracer::new(),
                        target_var: target,
                    };
                    traced_pinv_greedy(&mut ctx, z);
                }
            }
        }
    }

    #[test]
    fn greedy_audit_exceeds_decell_on_mixed_suite() {
        for m in [3usize, 4] {
            let suite = mixed_dependence_suite(m, 5, 31 + m as u64);
            let greedy = audit_pinv_greedy(&suite).unwrap();
            let decell = audit_pinv_decell(&suite).unwrap();
            assert!(greedy.predicate_count > m, "m={m}: {}", greedy.predicate_count);
            assert_eq!(decell.predicate_count, m);
            assert!(greedy.predicate_count > decell.predicate_count);
        }
    }
}

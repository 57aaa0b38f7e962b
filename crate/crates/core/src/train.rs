//! Surrogate-loss training of sketching matrices: closed-form loss and
//! gradient, SGD for fixed-support and dense sketches, and projected gradient
//! (iterative hard thresholding) when the sparsity pattern itself is learned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg::{frob_norm_sq, svd, DenseMatrix, LinalgError, DEFAULT_RANK_TOL};
use crate::scw::{scw_loss_fast, ScwError};
use crate::sketch::{project_top_s, random_sparse_init, SketchError};

/// Surrogate loss above this aborts the run as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e3;

/// How often the full training-set SCW loss is recorded alongside the
/// per-sample one.
pub const TRAIN_MEAN_STRIDE: usize = 50;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("matrix rank {rank} is below the target rank k={k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("training diverged at iteration {iteration}: surrogate loss {loss}")]
    Diverged { iteration: usize, loss: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("iterations must be at least 1")]
    ZeroIterations,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Scw(#[from] ScwError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Fix,
    Learn,
    Dense,
}

impl TrainMode {
    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::Fix => "fix",
            TrainMode::Learn => "learn",
            TrainMode::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Per-column sparsity budget; ignored in dense mode.
    pub s: usize,
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub surrogate_loss: f64,
    /// SCW loss on the instance touched this iteration.
    pub scw_loss_sampled: f64,
    /// Mean SCW loss over the whole training set, recorded every
    /// [`TRAIN_MEAN_STRIDE`] iterations.
    pub scw_loss_train_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub final_sketch: DenseMatrix,
    pub mode: TrainMode,
}

/// Cached compact left factor of an instance, shared by loss and gradient.
#[derive(Debug, Clone)]
pub struct InstanceFactors {
    /// U (n×r) from the compact SVD.
    pub u: DenseMatrix,
    pub rank: usize,
}

impl InstanceFactors {
    pub fn compute(a: &DenseMatrix) -> Result<Self, TrainError> {
        let f = svd(a, DEFAULT_RANK_TOL)?;
        Ok(InstanceFactors {
            u: f.u,
            rank: f.rank,
        })
    }
}

/// L̃(S, A) = ‖U_kᵀSᵀSU − I₀‖_F², with compact U when A is rank-deficient.
pub fn surrogate_loss_factored(
    s: &DenseMatrix,
    factors: &InstanceFactors,
    k: usize,
) -> Result<f64, TrainError> {
    let e = residual(s, factors, k)?;
    Ok(frob_norm_sq(&e))
}

pub fn surrogate_loss(s: &DenseMatrix, a: &DenseMatrix, k: usize) -> Result<f64, TrainError> {
    surrogate_loss_factored(s, &InstanceFactors::compute(a)?, k)
}

/// E = U_kᵀSᵀSU − I₀, shaped k×r.
fn residual(
    s: &DenseMatrix,
    factors: &InstanceFactors,
    k: usize,
) -> Result<DenseMatrix, TrainError> {
    if factors.rank < k {
        return Err(TrainError::RankDeficient {
            rank: factors.rank,
            k,
        });
    }
    let su = s.matmul(&factors.u); // m×r
    let su_k = su.leading_columns(k); // m×k
    let mut e = su_k.transpose().matmul(&su); // k×r
    for i in 0..k {
        e.set(i, i, e.get(i, i) - 1.0);
    }
    Ok(e)
}

/// Analytic gradient ∇L̃ = 2S(U_k E Uᵀ + U Eᵀ U_kᵀ), assembled as
/// 2((SU_k)EUᵀ + (SU)EᵀU_kᵀ) to keep every intermediate m-by-something.
pub fn surrogate_grad_factored(
    s: &DenseMatrix,
    factors: &InstanceFactors,
    k: usize,
) -> Result<DenseMatrix, TrainError> {
    Ok(surrogate_loss_grad_factored(s, factors, k)?.1)
}

/// Loss and gradient in one pass, sharing the SU product.
pub fn surrogate_loss_grad_factored(
    s: &DenseMatrix,
    factors: &InstanceFactors,
    k: usize,
) -> Result<(f64, DenseMatrix), TrainError> {
    if factors.rank < k {
        return Err(TrainError::RankDeficient {
            rank: factors.rank,
            k,
        });
    }
    let u = &factors.u;
    let u_k = u.leading_columns(k);
    let su = s.matmul(u); // m×r
    let su_k = su.leading_columns(k);
    let mut e = su_k.transpose().matmul(&su); // k×r
    for i in 0..k {
        e.set(i, i, e.get(i, i) - 1.0);
    }
    let loss = frob_norm_sq(&e);
    let term1 = su_k.matmul(&e).matmul(&u.transpose()); // m×n
    let term2 = su.matmul(&e.transpose()).matmul(&u_k.transpose()); // m×n
    Ok((loss, term1.add(&term2).scale(2.0)))
}

pub fn surrogate_grad(s: &DenseMatrix, a: &DenseMatrix, k: usize) -> Result<DenseMatrix, TrainError> {
    surrogate_grad_factored(s, &InstanceFactors::compute(a)?, k)
}

/// SGD over the dataset for fixed-support or dense sketches; one instance is
/// sampled uniformly per iteration, fix mode re-masks the iterate to the
/// initial support after every step.
pub fn sgd_train(
    dataset: &[DenseMatrix],
    m: usize,
    config: &TrainConfig,
) -> Result<TrainTrace, TrainError> {
    assert!(
        matches!(config.mode, TrainMode::Fix | TrainMode::Dense),
        "sgd_train handles fix and dense modes"
    );
    run_training(dataset, m, config)
}

/// Projected-gradient / IHT training: the same loop with Π_s applied after
/// every gradient step, so the support may move.
pub fn iht_train(
    dataset: &[DenseMatrix],
    m: usize,
    config: &TrainConfig,
) -> Result<TrainTrace, TrainError> {
    assert!(
        matches!(config.mode, TrainMode::Learn),
        "iht_train handles learn mode"
    );
    run_training(dataset, m, config)
}

fn run_training(
    dataset: &[DenseMatrix],
    m: usize,
    config: &TrainConfig,
) -> Result<TrainTrace, TrainError> {
    let factors: Vec<InstanceFactors> = dataset
        .iter()
        .map(InstanceFactors::compute)
        .collect::<Result<_, _>>()?;
    let data_refs: Vec<&DenseMatrix> = dataset.iter().collect();
    let factor_refs: Vec<&InstanceFactors> = factors.iter().collect();
    train_prepared(&data_refs, &factor_refs, m, config)
}

/// Training loop over a dataset whose SVD factors are already available, so
/// harness code can share the factorizations across many runs and splits.
pub fn train_prepared(
    dataset: &[&DenseMatrix],
    factors: &[&InstanceFactors],
    m: usize,
    config: &TrainConfig,
) -> Result<TrainTrace, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.iterations == 0 {
        return Err(TrainError::ZeroIterations);
    }
    assert_eq!(dataset.len(), factors.len());
    assert!(config.eta > 0.0);
    let n = dataset[0].rows();

    // Dense mode densifies a full-budget sparse init so all arms start from
    // comparable matrices.
    let init_s = match config.mode {
        TrainMode::Dense => m,
        _ => config.s,
    };
    let init = random_sparse_init(m, n, init_s, config.seed)?;
    let support = init.support();
    let mut sketch = init.densify();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5354_4550); // step stream
    let mut records = Vec::with_capacity(config.iterations);
    for iteration in 1..=config.iterations {
        let idx = rng.gen_range(0..dataset.len());
        let a = dataset[idx];
        let grad = surrogate_grad_factored(&sketch, factors[idx], config.k)?;
        let stepped = sketch.sub(&grad.scale(config.eta));
        sketch = match config.mode {
            TrainMode::Dense => stepped,
            TrainMode::Fix => {
                crate::sketch::sparsify_mask(&stepped, &support, config.s)?.densify()
            }
            TrainMode::Learn => project_top_s(&stepped, config.s)?.densify(),
        };
        let surrogate = surrogate_loss_factored(&sketch, factors[idx], config.k)?;
        if surrogate > DIVERGENCE_LIMIT {
            return Err(TrainError::Diverged {
                iteration,
                loss: surrogate,
            });
        }
        let scw_sampled = scw_loss_fast(&sketch, a, config.k)?;
        let scw_mean = if iteration % TRAIN_MEAN_STRIDE == 0 {
            let mut sum = 0.0;
            for inst in dataset {
                sum += scw_loss_fast(&sketch, inst, config.k)?;
            }
            Some(sum / dataset.len() as f64)
        } else {
            None
        };
        records.push(TraceRecord {
            iteration,
            surrogate_loss: surrogate,
            scw_loss_sampled: scw_sampled,
            scw_loss_train_mean: scw_mean,
        });
    }

    Ok(TrainTrace {
        records,
        final_sketch: sketch,
        mode: config.mode,
    })
}

//! Exact multi-output GP regression over current vectors.
//!
//! Training data are pseudo-targets: current vectors estimated along past
//! trajectories, each with an isotropic noise variance. The model is a
//! persistent value; appending targets returns a new model with a fresh
//! Cholesky factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_block_matrix, build_gram, eval_kernel, HyperParams, KernelKind, Mat2};
use crate::vec2::Vec2;

pub const DEFAULT_TARGET_NOISE_VAR: f64 = 1e-2;

/// First jitter level tried after an unjittered factorization fails,
/// relative to σ_W².
const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up, relative to σ_W².
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GpModel {
    hp: HyperParams,
    kind: KernelKind,
    target_noise_var: f64,
    positions: Vec<Vec2>,
    currents: Vec<Vec2>,
    factor: Option<Factor>,
}

#[derive(Debug, Clone)]
struct Factor {
    chol: Cholesky<f64, Dyn>,
    /// `(K_DD + (noise + jitter) I)⁻¹ W_D`
    alpha: DVector<f64>,
    jitter: f64,
}

/// Joint Gaussian prediction at a set of query points.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub mean: Vec<Vec2>,
    /// Dense `2N × 2N` covariance, `(u, v)` interleaved per query point.
    pub covariance: DMatrix<f64>,
}

impl Prediction {
    /// 2×2 marginal covariance of query `i`.
    pub fn marginal(&self, i: usize) -> Mat2 {
        self.covariance.fixed_view::<2, 2>(2 * i, 2 * i).into_owned()
    }
}

/// Posterior mean plus the block row sums `Σ_j Σ(q_i, q_j)` of the
/// posterior covariance, which is all the drift-conditioning step needs.
#[derive(Debug, Clone)]
pub struct RowSumPrediction {
    pub mean: Vec<Vec2>,
    pub cov_row_sums: Vec<Mat2>,
}

/// Serialized form of a model: hyperparameters and data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub hyper: HyperParams,
    pub kernel: KernelKind,
    pub target_noise_var: f64,
    pub positions_m: Vec<Vec2>,
    pub currents_mps: Vec<Vec2>,
}

impl GpModel {
    /// A zero-mean model without data.
    pub fn empty(hp: HyperParams, kind: KernelKind, target_noise_var: f64) -> Result<Self> {
        hp.validate()?;
        if !(target_noise_var >= 0.0 && target_noise_var.is_finite()) {
            return Err(Error::Config(format!(
                "target noise variance must be >= 0, got {target_noise_var}"
            )));
        }
        Ok(GpModel {
            hp,
            kind,
            target_noise_var,
            positions: Vec::new(),
            currents: Vec::new(),
            factor: None,
        })
    }

    pub fn with_data(
        hp: HyperParams,
        kind: KernelKind,
        target_noise_var: f64,
        positions: Vec<Vec2>,
        currents: Vec<Vec2>,
    ) -> Result<Self> {
        Self::empty(hp, kind, target_noise_var)?.add_pseudo_targets(&positions, &currents)
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hp
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn target_noise_var(&self) -> f64 {
        self.target_noise_var
    }

    pub fn positions(&self) -> &[Vec2] {
        &self.positions
    }

    pub fn currents(&self) -> &[Vec2] {
        &self.currents
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Jitter added on top of the target noise by the current factorization.
    pub fn jitter(&self) -> f64 {
        self.factor.as_ref().map_or(0.0, |f| f.jitter)
    }

    /// Total diagonal regularization of `K_DD` actually in use.
    pub fn effective_noise_var(&self) -> f64 {
        self.target_noise_var + self.jitter()
    }

    /// Returns a new model with `positions`/`currents` appended.
    pub fn add_pseudo_targets(&self, positions: &[Vec2], currents: &[Vec2]) -> Result<Self> {
        if positions.len() != currents.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions but {} currents",
                positions.len(),
                currents.len()
            )));
        }
        check_finite(positions, "pseudo-target position")?;
        check_finite(currents, "pseudo-target current")?;
        let mut next = GpModel {
            hp: self.hp,
            kind: self.kind,
            target_noise_var: self.target_noise_var,
            positions: self.positions.iter().chain(positions).copied().collect(),
            currents: self.currents.iter().chain(currents).copied().collect(),
            factor: None,
        };
        next.refactor()?;
        Ok(next)
    }

    fn refactor(&mut self) -> Result<()> {
        if self.positions.is_empty() {
            self.factor = None;
            return Ok(());
        }
        let gram = build_gram(&self.hp, self.kind, &self.positions);
        let targets = stack(&self.currents);
        let scale = self.hp.current_variance;
        let mut jitter = 0.0;
        loop {
            let mut k = gram.clone();
            for i in 0..k.nrows() {
                k[(i, i)] += self.target_noise_var + jitter;
            }
            let max_diag = k.diagonal().max();
            let floor = k.nrows() as f64 * f64::EPSILON * max_diag;
            if let Some(chol) = k
                .cholesky()
                .filter(|c| c.l_dirty().diagonal().iter().all(|&d| d * d > floor))
            {
                let alpha = chol.solve(&targets);
                self.factor = Some(Factor { chol, alpha, jitter });
                return Ok(());
            }
            jitter = if jitter == 0.0 {
                JITTER_START * scale
            } else {
                jitter * 10.0
            };
            if jitter > JITTER_MAX * scale * (1.0 + 1e-12) {
                return Err(Error::FactorizationFailure { jitter: jitter / 10.0 });
            }
            log::debug!("gram factorization failed, retrying with jitter {jitter:e}");
        }
    }

    /// Posterior mean and full covariance at `queries`.
    pub fn predict(&self, queries: &[Vec2]) -> Result<Prediction> {
        check_queries(queries)?;
        let mut cov = build_gram(&self.hp, self.kind, queries);
        let Some(f) = &self.factor else {
            return Ok(Prediction {
                mean: vec![Vec2::ZERO; queries.len()],
                covariance: cov,
            });
        };
        let k_dq = build_block_matrix(&self.hp, self.kind, &self.positions, queries);
        let mean = unstack(&k_dq.tr_mul(&f.alpha));
        let mut v = k_dq;
        f.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        cov -= v.tr_mul(&v);
        symmetrize(&mut cov);
        Ok(Prediction { mean, covariance: cov })
    }

    /// Posterior mean only.
    pub fn predict_mean(&self, queries: &[Vec2]) -> Vec<Vec2> {
        let Some(f) = &self.factor else {
            return vec![Vec2::ZERO; queries.len()];
        };
        queries
            .iter()
            .map(|&q| {
                let mut acc = Vec2::ZERO;
                for (i, &x) in self.positions.iter().enumerate() {
                    let k = eval_kernel(&self.hp, self.kind, x, q);
                    let (a0, a1) = (f.alpha[2 * i], f.alpha[2 * i + 1]);
                    acc.x += k[(0, 0)] * a0 + k[(1, 0)] * a1;
                    acc.y += k[(0, 1)] * a0 + k[(1, 1)] * a1;
                }
                acc
            })
            .collect()
    }

    /// Posterior mean and per-query block row sums of the posterior
    /// covariance, without forming the dense `2N × 2N` matrix.
    pub fn predict_row_sums(&self, queries: &[Vec2]) -> Result<RowSumPrediction> {
        check_queries(queries)?;
        let n = queries.len();
        let mut sums = vec![Mat2::zeros(); n];
        for i in 0..n {
            sums[i] += eval_kernel(&self.hp, self.kind, queries[i], queries[i]);
            for j in (i + 1)..n {
                let k = eval_kernel(&self.hp, self.kind, queries[i], queries[j]);
                sums[i] += k;
                sums[j] += k.transpose();
            }
        }
        let Some(f) = &self.factor else {
            return Ok(RowSumPrediction {
                mean: vec![Vec2::ZERO; n],
                cov_row_sums: sums,
            });
        };
        let k_dq = build_block_matrix(&self.hp, self.kind, &self.positions, queries);
        let mean = unstack(&k_dq.tr_mul(&f.alpha));
        // K_DQ E, where E stacks n identity blocks
        let mut k_dq_e = DMatrix::zeros(k_dq.nrows(), 2);
        for j in 0..n {
            k_dq_e += k_dq.columns(2 * j, 2);
        }
        let reduced = k_dq.tr_mul(&f.chol.solve(&k_dq_e));
        for (i, s) in sums.iter_mut().enumerate() {
            *s -= reduced.fixed_view::<2, 2>(2 * i, 0);
        }
        Ok(RowSumPrediction {
            mean,
            cov_row_sums: sums,
        })
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        ModelSnapshot {
            hyper: self.hp,
            kernel: self.kind,
            target_noise_var: self.target_noise_var,
            positions_m: self.positions.clone(),
            currents_mps: self.currents.clone(),
        }
    }

    pub fn from_snapshot(s: &ModelSnapshot) -> Result<Self> {
        Self::with_data(
            s.hyper,
            s.kernel,
            s.target_noise_var,
            s.positions_m.clone(),
            s.currents_mps.clone(),
        )
    }
}

/// Greedy thinning: a point is kept when it lies at least `min_spacing`
/// from every point kept before it.
pub fn downsample_targets(positions: &[Vec2], currents: &[Vec2], min_spacing: f64) -> (Vec<Vec2>, Vec<Vec2>) {
    debug_assert_eq!(positions.len(), currents.len());
    let min_sq = min_spacing * min_spacing;
    let mut kept_p: Vec<Vec2> = Vec::new();
    let mut kept_w = Vec::new();
    for (&p, &w) in positions.iter().zip(currents) {
        if kept_p.iter().all(|&k| (k - p).norm_sq() >= min_sq) {
            kept_p.push(p);
            kept_w.push(w);
        }
    }
    (kept_p, kept_w)
}

pub(crate) fn stack(v: &[Vec2]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|w| [w.x, w.y]))
}

pub(crate) fn unstack(v: &DVector<f64>) -> Vec<Vec2> {
    v.as_slice().chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

fn check_finite(points: &[Vec2], what: &str) -> Result<()> {
    match points.iter().position(|p| !p.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("{what} {i} is not finite"))),
        None => Ok(()),
    }
}

fn check_queries(queries: &[Vec2]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::InvalidInput("query set is empty".into()));
    }
    check_finite(queries, "query position")
}

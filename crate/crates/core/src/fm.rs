//! Factorization-machine scoring, fusion of the two component scores, and
//! the squared-error objective.

use rand::Rng;

use crate::nn::{uniform_matrix, Gradients, Matrix, ParamId, ParamStore};
use crate::{Error, Result};

pub const MIN_RATING: f64 = 1.0;
pub const MAX_RATING: f64 = 5.0;
/// `|R_col + R_eng|` below this falls back to `β = 0.5`.
pub const BETA_DENOMINATOR_GUARD: f64 = 1e-8;

/// One FM head: global bias, linear weights and pairwise factors.
#[derive(Clone, Debug)]
pub struct FmHead {
    pub bias: ParamId,
    pub linear: ParamId,
    pub factors: ParamId,
}

impl FmHead {
    /// Registers `<prefix>.bias` (1×1, set to `global_bias`), `<prefix>.linear`
    /// (`dim`×1) and `<prefix>.factors` (`dim`×`rank`).
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        rank: usize,
        global_bias: f64,
        rng: &mut R,
        scale: f64,
    ) -> Result<Self> {
        Ok(FmHead {
            bias: store.insert(&format!("{prefix}.bias"), Matrix::from_vec(1, 1, vec![global_bias]), false)?,
            linear: store.insert(&format!("{prefix}.linear"), uniform_matrix(rng, dim, 1, scale), true)?,
            factors: store.insert(&format!("{prefix}.factors"), uniform_matrix(rng, dim, rank, scale), true)?,
        })
    }

    pub fn bind(store: &ParamStore, prefix: &str) -> Option<Self> {
        Some(FmHead {
            bias: store.id(&format!("{prefix}.bias"))?,
            linear: store.id(&format!("{prefix}.linear"))?,
            factors: store.id(&format!("{prefix}.factors"))?,
        })
    }

    pub fn score(&self, store: &ParamStore, features: &[f64]) -> f64 {
        fm_score(
            features,
            store.value(self.bias).as_slice()[0],
            store.value(self.linear).as_slice(),
            store.value(self.factors),
        )
    }

    /// Adds `upstream · ∂score/∂θ` for the head's tensors and returns
    /// `upstream · ∂score/∂features`.
    pub fn backward(&self, store: &ParamStore, features: &[f64], upstream: f64, grads: &mut Gradients) -> Vec<f64> {
        let linear = store.value(self.linear).as_slice();
        let factors = store.value(self.factors);
        let (dim, rank) = factors.shape();
        let sums = factor_sums(features, factors);

        grads.dense_mut(self.bias, 1, 1).as_mut_slice()[0] += upstream;
        {
            let gl = grads.dense_mut(self.linear, dim, 1);
            for (g, &x) in gl.as_mut_slice().iter_mut().zip(features) {
                *g += upstream * x;
            }
        }
        let mut d_features = vec![0.0; dim];
        let gv = grads.dense_mut(self.factors, dim, rank);
        for j in 0..dim {
            let x = features[j];
            let vrow = factors.row(j);
            let mut df = linear[j];
            for l in 0..rank {
                let rest = sums[l] - vrow[l] * x;
                df += vrow[l] * rest;
                gv[(j, l)] += upstream * x * rest;
            }
            d_features[j] = upstream * df;
        }
        d_features
    }
}

fn factor_sums(features: &[f64], factors: &Matrix) -> Vec<f64> {
    factors.transposed_matvec(features)
}

/// `b0 + a·x + Σ_{j<k} ⟨v_j, v_k⟩ x_j x_k`, via the
/// `½ Σ_l [(Σ_j V_jl x_j)² − Σ_j V_jl² x_j²]` identity.
///
/// # Panics
/// If the feature width disagrees with `linear` or `factors`.
pub fn fm_score(features: &[f64], bias: f64, linear: &[f64], factors: &Matrix) -> f64 {
    assert_eq!(features.len(), linear.len(), "fm_score: feature/linear width");
    assert_eq!(features.len(), factors.rows(), "fm_score: feature/factor width");
    let first: f64 = linear.iter().zip(features).map(|(a, x)| a * x).sum();
    let mut pair = 0.0;
    for l in 0..factors.cols() {
        let mut s = 0.0;
        let mut sq = 0.0;
        for (j, &x) in features.iter().enumerate() {
            let t = factors[(j, l)] * x;
            s += t;
            sq += t * t;
        }
        pair += s * s - sq;
    }
    bias + first + 0.5 * pair
}

/// Ratio weight `R_col / (R_col + R_eng)`, or 0.5 when the denominator is
/// (near) zero or the ratio falls outside `[0, 1]`.
pub fn dynamic_beta(review_score: f64, engagement_score: f64) -> f64 {
    let denom = review_score + engagement_score;
    if denom.abs() > BETA_DENOMINATOR_GUARD {
        let beta = review_score / denom;
        if (0.0..=1.0).contains(&beta) {
            return beta;
        }
    }
    0.5
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fused {
    pub rating: f64,
    pub beta: f64,
}

/// `β·R_col + (1 − β)·R_eng + b_d + b_s` with the dynamic `β`.
pub fn fuse_predict(review_score: f64, engagement_score: f64, device_bias: f64, service_bias: f64) -> Result<Fused> {
    if ![review_score, engagement_score, device_bias, service_bias]
        .iter()
        .all(|x| x.is_finite())
    {
        return Err(Error::NonFinite("fusion input".into()));
    }
    let beta = dynamic_beta(review_score, engagement_score);
    Ok(Fused {
        rating: fuse_with_beta(beta, review_score, engagement_score, device_bias, service_bias),
        beta,
    })
}

pub fn fuse_with_beta(beta: f64, review_score: f64, engagement_score: f64, device_bias: f64, service_bias: f64) -> f64 {
    beta * review_score + (1.0 - beta) * engagement_score + device_bias + service_bias
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub min_rating: f64,
    pub max_rating: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda: 1e-5,
            min_rating: MIN_RATING,
            max_rating: MAX_RATING,
        }
    }
}

/// `Σ (R̂ − R)² + λ Σ‖θ‖²` over `(prediction, truth)` pairs and the
/// regularized tensors of `params`.
///
/// # Panics
/// On an empty batch.
pub fn batch_loss(pairs: &[(f64, f64)], params: &ParamStore, cfg: &LossConfig) -> f64 {
    assert!(!pairs.is_empty(), "batch_loss of an empty batch");
    let data: f64 = pairs.iter().map(|(p, t)| (p - t) * (p - t)).sum();
    data + cfg.lambda * params.l2_norm_squared()
}

/// Clips a raw prediction into the rating range for reporting.
pub fn clamp_output(rating: f64) -> f64 {
    rating.clamp(MIN_RATING, MAX_RATING)
}

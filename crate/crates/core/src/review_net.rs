//! Review branch: word embeddings, per-side contextual convolution, the
//! selective (bilinear relevance) layer, the abstraction convolution with
//! mean pooling, the shared sigmoid MLP, and the fused collection features.
//!
//! Sequence maps are position-major (`n × channels`), see [`crate::nn`].

use rand::Rng;

use crate::ingest::PAD_ID;
use crate::nn::{
    mean_pool, sigmoid, softmax, softmax_backward, uniform_matrix, window_conv,
    window_conv_backward, Axis, Gradients, Matrix, ParamId, ParamStore,
};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReviewNetConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Filters per bank; also the width of `t_dev`/`t_srv`.
    pub filters: usize,
    pub window: usize,
    pub abs_window: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Device,
    Service,
}

/// Handles of the review-branch tensors inside a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct ReviewNet {
    config: ReviewNetConfig,
    pub embed: ParamId,
    pub conv_device: ParamId,
    pub conv_service: ParamId,
    pub selective: ParamId,
    pub abstract_device: ParamId,
    pub abstract_service: ParamId,
    pub mlp_weight: ParamId,
    pub mlp_bias: ParamId,
}

/// Word lookup: row `i` is the embedding of `tokens[i]`. The padding id
/// maps to a zero row regardless of the table, and an empty collection
/// becomes a single padding row.
///
/// # Panics
/// If a token id is outside the embedding table.
pub fn embed_collection(tokens: &[u32], embed: &Matrix) -> Matrix {
    let e = embed.cols();
    let ids: &[u32] = if tokens.is_empty() { &[PAD_ID] } else { tokens };
    let mut out = Vec::with_capacity(ids.len() * e);
    for &t in ids {
        assert!(
            (t as usize) < embed.rows(),
            "token id {t} outside vocabulary of {}",
            embed.rows()
        );
        if t == PAD_ID {
            out.extend(std::iter::repeat_n(0.0, e));
        } else {
            out.extend_from_slice(embed.row(t as usize));
        }
    }
    Matrix::from_vec(ids.len(), e, out)
}

/// ReLU of the sliding-window convolution: one contextual vector per word.
pub fn contextual_conv(embeds: &Matrix, filters: &Matrix, window: usize) -> Matrix {
    let mut out = window_conv(embeds, filters, window);
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

/// Output of the selective layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Selective {
    /// `tanh(dⱼ · A · sₖ)`, `n × m`.
    pub relevance: Matrix,
    pub a_dev: Vec<f64>,
    pub a_srv: Vec<f64>,
}

/// Pairwise relevance between device words (`n × f`) and service words
/// (`m × f`), mean-pooled per word and softmax-normalized per side.
///
/// # Panics
/// On empty inputs or mismatched widths.
pub fn selective_weights(device: &Matrix, service: &Matrix, selective: &Matrix) -> Selective {
    let f = device.cols();
    assert!(device.rows() > 0 && service.rows() > 0, "selective layer needs n, m >= 1");
    assert_eq!(service.cols(), f, "device/service width mismatch");
    assert_eq!(selective.shape(), (f, f), "selective matrix must be f x f");
    let projected = device.matmul(selective);
    let mut relevance = projected.matmul_transposed(service);
    relevance.as_mut_slice().iter_mut().for_each(|v| *v = v.tanh());
    let g_dev = mean_pool(&relevance, Axis::Cols);
    let g_srv = mean_pool(&relevance, Axis::Rows);
    Selective {
        a_dev: softmax(&g_dev),
        a_srv: softmax(&g_srv),
        relevance,
    }
}

/// Scales word `j` (row `j`) by `weights[j]`.
pub fn apply_weights(context: &Matrix, weights: &[f64]) -> Matrix {
    assert_eq!(context.rows(), weights.len(), "one weight per word required");
    let mut out = context.clone();
    for (j, &w) in weights.iter().enumerate() {
        out.row_mut(j).iter_mut().for_each(|v| *v *= w);
    }
    out
}

/// Abstraction convolution followed by ReLU and mean pooling over positions.
pub fn abstract_features(weighted: &Matrix, filters: &Matrix, window: usize) -> Vec<f64> {
    mean_pool(&contextual_conv(weighted, filters, window), Axis::Rows)
}

/// Shared MLP: `sigmoid(W · h + b)`.
pub fn transform(pooled: &[f64], weight: &Matrix, bias: &[f64]) -> Vec<f64> {
    sigmoid(&crate::nn::affine(weight, pooled, bias))
}

/// `[t_dev ∘ t_srv, t_dev, t_srv]`.
pub fn collection_features(t_dev: &[f64], t_srv: &[f64]) -> Vec<f64> {
    assert_eq!(t_dev.len(), t_srv.len(), "t_dev and t_srv lengths differ");
    let mut out: Vec<f64> = t_dev.iter().zip(t_srv).map(|(a, b)| a * b).collect();
    out.extend_from_slice(t_dev);
    out.extend_from_slice(t_srv);
    out
}

/// One side's collection after lookup and contextual convolution. Depends
/// only on that side's tokens, so it can be reused across pairs.
#[derive(Clone, Debug)]
pub struct SideEncoding {
    side: Side,
    tokens: Vec<u32>,
    embeds: Matrix,
    context: Matrix,
}

impl SideEncoding {
    pub fn side(&self) -> Side {
        self.side
    }

    /// Contextual vectors, one row per word.
    pub fn context(&self) -> &Matrix {
        &self.context
    }

    pub fn len(&self) -> usize {
        self.context.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.context.rows() == 0
    }
}

/// Selective weights, transformed side vectors and the fused feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFeatures {
    pub a_dev: Vec<f64>,
    pub a_srv: Vec<f64>,
    pub t_dev: Vec<f64>,
    pub t_srv: Vec<f64>,
    pub collection: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Branch {
    weighted: Matrix,
    activated: Matrix,
    pooled: Vec<f64>,
}

/// Forward state of one pair, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ReviewPass {
    pub features: PairFeatures,
    relevance: Matrix,
    dev: Branch,
    srv: Branch,
}

impl ReviewNet {
    /// Registers the branch tensors. Embeddings are uniform(−`scale`,
    /// `scale`) with a zero padding row; weight matrices use Glorot-uniform
    /// bounds; the MLP bias starts at zero.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        config: ReviewNetConfig,
        rng: &mut R,
        scale: f64,
    ) -> Result<Self> {
        let ReviewNetConfig {
            vocab_size,
            embed_dim: e,
            filters: f,
            window: s,
            abs_window: sa,
        } = config;
        let mut embed_init = uniform_matrix(rng, vocab_size, e, scale);
        embed_init.row_mut(PAD_ID as usize).fill(0.0);
        let mut glorot = |rows: usize, cols: usize| {
            uniform_matrix(rng, rows, cols, (6.0 / (rows + cols) as f64).sqrt())
        };
        Ok(ReviewNet {
            config,
            embed: store.insert("review.embed", embed_init, true)?,
            conv_device: store.insert("review.conv_device", glorot(f, e * s), true)?,
            conv_service: store.insert("review.conv_service", glorot(f, e * s), true)?,
            selective: store.insert("review.selective", glorot(f, f), true)?,
            abstract_device: store.insert("review.abstract_device", glorot(f, f * sa), true)?,
            abstract_service: store.insert("review.abstract_service", glorot(f, f * sa), true)?,
            mlp_weight: store.insert("review.mlp_weight", glorot(f, f), true)?,
            mlp_bias: store.insert("review.mlp_bias", Matrix::zeros(f, 1), false)?,
        })
    }

    /// Re-binds handles in a store that already holds the branch tensors.
    pub fn bind(store: &ParamStore, config: ReviewNetConfig) -> Option<Self> {
        Some(ReviewNet {
            config,
            embed: store.id("review.embed")?,
            conv_device: store.id("review.conv_device")?,
            conv_service: store.id("review.conv_service")?,
            selective: store.id("review.selective")?,
            abstract_device: store.id("review.abstract_device")?,
            abstract_service: store.id("review.abstract_service")?,
            mlp_weight: store.id("review.mlp_weight")?,
            mlp_bias: store.id("review.mlp_bias")?,
        })
    }

    pub fn config(&self) -> ReviewNetConfig {
        self.config
    }

    /// Output width: `3f`.
    pub fn feature_dim(&self) -> usize {
        3 * self.config.filters
    }

    fn conv_id(&self, side: Side) -> ParamId {
        match side {
            Side::Device => self.conv_device,
            Side::Service => self.conv_service,
        }
    }

    fn abstract_id(&self, side: Side) -> ParamId {
        match side {
            Side::Device => self.abstract_device,
            Side::Service => self.abstract_service,
        }
    }

    pub fn encode(&self, store: &ParamStore, tokens: &[u32], side: Side) -> SideEncoding {
        let embeds = embed_collection(tokens, store.value(self.embed));
        let context = contextual_conv(&embeds, store.value(self.conv_id(side)), self.config.window);
        SideEncoding {
            side,
            tokens: tokens.to_vec(),
            embeds,
            context,
        }
    }

    fn branch(&self, store: &ParamStore, context: &Matrix, weights: &[f64], side: Side) -> Branch {
        let weighted = apply_weights(context, weights);
        let activated = contextual_conv(&weighted, store.value(self.abstract_id(side)), self.config.abs_window);
        let pooled = mean_pool(&activated, Axis::Rows);
        Branch {
            weighted,
            activated,
            pooled,
        }
    }

    pub fn forward(&self, store: &ParamStore, dev: &SideEncoding, srv: &SideEncoding) -> ReviewPass {
        debug_assert_eq!((dev.side, srv.side), (Side::Device, Side::Service));
        let sel = selective_weights(&dev.context, &srv.context, store.value(self.selective));
        let d = self.branch(store, &dev.context, &sel.a_dev, Side::Device);
        let s = self.branch(store, &srv.context, &sel.a_srv, Side::Service);
        let w1 = store.value(self.mlp_weight);
        let b1 = store.value(self.mlp_bias).as_slice();
        let t_dev = transform(&d.pooled, w1, b1);
        let t_srv = transform(&s.pooled, w1, b1);
        let collection = collection_features(&t_dev, &t_srv);
        ReviewPass {
            features: PairFeatures {
                a_dev: sel.a_dev,
                a_srv: sel.a_srv,
                t_dev,
                t_srv,
                collection,
            },
            relevance: sel.relevance,
            dev: d,
            srv: s,
        }
    }

    /// Back-propagates `d_features` (gradient w.r.t. the `3f` collection
    /// vector) into every branch tensor.
    pub fn backward(
        &self,
        store: &ParamStore,
        dev: &SideEncoding,
        srv: &SideEncoding,
        pass: &ReviewPass,
        d_features: &[f64],
        grads: &mut Gradients,
    ) {
        let f = self.config.filters;
        assert_eq!(d_features.len(), 3 * f, "collection gradient width");
        let pf = &pass.features;
        let (d_inter, rest) = d_features.split_at(f);
        let (d_tdev_direct, d_tsrv_direct) = rest.split_at(f);
        let dt_dev: Vec<f64> = (0..f).map(|i| d_inter[i] * pf.t_srv[i] + d_tdev_direct[i]).collect();
        let dt_srv: Vec<f64> = (0..f).map(|i| d_inter[i] * pf.t_dev[i] + d_tsrv_direct[i]).collect();

        let (mut d_ctx_dev, dg_dev) = self.branch_backward(store, dev, &pass.dev, &pf.a_dev, &pf.t_dev, &dt_dev, grads);
        let (mut d_ctx_srv, dg_srv) = self.branch_backward(store, srv, &pass.srv, &pf.a_srv, &pf.t_srv, &dt_srv, grads);

        // Relevance R = tanh(D A Sᵀ) with row means feeding the device side
        // and column means feeding the service side.
        let (n, m) = pass.relevance.shape();
        let mut d_pre = Matrix::zeros(n, m);
        for j in 0..n {
            let r_row = pass.relevance.row(j);
            let out = d_pre.row_mut(j);
            for k in 0..m {
                let dr = dg_dev[j] / m as f64 + dg_srv[k] / n as f64;
                out[k] = dr * (1.0 - r_row[k] * r_row[k]);
            }
        }
        let a = store.value(self.selective);
        let d_mat = &dev.context;
        let s_mat = &srv.context;
        // dD += dP · S · Aᵀ ; dS += dPᵀ · D · A ; dA += Dᵀ · dP · S
        let s_at = s_mat.matmul_transposed(a);
        d_ctx_dev.add_assign(&d_pre.matmul(&s_at));
        let d_a = d_mat.matmul(a);
        d_ctx_srv.add_assign(&d_pre.transposed_matmul(&d_a));
        let dp_s = d_pre.matmul(s_mat);
        grads.add_dense(self.selective, &d_mat.transposed_matmul(&dp_s));

        self.encoding_backward(store, dev, d_ctx_dev, grads);
        self.encoding_backward(store, srv, d_ctx_srv, grads);
    }

    /// Returns the gradient w.r.t. the side's contextual matrix through the
    /// weighting, and the gradient w.r.t. the pre-softmax scores `g`.
    #[allow(clippy::too_many_arguments)]
    fn branch_backward(
        &self,
        store: &ParamStore,
        enc: &SideEncoding,
        branch: &Branch,
        weights: &[f64],
        t: &[f64],
        dt: &[f64],
        grads: &mut Gradients,
    ) -> (Matrix, Vec<f64>) {
        let f = self.config.filters;
        let dz: Vec<f64> = dt.iter().zip(t).map(|(g, &y)| g * y * (1.0 - y)).collect();
        let w1 = store.value(self.mlp_weight);
        {
            let gw = grads.dense_mut(self.mlp_weight, f, f);
            for (i, &dzi) in dz.iter().enumerate() {
                for (g, &h) in gw.row_mut(i).iter_mut().zip(&branch.pooled) {
                    *g += dzi * h;
                }
            }
        }
        {
            let gb = grads.dense_mut(self.mlp_bias, f, 1);
            for (g, &v) in gb.as_mut_slice().iter_mut().zip(&dz) {
                *g += v;
            }
        }
        let d_pooled = w1.transposed_matvec(&dz);

        let n = branch.activated.rows();
        let mut d_act = Matrix::zeros(n, f);
        for h in 0..n {
            let act = branch.activated.row(h);
            for (j, out) in d_act.row_mut(h).iter_mut().enumerate() {
                if act[j] > 0.0 {
                    *out = d_pooled[j] / n as f64;
                }
            }
        }
        let abs_id = self.abstract_id(enc.side);
        let (d_weighted, d_filters) =
            window_conv_backward(&branch.weighted, store.value(abs_id), self.config.abs_window, &d_act);
        grads.add_dense(abs_id, &d_filters);

        let ctx = &enc.context;
        let mut d_ctx = Matrix::zeros(n, f);
        let mut d_weights = vec![0.0; n];
        for j in 0..n {
            let dw_row = d_weighted.row(j);
            d_weights[j] = dw_row.iter().zip(ctx.row(j)).map(|(a, b)| a * b).sum();
            for (o, &g) in d_ctx.row_mut(j).iter_mut().zip(dw_row) {
                *o = weights[j] * g;
            }
        }
        (d_ctx, softmax_backward(weights, &d_weights))
    }

    fn encoding_backward(&self, store: &ParamStore, enc: &SideEncoding, mut d_ctx: Matrix, grads: &mut Gradients) {
        for (g, &c) in d_ctx.as_mut_slice().iter_mut().zip(enc.context.as_slice()) {
            if c <= 0.0 {
                *g = 0.0;
            }
        }
        let conv_id = self.conv_id(enc.side);
        let (d_embeds, d_filters) =
            window_conv_backward(&enc.embeds, store.value(conv_id), self.config.window, &d_ctx);
        grads.add_dense(conv_id, &d_filters);
        // The padding row stays fixed at zero.
        for (h, &tok) in enc.tokens.iter().enumerate() {
            if tok != PAD_ID {
                grads.add_row(self.embed, tok as usize, d_embeds.row(h));
            }
        }
    }
}

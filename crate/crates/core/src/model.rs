//! Full rating model: review branch and engagement branch, one FM head each,
//! score fusion and per-entity biases.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engagement::{engagement_features, lookup_latent, EngagementNet};
use crate::ingest::{Vocabulary, PAD_ID};
use crate::fm::{dynamic_beta, fuse_with_beta, FmHead, BETA_DENOMINATOR_GUARD};
use crate::nn::{grad_check, GradCheckReport, Gradients, Matrix, ParamId, ParamStore};
use crate::review_net::{ReviewNet, ReviewNetConfig, ReviewPass, Side, SideEncoding};
use crate::{Error, Result};

/// Which components contribute and how their scores are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    /// Review component only (`β = 1`).
    ReviewOnly,
    /// Engagement component only (`β = 0`).
    EngagementOnly,
    /// Both components with fixed `β = 0.5`.
    FusedStatic,
    /// Both components with the dynamic `β`.
    FusedDynamic,
    /// Dynamic fusion with both heads' pairwise factors fixed at zero,
    /// i.e. two linear-regression heads.
    LinearFused,
}

impl ModelMode {
    pub const ALL: [ModelMode; 5] = [
        ModelMode::ReviewOnly,
        ModelMode::EngagementOnly,
        ModelMode::FusedStatic,
        ModelMode::FusedDynamic,
        ModelMode::LinearFused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelMode::ReviewOnly => "review-only",
            ModelMode::EngagementOnly => "engagement-only",
            ModelMode::FusedStatic => "fused-static",
            ModelMode::FusedDynamic => "fused-dynamic",
            ModelMode::LinearFused => "linear-fused",
        }
    }

    pub fn uses_review(self) -> bool {
        self != ModelMode::EngagementOnly
    }

    pub fn uses_engagement(self) -> bool {
        self != ModelMode::ReviewOnly
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ModelMode::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidArgument(format!("unknown mode {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// How the dynamic `β` is treated by back-propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaGradient {
    /// `β` is a constant coefficient for each pair.
    #[default]
    Stop,
    /// Differentiate through `β = R_col / (R_col + R_eng)`.
    Through,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub filters: usize,
    pub window: usize,
    pub abs_window: usize,
    pub latent_dim: usize,
    pub fm_rank: usize,
    /// Known devices; the tables hold one extra cold-start row.
    pub n_devices: usize,
    pub n_services: usize,
    pub mode: ModelMode,
    pub beta_gradient: BetaGradient,
    pub init_scale: f64,
    /// Initial value of both FM global biases.
    pub global_mean: f64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("filters", self.filters),
            ("window", self.window),
            ("abs_window", self.abs_window),
            ("latent_dim", self.latent_dim),
            ("fm_rank", self.fm_rank),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidArgument("vocab_size must include the reserved tokens".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) || !self.global_mean.is_finite() {
            return Err(Error::InvalidArgument("init_scale and global_mean must be finite".into()));
        }
        Ok(())
    }

    fn review_config(&self) -> ReviewNetConfig {
        ReviewNetConfig {
            vocab_size: self.vocab_size,
            embed_dim: self.embed_dim,
            filters: self.filters,
            window: self.window,
            abs_window: self.abs_window,
        }
    }
}

/// One device-service pair with the token ids of both collections.
#[derive(Clone, Debug, PartialEq)]
pub struct PairInput {
    pub device: usize,
    pub service: usize,
    pub device_tokens: Vec<u32>,
    pub service_tokens: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    /// Unclamped fused rating.
    pub rating: f64,
    pub beta: f64,
    pub review_score: f64,
    pub engagement_score: f64,
}

struct Forward {
    prediction: Prediction,
    review: Option<(SideEncoding, SideEncoding, ReviewPass)>,
    engagement: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    review: ReviewNet,
    engagement: EngagementNet,
    fm_review: FmHead,
    fm_engagement: FmHead,
    device_bias: ParamId,
    service_bias: ParamId,
}

impl Model {
    /// Fresh model. Tensors are registered in the same order for every mode,
    /// so models that differ only in mode start from identical weights.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new(seed);
        let scale = config.init_scale;
        let review = ReviewNet::register(&mut params, config.review_config(), &mut rng, scale)?;
        let engagement = EngagementNet::register(
            &mut params,
            config.n_devices,
            config.n_services,
            config.latent_dim,
            &mut rng,
            scale,
        )?;
        let fm_review = FmHead::register(
            &mut params,
            "fm_review",
            review.feature_dim(),
            config.fm_rank,
            config.global_mean,
            &mut rng,
            scale,
        )?;
        let fm_engagement = FmHead::register(
            &mut params,
            "fm_engagement",
            engagement.feature_dim(),
            config.fm_rank,
            config.global_mean,
            &mut rng,
            scale,
        )?;
        let device_bias = params.insert("bias.device", Matrix::zeros(config.n_devices + 1, 1), false)?;
        let service_bias = params.insert("bias.service", Matrix::zeros(config.n_services + 1, 1), false)?;
        let mut model = Model {
            config,
            params,
            review,
            engagement,
            fm_review,
            fm_engagement,
            device_bias,
            service_bias,
        };
        model.apply_mode();
        Ok(model)
    }

    /// Rebuilds a model around stored tensors, checking every shape.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let reference = Model::new(config.clone(), params.seed())?;
        if params.len() != reference.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                reference.params.len(),
                params.len()
            )));
        }
        for id in reference.params.ids() {
            let name = reference.params.name(id);
            let found = params
                .id(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if found != id || params.value(found).shape() != reference.params.value(id).shape() {
                return Err(Error::Checkpoint(format!("tensor {name} has the wrong position or shape")));
            }
        }
        let mut model = Model { params, ..reference };
        model.apply_mode();
        Ok(model)
    }

    fn apply_mode(&mut self) {
        let linear = self.config.mode == ModelMode::LinearFused;
        for head in [self.fm_review.factors, self.fm_engagement.factors] {
            if linear {
                self.params.value_mut(head).fill(0.0);
            }
            self.params.set_trainable(head, !linear);
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn mode(&self) -> ModelMode {
        self.config.mode
    }

    pub fn review_net(&self) -> &ReviewNet {
        &self.review
    }

    pub fn engagement_net(&self) -> &EngagementNet {
        &self.engagement
    }

    pub fn fm_heads(&self) -> (&FmHead, &FmHead) {
        (&self.fm_review, &self.fm_engagement)
    }

    /// Per-side encoding for reuse across pairs; `None` when the mode does
    /// not use the review component.
    pub fn encode(&self, tokens: &[u32], side: Side) -> Option<SideEncoding> {
        self.config
            .mode
            .uses_review()
            .then(|| self.review.encode(&self.params, tokens, side))
    }

    fn check_indices(&self, device: usize, service: usize) {
        assert!(device <= self.config.n_devices, "device index {device} out of range");
        assert!(service <= self.config.n_services, "service index {service} out of range");
    }

    fn beta_for(&self, review_score: f64, engagement_score: f64) -> f64 {
        match self.config.mode {
            ModelMode::ReviewOnly => 1.0,
            ModelMode::EngagementOnly => 0.0,
            ModelMode::FusedStatic => 0.5,
            ModelMode::FusedDynamic | ModelMode::LinearFused => dynamic_beta(review_score, engagement_score),
        }
    }

    fn forward_encoded(
        &self,
        device: usize,
        service: usize,
        encodings: Option<(SideEncoding, SideEncoding)>,
        fixed_beta: Option<f64>,
    ) -> Forward {
        self.check_indices(device, service);
        let mut review = None;
        let mut review_score = 0.0;
        if let Some((dev, srv)) = encodings {
            let pass = self.review.forward(&self.params, &dev, &srv);
            review_score = self.fm_review.score(&self.params, &pass.features.collection);
            review = Some((dev, srv, pass));
        }
        let mut engagement = None;
        let mut engagement_score = 0.0;
        if self.config.mode.uses_engagement() {
            let (vd, vs) = lookup_latent(&self.params, &self.engagement, device, service);
            let feats = engagement_features(&vd, &vs);
            engagement_score = self.fm_engagement.score(&self.params, &feats);
            engagement = Some((vd, vs, feats));
        }
        let beta = fixed_beta.unwrap_or_else(|| self.beta_for(review_score, engagement_score));
        let rating = fuse_with_beta(
            beta,
            review_score,
            engagement_score,
            self.params.value(self.device_bias).as_slice()[device],
            self.params.value(self.service_bias).as_slice()[service],
        );
        Forward {
            prediction: Prediction {
                rating,
                beta,
                review_score,
                engagement_score,
            },
            review,
            engagement,
        }
    }

    fn forward(&self, pair: &PairInput, fixed_beta: Option<f64>) -> Forward {
        let encodings = self.config.mode.uses_review().then(|| {
            (
                self.review.encode(&self.params, &pair.device_tokens, Side::Device),
                self.review.encode(&self.params, &pair.service_tokens, Side::Service),
            )
        });
        self.forward_encoded(pair.device, pair.service, encodings, fixed_beta)
    }

    pub fn predict(&self, pair: &PairInput) -> Prediction {
        self.forward(pair, None).prediction
    }

    /// Prediction from cached encodings (see [`Model::encode`]).
    pub fn predict_encoded(
        &self,
        device: usize,
        service: usize,
        device_encoding: Option<&SideEncoding>,
        service_encoding: Option<&SideEncoding>,
    ) -> Prediction {
        self.check_indices(device, service);
        let mut review_score = 0.0;
        if self.config.mode.uses_review() {
            let (dev, srv) = device_encoding
                .zip(service_encoding)
                .expect("review encodings required for this mode");
            let pass = self.review.forward(&self.params, dev, srv);
            review_score = self.fm_review.score(&self.params, &pass.features.collection);
        }
        let mut engagement_score = 0.0;
        if self.config.mode.uses_engagement() {
            let (vd, vs) = lookup_latent(&self.params, &self.engagement, device, service);
            engagement_score = self.fm_engagement.score(&self.params, &engagement_features(&vd, &vs));
        }
        let beta = self.beta_for(review_score, engagement_score);
        Prediction {
            rating: fuse_with_beta(
                beta,
                review_score,
                engagement_score,
                self.params.value(self.device_bias).as_slice()[device],
                self.params.value(self.service_bias).as_slice()[service],
            ),
            beta,
            review_score,
            engagement_score,
        }
    }

    /// Gradient of `(R̂ − target)²` for one pair. Returns the residual
    /// `R̂ − target` and the sparse gradient.
    pub fn pair_gradient(&self, pair: &PairInput, target: f64) -> (f64, Gradients) {
        self.pair_gradient_with(pair, target, None)
    }

    fn pair_gradient_with(&self, pair: &PairInput, target: f64, fixed_beta: Option<f64>) -> (f64, Gradients) {
        let fwd = self.forward(pair, fixed_beta);
        let p = fwd.prediction;
        let residual = p.rating - target;
        let upstream = 2.0 * residual;
        let mut grads = Gradients::new(self.params.len());
        grads.add_row(self.device_bias, pair.device, &[upstream]);
        grads.add_row(self.service_bias, pair.service, &[upstream]);

        let (mut d_review, mut d_engagement) = (p.beta, 1.0 - p.beta);
        let dynamic = matches!(self.config.mode, ModelMode::FusedDynamic | ModelMode::LinearFused);
        if fixed_beta.is_none() && dynamic && self.config.beta_gradient == BetaGradient::Through {
            let (rc, re) = (p.review_score, p.engagement_score);
            let denom = rc + re;
            let ratio_path = denom.abs() > BETA_DENOMINATOR_GUARD && (0.0..=1.0).contains(&(rc / denom));
            if ratio_path {
                let spread = rc - re;
                d_review += spread * re / (denom * denom);
                d_engagement -= spread * rc / (denom * denom);
            }
        }

        if let Some((dev, srv, pass)) = &fwd.review {
            let d_feat = self
                .fm_review
                .backward(&self.params, &pass.features.collection, upstream * d_review, &mut grads);
            self.review.backward(&self.params, dev, srv, pass, &d_feat, &mut grads);
        }
        if let Some((vd, vs, feats)) = &fwd.engagement {
            let d_feat = self
                .fm_engagement
                .backward(&self.params, feats, upstream * d_engagement, &mut grads);
            self.engagement
                .backward(pair.device, pair.service, vd, vs, &d_feat, &mut grads);
        }
        (residual, grads)
    }

    /// Training objective: mean squared error over `batch` plus
    /// `lambda · Σ‖θ‖²` over regularized tensors.
    pub fn objective(&self, batch: &[(PairInput, f64)], lambda: f64) -> f64 {
        self.objective_with(batch, lambda, None)
    }

    /// [`Model::objective`] with each pair's `β` held at the given value.
    pub fn objective_fixed_beta(&self, batch: &[(PairInput, f64)], betas: &[f64], lambda: f64) -> f64 {
        assert_eq!(batch.len(), betas.len(), "one beta per pair");
        self.objective_with(batch, lambda, Some(betas))
    }

    fn objective_with(&self, batch: &[(PairInput, f64)], lambda: f64, betas: Option<&[f64]>) -> f64 {
        assert!(!batch.is_empty(), "objective of an empty batch");
        let sq: f64 = batch
            .iter()
            .enumerate()
            .map(|(i, (pair, target))| {
                let r = self.forward(pair, betas.map(|b| b[i])).prediction.rating - target;
                r * r
            })
            .sum();
        sq / batch.len() as f64 + lambda * self.params.l2_norm_squared()
    }

    /// Fills the parameter gradient buffers with the gradient of
    /// [`Model::objective`] and returns the mean squared error of the batch.
    /// Pairs are processed in parallel; their contributions are added in
    /// batch order.
    pub fn accumulate_gradients(&mut self, batch: &[(PairInput, f64)], lambda: f64) -> f64 {
        self.accumulate_with(batch, lambda, None)
    }

    fn accumulate_with(&mut self, batch: &[(PairInput, f64)], lambda: f64, betas: Option<&[f64]>) -> f64 {
        assert!(!batch.is_empty(), "gradient of an empty batch");
        let per_pair: Vec<(f64, Gradients)> = batch
            .par_iter()
            .enumerate()
            .map(|(i, (pair, target))| self.pair_gradient_with(pair, *target, betas.map(|b| b[i])))
            .collect();
        self.params.zero_grads();
        let scale = 1.0 / batch.len() as f64;
        let mut sq = 0.0;
        for (residual, g) in &per_pair {
            sq += residual * residual;
            self.params.accumulate(g, scale);
        }
        self.params.add_l2_grad(lambda);
        sq * scale
    }

    /// Finite-difference check of the full objective on `batch`. With
    /// [`BetaGradient::Stop`], each pair's `β` is frozen at its value at the
    /// current parameters for both the analytic and numeric gradients.
    /// Overwrites embedding rows with vectors from a whitespace-separated
    /// text table, one `word v1 .. ve` entry per line. Words outside the
    /// vocabulary are ignored and the padding row is never touched.
    /// Returns the number of rows written.
    pub fn load_embeddings<R: BufRead>(&mut self, vocab: &Vocabulary, reader: R) -> Result<usize> {
        let id = self.review.embed;
        let dim = self.params.value(id).cols();
        let mut written = 0;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Vec<f64> = fields
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidArgument(format!("embedding line {}: {e}", lineno + 1)))?;
            if values.len() != dim || !values.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "embedding line {}: expected {dim} finite values, found {}",
                    lineno + 1,
                    values.len()
                )));
            }
            match vocab.id(word) {
                Some(t) if t != PAD_ID => {
                    self.params.value_mut(id).row_mut(t as usize).copy_from_slice(&values);
                    written += 1;
                }
                _ => {}
            }
        }
        Ok(written)
    }

    pub fn check_gradients(
        &mut self,
        batch: &[(PairInput, f64)],
        lambda: f64,
        eps: f64,
        coords_per_tensor: usize,
        seed: u64,
    ) -> Result<GradCheckReport> {
        let betas: Option<Vec<f64>> = (self.config.beta_gradient == BetaGradient::Stop)
            .then(|| batch.iter().map(|(p, _)| self.predict(p).beta).collect());
        self.accumulate_with(batch, lambda, betas.as_deref());
        let config = self.config.clone();
        let loss = |store: &ParamStore| {
            let probe = Model {
                params: store.clone(),
                config: config.clone(),
                ..self.clone()
            };
            probe.objective_with(batch, lambda, betas.as_deref())
        };
        grad_check(loss, &self.params, eps, coords_per_tensor, seed)
    }
}

/// Deterministic tiny model and batch for gradient checks: vocabulary 50,
/// embedding 8, 4 filters, latent 4, FM rank 2, collections of at most 12
/// tokens.
pub fn tiny_instance(mode: ModelMode, beta_gradient: BetaGradient, seed: u64) -> Result<(Model, Vec<(PairInput, f64)>)> {
    use rand::Rng;
    let config = ModelConfig {
        vocab_size: 50,
        embed_dim: 8,
        filters: 4,
        window: 3,
        abs_window: 2,
        latent_dim: 4,
        fm_rank: 2,
        n_devices: 5,
        n_services: 4,
        mode,
        beta_gradient,
        init_scale: 0.5,
        global_mean: 3.0,
    };
    let model = Model::new(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let tokens = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..=12);
        (0..n).map(|_| rng.random_range(1..50u32)).collect::<Vec<_>>()
    };
    let batch = (0..6)
        .map(|_| {
            let pair = PairInput {
                device: rng.random_range(0..=5),
                service: rng.random_range(0..=4),
                device_tokens: tokens(&mut rng),
                service_tokens: tokens(&mut rng),
            };
            (pair, rng.random_range(1..=5) as f64)
        })
        .collect();
    Ok((model, batch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::fuse_predict;

    #[test]
    fn embeddings_load_from_text_table() {
        let (mut model, _) = tiny_instance(ModelMode::FusedDynamic, BetaGradient::Stop, 1).unwrap();
        let words: Vec<String> = (0..48).map(|i| format!("w{i}")).collect();
        let vocab = Vocabulary::from_words(words);
        let row = |v: f64| vec![v; 8].iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let table = format!("w3 {}\nunknown {}\n\n<pad> {}\n", row(0.25), row(1.0), row(9.0));
        assert_eq!(model.load_embeddings(&vocab, table.as_bytes()).unwrap(), 1);
        let embed = model.params().value(model.review_net().embed);
        assert_eq!(embed.row(vocab.id("w3").unwrap() as usize), &[0.25; 8]);
        assert!(embed.row(PAD_ID as usize).iter().all(|&v| v != 9.0));
        assert!(model.load_embeddings(&vocab, "w3 1 2".as_bytes()).is_err());
        assert!(model.load_embeddings(&vocab, format!("w3 {}", row(f64::NAN)).as_bytes()).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in ModelMode::ALL {
            assert_eq!(m.name().parse::<ModelMode>().unwrap(), m);
        }
        assert!("lr".parse::<ModelMode>().is_err());
    }

    #[test]
    fn same_seed_same_weights_across_modes() {
        let (a, _) = tiny_instance(ModelMode::FusedDynamic, BetaGradient::Stop, 3).unwrap();
        let (b, _) = tiny_instance(ModelMode::ReviewOnly, BetaGradient::Stop, 3).unwrap();
        assert_eq!(a.params().values_snapshot(), b.params().values_snapshot());
        let (c, _) = tiny_instance(ModelMode::LinearFused, BetaGradient::Stop, 3).unwrap();
        let (_, fe) = c.fm_heads();
        assert!(c.params().value(fe.factors).as_slice().iter().all(|&v| v == 0.0));
        assert!(!c.params().is_trainable(fe.factors));
    }

    #[test]
    fn prediction_matches_fusion_oracle() {
        let (model, batch) = tiny_instance(ModelMode::FusedDynamic, BetaGradient::Stop, 9).unwrap();
        for (pair, _) in &batch {
            let p = model.predict(pair);
            let bd = model.params().value(model.device_bias).as_slice()[pair.device];
            let bs = model.params().value(model.service_bias).as_slice()[pair.service];
            let oracle = fuse_predict(p.review_score, p.engagement_score, bd, bs).unwrap();
            assert_eq!((p.rating, p.beta), (oracle.rating, oracle.beta));
            let dev = model.encode(&pair.device_tokens, Side::Device);
            let srv = model.encode(&pair.service_tokens, Side::Service);
            assert_eq!(model.predict_encoded(pair.device, pair.service, dev.as_ref(), srv.as_ref()), p);
        }
    }

    #[test]
    fn component_modes_fix_beta() {
        for (mode, beta) in [(ModelMode::ReviewOnly, 1.0), (ModelMode::EngagementOnly, 0.0), (ModelMode::FusedStatic, 0.5)] {
            let (model, batch) = tiny_instance(mode, BetaGradient::Stop, 1).unwrap();
            for (pair, _) in &batch {
                assert_eq!(model.predict(pair).beta, beta);
            }
        }
    }

    #[test]
    fn gradients_match_differences_in_every_mode() {
        for mode in ModelMode::ALL {
            for bg in [BetaGradient::Stop, BetaGradient::Through] {
                let (mut model, batch) = tiny_instance(mode, bg, 17).unwrap();
                let report = model.check_gradients(&batch, 1e-3, 1e-6, 48, 2).unwrap();
                assert!(report.max_rel_error() < 1e-4, "{mode} {bg:?}: {:?}", report.worst());
            }
        }
    }

    #[test]
    fn sparse_latent_gradient() {
        let (mut model, batch) = tiny_instance(ModelMode::EngagementOnly, BetaGradient::Stop, 4).unwrap();
        model.accumulate_gradients(&batch[..1], 0.0);
        let d = batch[0].0.device;
        let table = model.engagement_net().device_latent;
        let g = model.params().grad(table);
        for r in 0..g.rows() {
            if r != d {
                assert!(g.row(r).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn from_params_checks_layout() {
        let (model, _) = tiny_instance(ModelMode::FusedDynamic, BetaGradient::Stop, 2).unwrap();
        let rebuilt = Model::from_params(model.config().clone(), model.params().clone()).unwrap();
        assert_eq!(rebuilt.params().values_snapshot(), model.params().values_snapshot());
        let mut other = model.config().clone();
        other.latent_dim = 5;
        assert!(Model::from_params(other, model.params().clone()).is_err());
    }
}

//! Adversarial correctors: conditional GAN (cGAN), prior-fed GAN (mGAN) and
//! prior-fed GAN with a learnable skip blend (skipGAN).
//!
//! Every generator sees `[latent | x]`, where the latent column is the
//! prior's simulated response (mGAN, skipGAN) or Gaussian noise (cGAN). The
//! discriminator scores `[response | x]`. For skipGAN the fake response is
//! `(1 − w) · y_prior + w · y_gen` with `w = sigmoid(theta_w)`, so `w` is the
//! weight placed on the generator.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::misspec::PriorSampler;
use crate::neural::{
    bce_loss, init_network, Activation, AdamConfig, ForwardCache, GradientSet, Matrix, Network,
    OptimizerState,
};
use crate::scalar::Scalar;

/// Generator hidden widths.
pub const GENERATOR_HIDDEN: [usize; 5] = [50; 5];
/// Discriminator hidden widths.
pub const DISCRIMINATOR_HIDDEN: [usize; 2] = [25, 50];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GanVariant {
    CGan,
    MGan,
    SkipGan,
}

impl GanVariant {
    pub const ALL: [GanVariant; 3] = [GanVariant::CGan, GanVariant::MGan, GanVariant::SkipGan];

    pub fn name(self) -> &'static str {
        match self {
            GanVariant::CGan => "cgan",
            GanVariant::MGan => "mgan",
            GanVariant::SkipGan => "skipgan",
        }
    }

    /// Column label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            GanVariant::CGan => "cGAN",
            GanVariant::MGan => "mGAN",
            GanVariant::SkipGan => "skipGAN",
        }
    }

    pub fn uses_prior(self) -> bool {
        self != GanVariant::CGan
    }
}

impl fmt::Display for GanVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for GanVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cgan" => Ok(GanVariant::CGan),
            "mgan" => Ok(GanVariant::MGan),
            "skipgan" | "skip" => Ok(GanVariant::SkipGan),
            other => Err(format!(
                "unknown GAN variant `{other}` (expected cgan, mgan or skipgan)"
            )),
        }
    }
}

/// When the prior's simulated responses are redrawn during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorRefresh {
    #[default]
    Batch,
    Epoch,
}

/// Which output of a trained skipGAN is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalOutput {
    #[default]
    Blend,
    Generator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Width of the cGAN noise input.
    pub noise_dim: usize,
    pub d_steps_per_g_step: usize,
    pub refresh: PriorRefresh,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            epochs: 1000,
            batch_size: 32,
            learning_rate: 0.001,
            noise_dim: 1,
            d_steps_per_g_step: 1,
            refresh: PriorRefresh::Batch,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.noise_dim == 0 || self.d_steps_per_g_step == 0 {
            return Err(Error::InvalidArgument(
                "batch_size, noise_dim and d_steps_per_g_step must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Unconstrained skip logit; the generator weight is `sigmoid(theta_w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkipState<T> {
    pub theta_w: T,
}

impl<T: Scalar> SkipState<T> {
    /// Weight on the generator output, in `[0, 1]`.
    pub fn w_gan(&self) -> T {
        let t = self.theta_w;
        if t >= T::zero() {
            T::one() / (T::one() + (-t).exp())
        } else {
            let e = t.exp();
            e / (T::one() + e)
        }
    }

    /// State whose generator weight is exactly `w` (`0` and `1` map to ∓∞).
    pub fn with_weight(w: T) -> Self {
        SkipState {
            theta_w: (w / (T::one() - w)).ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub w_gan: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanModel<T> {
    pub variant: GanVariant,
    pub feature_dim: usize,
    pub noise_dim: usize,
    pub generator: Network<T>,
    pub discriminator: Network<T>,
    pub skip: Option<SkipState<T>>,
    pub history: Vec<EpochStats>,
}

/// Convex blend `(1 − w) · y_prior + w · y_gen`.
pub fn blend<T: Scalar>(y_prior: &[T], y_gen: &[T], w_gan: T) -> Vec<T> {
    let keep = T::one() - w_gan;
    y_prior
        .iter()
        .zip(y_gen)
        .map(|(&p, &g)| keep * p + w_gan * g)
        .collect()
}

/// Generator `[in, 50 × 5, 1]` (ReLU hidden, identity out) and discriminator
/// `[p + 1, 25, 50, 1]` (ReLU hidden, sigmoid out).
pub fn build_gan<T: Scalar, R: Rng + ?Sized>(
    variant: GanVariant,
    feature_dim: usize,
    config: &GanConfig,
    rng: &mut R,
) -> Result<GanModel<T>> {
    config.validate()?;
    if feature_dim == 0 {
        return Err(Error::InvalidArgument("feature_dim must be at least 1".into()));
    }
    let noise_dim = if variant == GanVariant::CGan {
        config.noise_dim
    } else {
        1
    };
    let mut g_dims = vec![feature_dim + noise_dim];
    g_dims.extend(GENERATOR_HIDDEN);
    g_dims.push(1);
    let mut g_act = vec![Activation::Relu; GENERATOR_HIDDEN.len()];
    g_act.push(Activation::Identity);
    let generator = init_network(&g_dims, &g_act, rng)?;

    let mut d_dims = vec![feature_dim + 1];
    d_dims.extend(DISCRIMINATOR_HIDDEN);
    d_dims.push(1);
    let mut d_act = vec![Activation::Relu; DISCRIMINATOR_HIDDEN.len()];
    d_act.push(Activation::Sigmoid);
    let discriminator = init_network(&d_dims, &d_act, rng)?;

    Ok(GanModel {
        variant,
        feature_dim,
        noise_dim,
        generator,
        discriminator,
        skip: (variant == GanVariant::SkipGan).then_some(SkipState { theta_w: T::zero() }),
        history: Vec::new(),
    })
}

impl<T: Scalar> GanModel<T> {
    pub fn w_gan(&self) -> Option<T> {
        self.skip.map(|s| s.w_gan())
    }

    fn check_batch(&self, x: &Matrix<T>) -> Result<()> {
        if x.cols() != self.feature_dim {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.feature_dim,
                x.cols()
            )));
        }
        Ok(())
    }

    /// Latent input for a batch: a fresh prior draw, or standard normal noise
    /// for cGAN.
    pub fn draw_latent<R: Rng + ?Sized>(
        &self,
        x: &Matrix<T>,
        sampler: Option<&PriorSampler<T>>,
        rng: &mut R,
    ) -> Result<Matrix<T>> {
        if self.variant.uses_prior() {
            let sampler = sampler.ok_or_else(|| {
                Error::InvalidArgument(format!("{} needs a fitted prior", self.variant))
            })?;
            Ok(Matrix::column(&sampler.sample(x, rng)?))
        } else {
            let vals = (0..x.rows() * self.noise_dim)
                .map(|_| T::standard_normal(rng))
                .collect();
            Matrix::from_vec(x.rows(), self.noise_dim, vals)
        }
    }

    fn generator_input(&self, x: &Matrix<T>, latent: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_batch(x)?;
        if latent.cols() != self.noise_dim || latent.rows() != x.rows() {
            return Err(Error::Shape(format!(
                "latent is {:?}, expected ({}, {})",
                latent.shape(),
                x.rows(),
                self.noise_dim
            )));
        }
        x.hstack_front(latent)
    }

    /// `G([latent | x])`.
    pub fn generator_output(&self, x: &Matrix<T>, latent: &Matrix<T>) -> Result<Vec<T>> {
        let input = self.generator_input(x, latent)?;
        Ok(self.generator.forward(&input)?.into_values())
    }

    /// Response column shown to the discriminator for a fake sample: the
    /// candidate itself, or for skipGAN the blend with the prior draw.
    pub fn fake_response(&self, y_candidate: &[T], y_prior: Option<&[T]>) -> Result<Vec<T>> {
        match (self.variant, self.skip) {
            (GanVariant::SkipGan, Some(skip)) => {
                let y_prior = y_prior.ok_or_else(|| {
                    Error::InvalidArgument("skipGAN blend needs the prior draw".into())
                })?;
                if y_prior.len() != y_candidate.len() {
                    return Err(Error::Shape("prior and generator lengths differ".into()));
                }
                Ok(blend(y_prior, y_candidate, skip.w_gan()))
            }
            (GanVariant::SkipGan, None) => {
                Err(Error::InvalidArgument("skipGAN model is missing its skip state".into()))
            }
            _ => Ok(y_candidate.to_vec()),
        }
    }

    /// Discriminator input `[response | x]` for a fake sample.
    pub fn discriminator_input(
        &self,
        x: &Matrix<T>,
        y_candidate: &[T],
        y_prior: Option<&[T]>,
    ) -> Result<Matrix<T>> {
        self.check_batch(x)?;
        let resp = self.fake_response(y_candidate, y_prior)?;
        x.hstack_front(&Matrix::column(&resp))
    }

    /// Discriminator input `[y_real | x]` for observed data.
    pub fn real_input(&self, x: &Matrix<T>, y_real: &[T]) -> Result<Matrix<T>> {
        self.check_batch(x)?;
        x.hstack_front(&Matrix::column(y_real))
    }

    pub fn discriminate(&self, input: &Matrix<T>) -> Result<Vec<T>> {
        Ok(self.discriminator.forward(input)?.into_values())
    }

    /// Point prediction for every row of `x`, using fresh prior draws (or noise).
    pub fn predict<R: Rng + ?Sized>(
        &self,
        x: &Matrix<T>,
        sampler: Option<&PriorSampler<T>>,
        rng: &mut R,
        output: EvalOutput,
    ) -> Result<Vec<T>> {
        let latent = self.draw_latent(x, sampler, rng)?;
        let y_gen = self.generator_output(x, &latent)?;
        match (self.variant, output) {
            (GanVariant::SkipGan, EvalOutput::Blend) => {
                self.fake_response(&y_gen, Some(latent.values()))
            }
            _ => Ok(y_gen),
        }
    }

    /// Repeats [`GanModel::predict`] `n_draws` times.
    pub fn posterior_predictive<R: Rng + ?Sized>(
        &self,
        x: &Matrix<T>,
        sampler: Option<&PriorSampler<T>>,
        rng: &mut R,
        n_draws: usize,
        output: EvalOutput,
    ) -> Result<PosteriorPredictive<T>> {
        if n_draws == 0 {
            return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
        }
        let mut draws = Matrix::zeros(x.rows(), n_draws);
        for d in 0..n_draws {
            let y = self.predict(x, sampler, rng, output)?;
            for (r, v) in y.into_iter().enumerate() {
                draws.set(r, d, v);
            }
        }
        let k = T::lit(n_draws as f64);
        let mut mean = Vec::with_capacity(x.rows());
        let mut std_dev = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = draws.row(r);
            let m = row.iter().copied().sum::<T>() / k;
            let var = if n_draws > 1 {
                row.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / (k - T::one())
            } else {
                T::zero()
            };
            mean.push(m);
            std_dev.push(var.sqrt());
        }
        Ok(PosteriorPredictive {
            draws,
            mean,
            std_dev,
        })
    }

    /// Trains in place for `config.epochs` epochs on standardized data.
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        x: &Matrix<T>,
        y: &[T],
        sampler: Option<&PriorSampler<T>>,
        config: &GanConfig,
        rng: &mut R,
    ) -> Result<()> {
        let mut trainer = Trainer::new(self, config)?;
        trainer.fit(self, x, y, sampler, rng)
    }

    /// Epoch history as CSV with header `epoch,d_loss,g_loss,w_gan`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("epoch,d_loss,g_loss,w_gan\n");
        for h in &self.history {
            let w = h.w_gan.map(|w| format!("{w:?}")).unwrap_or_default();
            s.push_str(&format!("{},{:?},{:?},{}\n", h.epoch, h.d_loss, h.g_loss, w));
        }
        s
    }

    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.history_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

/// Monte-Carlo draws of the corrected response, one column per draw.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorPredictive<T> {
    pub draws: Matrix<T>,
    pub mean: Vec<T>,
    pub std_dev: Vec<T>,
}

/// Generator loss with gradients for the generator weights and `theta_w`.
pub struct GeneratorGrad<T> {
    pub loss: T,
    pub grads: GradientSet<T>,
}

/// Optimizer state for one training run.
pub struct Trainer<T> {
    pub config: GanConfig,
    d_opt: OptimizerState<T>,
    g_opt: OptimizerState<T>,
}

fn labels<T: Scalar>(n: usize, v: f64) -> Vec<T> {
    vec![T::lit(v); n]
}

fn diverged<T: Scalar>(epoch: usize, what: &str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch,
            reason: format!("{what} is {v}"),
        })
    }
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: &mut GanModel<T>, config: &GanConfig) -> Result<Self> {
        config.validate()?;
        let adam = AdamConfig::with_rate(config.learning_rate);
        let d_opt = OptimizerState::for_params(adam, &model.discriminator.param_slices_mut());
        let mut g_shapes: Vec<usize> = model
            .generator
            .param_slices_mut()
            .iter()
            .map(|p| p.len())
            .collect();
        if model.skip.is_some() {
            g_shapes.push(1);
        }
        Ok(Trainer {
            config: config.clone(),
            d_opt,
            g_opt: OptimizerState::new(adam, &g_shapes),
        })
    }

    /// One discriminator update on real `[y | x]` (label 1) against the fake
    /// built from `y_gen` (label 0). Returns the summed real and fake BCE.
    pub fn discriminator_step(
        &mut self,
        model: &mut GanModel<T>,
        x: &Matrix<T>,
        y: &[T],
        y_gen: &[T],
        y_prior: Option<&[T]>,
    ) -> Result<T> {
        let n = x.rows();
        let real = model.real_input(x, y)?;
        let fake = model.discriminator_input(x, y_gen, y_prior)?;
        let d = &model.discriminator;
        let real_cache = d.forward_cached(&real)?;
        let fake_cache = d.forward_cached(&fake)?;
        let (real_loss, real_g) = bce_loss(real_cache.output().values(), &labels(n, 1.0))?;
        let (fake_loss, fake_g) = bce_loss(fake_cache.output().values(), &labels(n, 0.0))?;
        let mut grads = d.backward_cached(&real_cache, &Matrix::column(&real_g))?;
        grads.add_assign(&d.backward_cached(&fake_cache, &Matrix::column(&fake_g))?)?;
        let g = grads.param_slices();
        self.d_opt
            .step(&mut model.discriminator.param_slices_mut(), &g)?;
        Ok(real_loss + fake_loss)
    }

    /// Non-saturating generator loss `−mean log D(fake)` and its gradients,
    /// reusing a cached generator forward pass over `[latent | x]`.
    pub fn generator_gradients_cached(
        model: &GanModel<T>,
        x: &Matrix<T>,
        latent: &Matrix<T>,
        g_cache: &ForwardCache<T>,
    ) -> Result<GeneratorGrad<T>> {
        let n = x.rows();
        let y_gen = g_cache.output().values();
        let y_prior = model.variant.uses_prior().then(|| latent.values());
        let fake = model.discriminator_input(x, y_gen, y_prior)?;
        let d_cache = model.discriminator.forward_cached(&fake)?;
        let (loss, dp) = bce_loss(d_cache.output().values(), &labels(n, 1.0))?;
        let d_grads = model
            .discriminator
            .backward_cached(&d_cache, &Matrix::column(&dp))?;
        // Column 0 of the discriminator input is the response.
        let d_resp = d_grads.input.col(0);
        let (w, skip_grad) = match model.skip {
            Some(skip) => {
                let w = skip.w_gan();
                let dw = w * (T::one() - w);
                let yp = latent.values();
                let g_theta = d_resp
                    .iter()
                    .zip(y_gen)
                    .zip(yp)
                    .map(|((&d, &g), &p)| d * (g - p))
                    .sum::<T>()
                    * dw;
                (w, Some(g_theta))
            }
            None => (T::one(), None),
        };
        let upstream: Vec<T> = d_resp.iter().map(|&d| d * w).collect();
        let mut grads = model
            .generator
            .backward_cached(g_cache, &Matrix::column(&upstream))?;
        grads.skip = skip_grad;
        Ok(GeneratorGrad { loss, grads })
    }

    pub fn generator_gradients(
        model: &GanModel<T>,
        x: &Matrix<T>,
        latent: &Matrix<T>,
    ) -> Result<GeneratorGrad<T>> {
        let input = model.generator_input(x, latent)?;
        let cache = model.generator.forward_cached(&input)?;
        Self::generator_gradients_cached(model, x, latent, &cache)
    }

    fn apply_generator(&mut self, model: &mut GanModel<T>, grads: &GradientSet<T>) -> Result<()> {
        let skip_g = [grads.skip.unwrap_or_else(T::zero)];
        let mut g = grads.param_slices();
        let mut theta = model.skip.map(|s| [s.theta_w]);
        {
            let mut params = model.generator.param_slices_mut();
            if let Some(t) = theta.as_mut() {
                params.push(&mut t[..]);
                g.push(&skip_g[..]);
            }
            self.g_opt.step(&mut params, &g)?;
        }
        if let (Some(skip), Some(t)) = (model.skip.as_mut(), theta) {
            skip.theta_w = t[0];
        }
        Ok(())
    }

    /// One generator update with the discriminator frozen.
    pub fn generator_step(
        &mut self,
        model: &mut GanModel<T>,
        x: &Matrix<T>,
        latent: &Matrix<T>,
    ) -> Result<T> {
        let gg = Self::generator_gradients(model, x, latent)?;
        self.apply_generator(model, &gg.grads)?;
        Ok(gg.loss)
    }

    fn fit<R: Rng + ?Sized>(
        &mut self,
        model: &mut GanModel<T>,
        x: &Matrix<T>,
        y: &[T],
        sampler: Option<&PriorSampler<T>>,
        rng: &mut R,
    ) -> Result<()> {
        model.check_batch(x)?;
        if x.rows() != y.len() || y.is_empty() {
            return Err(Error::Shape(format!(
                "{} training rows but {} targets",
                x.rows(),
                y.len()
            )));
        }
        if model.variant.uses_prior() && sampler.is_none() {
            return Err(Error::InvalidArgument(format!(
                "{} needs a fitted prior",
                model.variant
            )));
        }
        let n = x.rows();
        let bs = self.config.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..self.config.epochs {
            order.shuffle(rng);
            let epoch_prior = match (self.config.refresh, model.variant.uses_prior()) {
                (PriorRefresh::Epoch, true) => Some(model.draw_latent(x, sampler, rng)?),
                _ => None,
            };
            let (mut d_sum, mut g_sum, mut batches) = (T::zero(), T::zero(), 0usize);
            for idx in order.chunks(bs) {
                let xb = x.select_rows(idx);
                let yb: Vec<T> = idx.iter().map(|&i| y[i]).collect();
                let latent_for = |model: &GanModel<T>, rng: &mut R| match &epoch_prior {
                    Some(all) => Ok(all.select_rows(idx)),
                    None => model.draw_latent(&xb, sampler, rng),
                };
                for _ in 1..self.config.d_steps_per_g_step {
                    let latent = latent_for(model, rng)?;
                    let y_gen = model.generator_output(&xb, &latent)?;
                    let y_prior = model.variant.uses_prior().then(|| latent.values());
                    self.discriminator_step(model, &xb, &yb, &y_gen, y_prior)
                        .map_err(|e| as_divergence(e, epoch))?;
                }
                let latent = latent_for(model, rng)?;
                let g_in = model.generator_input(&xb, &latent)?;
                let g_cache = model.generator.forward_cached(&g_in)?;
                let y_prior = model.variant.uses_prior().then(|| latent.values());
                let d_loss = self
                    .discriminator_step(model, &xb, &yb, g_cache.output().values(), y_prior)
                    .map_err(|e| as_divergence(e, epoch))?;
                diverged(epoch, "discriminator loss", d_loss)?;
                let gg = Self::generator_gradients_cached(model, &xb, &latent, &g_cache)?;
                diverged(epoch, "generator loss", gg.loss)?;
                self.apply_generator(model, &gg.grads)
                    .map_err(|e| as_divergence(e, epoch))?;
                d_sum = d_sum + d_loss;
                g_sum = g_sum + gg.loss;
                batches += 1;
            }
            if !model.generator.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: "generator weights became non-finite".into(),
                });
            }
            let k = T::lit(batches as f64);
            model.history.push(EpochStats {
                epoch: model.history.len(),
                d_loss: (d_sum / k).to_f64_lossy(),
                g_loss: (g_sum / k).to_f64_lossy(),
                w_gan: model.w_gan().map(|w| w.to_f64_lossy()),
            });
        }
        Ok(())
    }
}

fn as_divergence(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFiniteGradient { tensor } => Error::Diverged {
            epoch,
            reason: format!("non-finite gradient in tensor {tensor}"),
        },
        other => other,
    }
}

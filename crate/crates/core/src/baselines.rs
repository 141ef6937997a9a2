//! Parallel-data baselines trained on DTW-aligned frame pairs: a plain MSE
//! regressor and an LSGAN generator with an auxiliary MSE term.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::batching::{epoch_batches, steps_per_epoch};
use crate::cyclegan::{discriminator_loss_gradients, LossForm};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::net::{layer_dims, Gradients, Mlp, OptimizerState, DEFAULT_HIDDEN};
use crate::rng::{derive_seed, rng_for};

/// Row-aligned source/target frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelTrainSet {
    x: FeatureSequence,
    y: FeatureSequence,
}

impl ParallelTrainSet {
    pub fn new(x: FeatureSequence, y: FeatureSequence) -> Result<Self> {
        if x.frames() != y.frames() {
            return Err(Error::FrameCountMismatch {
                left: x.frames(),
                right: y.frames(),
            });
        }
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                actual: y.dim(),
                context: "parallel target width",
            });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &FeatureSequence {
        &self.x
    }

    pub fn y(&self) -> &FeatureSequence {
        &self.y
    }

    pub fn frames(&self) -> usize {
        self.x.frames()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    fn batches(&self, batch: usize, epochs: usize, seed: u64) -> impl Iterator<Item = Vec<Vec<usize>>> + '_ {
        let mut rng = rng_for(seed, "shuffle/pairs");
        let steps = steps_per_epoch(self.frames(), batch);
        let frames = self.frames();
        (0..epochs).map(move |_| epoch_batches(frames, batch, steps, &mut rng))
    }
}

fn check_same_shape(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<()> {
    if pred.dim() != target.dim() {
        return Err(Error::InvalidArgument(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    Ok(())
}

/// Mean over all entries of the squared difference.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    check_same_shape(pred, target)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.iter().zip(target.iter()).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

fn mse_output_gradient(pred: &Array2<f64>, target: ArrayView2<'_, f64>, weight: f64) -> Array2<f64> {
    let scale = 2.0 * weight / pred.len() as f64;
    (pred - &target) * scale
}

/// MSE of `net(x)` against `y` and its parameter gradient.
pub fn mse_gradients(net: &Mlp, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<(f64, Gradients)> {
    let cache = net.forward(x)?;
    let loss = mse_loss(cache.output().view(), y)?;
    let (grads, _) = net.backward(&cache, mse_output_gradient(cache.output(), y, 1.0).view())?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseBaselineConfig {
    pub learning_rate: f64,
    pub batch_frames: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
}

impl Default for MseBaselineConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_frames: 128,
            epochs: 60,
            seed: 0,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

fn check_schedule(batch: usize, epochs: usize) -> Result<()> {
    if batch == 0 || epochs == 0 {
        return Err(Error::InvalidArgument("batch_frames and epochs must be >= 1".into()));
    }
    Ok(())
}

/// Trains a regressor `x → y` on aligned pairs by mini-batch Adam on MSE.
/// Returns the network and the per-epoch mean batch MSE.
pub fn train_mse_baseline(data: &ParallelTrainSet, config: &MseBaselineConfig) -> Result<(Mlp, Vec<f64>)> {
    if data.frames() == 0 {
        return Err(Error::Empty("MSE baseline training data"));
    }
    check_schedule(config.batch_frames, config.epochs)?;
    let dims = layer_dims(data.dim(), &config.hidden, data.dim());
    let mut net = Mlp::new(&dims, derive_seed(config.seed, "init/G"))?;
    let mut opt = OptimizerState::adam(config.learning_rate)?;
    let (xs, ys) = (data.x.data(), data.y.data());
    let mut history = Vec::with_capacity(config.epochs);
    for (epoch, batches) in data
        .batches(config.batch_frames, config.epochs, config.seed)
        .enumerate()
    {
        let mut total = 0.0;
        for idx in &batches {
            let (loss, grads) = mse_gradients(&net, xs.select(Axis(0), idx).view(), ys.select(Axis(0), idx).view())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("MSE {loss} in epoch {}", epoch + 1)));
            }
            opt.apply_update(&mut net, &grads)?;
            total += loss;
        }
        history.push(total / batches.len() as f64);
    }
    Ok((net, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanBaselineConfig {
    pub mse_weight: f64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub batch_frames: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_form: LossForm,
    pub hidden: Vec<usize>,
}

impl Default for GanBaselineConfig {
    fn default() -> Self {
        Self {
            mse_weight: 1.0,
            lr_generator: 0.001,
            lr_discriminator: 0.0001,
            batch_frames: 128,
            epochs: 400,
            seed: 0,
            loss_form: LossForm::Lsgan,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GanLossReport {
    pub adv: f64,
    pub disc: f64,
    pub mse: f64,
    /// `adv + mse_weight · mse`
    pub total: f64,
}

impl GanLossReport {
    fn is_finite(&self) -> bool {
        [self.adv, self.disc, self.mse, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Generator loss `adv + mse_weight · MSE(G(x), y)` and its gradient for `G`.
pub fn gan_generator_gradients(
    generator: &Mlp,
    discriminator: &Mlp,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    form: LossForm,
    mse_weight: f64,
) -> Result<(f64, f64, Gradients)> {
    let gx = generator.forward(x)?;
    let on_fake = discriminator.forward(gx.output().view())?;
    let (adv, d_adv) = form.gen_terms(on_fake.output());
    let mse = mse_loss(gx.output().view(), y)?;
    let mut out_grad = discriminator.input_gradient(&on_fake, d_adv.view())?;
    if mse_weight != 0.0 {
        out_grad += &mse_output_gradient(gx.output(), y, mse_weight);
    }
    let (grads, _) = generator.backward(&gx, out_grad.view())?;
    Ok((adv, mse, grads))
}

/// Alternating LSGAN (or log-loss) training of a generator and one
/// discriminator on aligned pairs, with `y` as the real samples.
pub fn train_gan_baseline(
    data: &ParallelTrainSet,
    config: &GanBaselineConfig,
) -> Result<(Mlp, Mlp, Vec<GanLossReport>)> {
    if data.frames() == 0 {
        return Err(Error::Empty("GAN baseline training data"));
    }
    check_schedule(config.batch_frames, config.epochs)?;
    if !(config.mse_weight >= 0.0 && config.mse_weight.is_finite()) {
        return Err(Error::InvalidArgument("mse_weight must be finite and >= 0".into()));
    }
    let dim = data.dim();
    let mut generator = Mlp::new(
        &layer_dims(dim, &config.hidden, dim),
        derive_seed(config.seed, "init/G"),
    )?;
    let mut discriminator = Mlp::new(&layer_dims(dim, &config.hidden, 1), derive_seed(config.seed, "init/D"))?;
    let mut opt_g = OptimizerState::adam(config.lr_generator)?;
    let mut opt_d = OptimizerState::adam(config.lr_discriminator)?;
    let (xs, ys) = (data.x.data(), data.y.data());
    let mut history = Vec::with_capacity(config.epochs);
    for (epoch, batches) in data
        .batches(config.batch_frames, config.epochs, config.seed)
        .enumerate()
    {
        let mut sum = GanLossReport::default();
        for idx in &batches {
            let xb = xs.select(Axis(0), idx);
            let yb = ys.select(Axis(0), idx);
            let fake = generator.predict(xb.view())?;
            let (disc, grads_d) =
                discriminator_loss_gradients(&discriminator, yb.view(), fake.view(), config.loss_form)?;
            if !disc.is_finite() {
                return Err(Error::NonFinite(format!(
                    "discriminator loss {disc} in epoch {}",
                    epoch + 1
                )));
            }
            opt_d.apply_update(&mut discriminator, &grads_d)?;

            let (adv, mse, grads_g) = gan_generator_gradients(
                &generator,
                &discriminator,
                xb.view(),
                yb.view(),
                config.loss_form,
                config.mse_weight,
            )?;
            let report = GanLossReport {
                adv,
                disc,
                mse,
                total: adv + config.mse_weight * mse,
            };
            if !report.is_finite() {
                return Err(Error::NonFinite(format!(
                    "generator loss {report:?} in epoch {}",
                    epoch + 1
                )));
            }
            opt_g.apply_update(&mut generator, &grads_g)?;
            sum.adv += report.adv;
            sum.disc += report.disc;
            sum.mse += report.mse;
            sum.total += report.total;
        }
        let n = batches.len() as f64;
        history.push(GanLossReport {
            adv: sum.adv / n,
            disc: sum.disc / n,
            mse: sum.mse / n,
            total: sum.total / n,
        });
    }
    Ok((generator, discriminator, history))
}

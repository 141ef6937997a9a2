//! Cycle-consistent adversarial training over unpaired frame features.
//!
//! Two generators (`G: X → Y`, `F: Y → X`) and two discriminators (`D_X`,
//! `D_Y`) are trained by alternating updates: the discriminators descend
//! their adversarial losses, then the generators jointly descend
//! `adv_G + adv_F + λ·cycle`, where `cycle` penalizes both `F(G(x)) − x` and
//! `G(F(y)) − y` in L1.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::batching::{epoch_batches, steps_per_epoch};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::net::{layer_dims, ForwardCache, Gradients, Mlp, OptimizerState, DEFAULT_HIDDEN};
use crate::rng::{derive_seed, rng_for};

/// Probabilities are clamped to `[LOG_CLAMP, 1 − LOG_CLAMP]` inside logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LossForm {
    /// Least-squares adversarial loss on linear discriminator outputs.
    #[default]
    Lsgan,
    /// Log loss on sigmoid-squashed discriminator outputs.
    Log,
}

impl std::str::FromStr for LossForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lsgan" => Ok(LossForm::Lsgan),
            "log" => Ok(LossForm::Log),
            _ => Err(Error::InvalidArgument(format!("unknown loss form {s:?}"))),
        }
    }
}

impl std::fmt::Display for LossForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossForm::Lsgan => "lsgan",
            LossForm::Log => "log",
        })
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn mean(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.sum::<f64>() / n as f64
}

/// Discriminator and (non-saturating) generator losses of the log form,
/// given discriminator probabilities. Both are minimization losses.
pub fn adversarial_loss_log(p_real: &[f64], p_fake: &[f64]) -> (f64, f64) {
    let clamp = |p: f64| p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    let disc = -mean(p_real.iter().map(|&p| clamp(p).ln()), p_real.len())
        - mean(p_fake.iter().map(|&p| (1.0 - clamp(p)).ln()), p_fake.len());
    let gen = -mean(p_fake.iter().map(|&p| clamp(p).ln()), p_fake.len());
    (disc, gen)
}

/// `disc = mean (D(y) − 1)² + mean D(G(x))²`, `gen = mean (D(G(x)) − 1)²`.
pub fn adversarial_loss_lsgan(d_real: &[f64], d_fake: &[f64]) -> (f64, f64) {
    let disc =
        mean(d_real.iter().map(|d| (d - 1.0).powi(2)), d_real.len()) + mean(d_fake.iter().map(|d| d * d), d_fake.len());
    let gen = mean(d_fake.iter().map(|d| (d - 1.0).powi(2)), d_fake.len());
    (disc, gen)
}

impl LossForm {
    /// Discriminator loss on raw outputs with gradients for both batches.
    pub(crate) fn disc_terms(self, real: &Array2<f64>, fake: &Array2<f64>) -> (f64, Array2<f64>, Array2<f64>) {
        let (nr, nf) = (real.nrows() as f64, fake.nrows() as f64);
        match self {
            LossForm::Lsgan => {
                let (loss, _) = adversarial_loss_lsgan(real.as_slice().unwrap(), fake.as_slice().unwrap());
                (loss, real.mapv(|d| 2.0 * (d - 1.0) / nr), fake.mapv(|d| 2.0 * d / nf))
            }
            LossForm::Log => {
                let pr = real.mapv(sigmoid);
                let pf = fake.mapv(sigmoid);
                let (loss, _) = adversarial_loss_log(pr.as_slice().unwrap(), pf.as_slice().unwrap());
                (loss, pr.mapv(|p| -(1.0 - p) / nr), pf.mapv(|p| p / nf))
            }
        }
    }

    /// Generator loss on raw discriminator outputs for generated samples.
    pub(crate) fn gen_terms(self, fake: &Array2<f64>) -> (f64, Array2<f64>) {
        let nf = fake.nrows() as f64;
        match self {
            LossForm::Lsgan => {
                let (_, loss) = adversarial_loss_lsgan(&[], fake.as_slice().unwrap());
                (loss, fake.mapv(|d| 2.0 * (d - 1.0) / nf))
            }
            LossForm::Log => {
                let pf = fake.mapv(sigmoid);
                let (_, loss) = adversarial_loss_log(&[], pf.as_slice().unwrap());
                (loss, pf.mapv(|p| -(1.0 - p) / nf))
            }
        }
    }
}

fn l1_term(input: ArrayView2<'_, f64>, reconstruction: ArrayView2<'_, f64>) -> Result<f64> {
    if input.dim() != reconstruction.dim() {
        return Err(Error::InvalidArgument(format!(
            "cycle batch {:?} vs reconstruction {:?}",
            input.dim(),
            reconstruction.dim()
        )));
    }
    if input.nrows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = input
        .iter()
        .zip(reconstruction.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / input.nrows() as f64)
}

/// Per-frame L1 reconstruction error averaged over frames, for both cycle
/// directions.
pub fn cycle_loss(
    x: ArrayView2<'_, f64>,
    x_reconstructed: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    y_reconstructed: ArrayView2<'_, f64>,
) -> Result<f64> {
    Ok(l1_term(x, x_reconstructed)? + l1_term(y, y_reconstructed)?)
}

/// Subgradient of the per-frame-averaged L1 term, scaled by `weight`; 0 at 0.
fn l1_gradient(reconstruction: &Array2<f64>, input: ArrayView2<'_, f64>, weight: f64) -> Array2<f64> {
    let scale = weight / reconstruction.nrows() as f64;
    let mut g = reconstruction - &input;
    g.mapv_inplace(|d| {
        if d > 0.0 {
            scale
        } else if d < 0.0 {
            -scale
        } else {
            0.0
        }
    });
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub adv_g: f64,
    pub adv_f: f64,
    pub disc_x: f64,
    pub disc_y: f64,
    pub cycle: f64,
    pub total: f64,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        [self.adv_g, self.adv_f, self.disc_x, self.disc_y, self.cycle, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    pub fn mean(reports: &[LossReport]) -> LossReport {
        let n = reports.len().max(1) as f64;
        let mut acc = LossReport::default();
        for r in reports {
            acc.adv_g += r.adv_g;
            acc.adv_f += r.adv_f;
            acc.disc_x += r.disc_x;
            acc.disc_y += r.disc_y;
            acc.cycle += r.cycle;
            acc.total += r.total;
        }
        LossReport {
            adv_g: acc.adv_g / n,
            adv_f: acc.adv_f / n,
            disc_x: acc.disc_x / n,
            disc_y: acc.disc_y / n,
            cycle: acc.cycle / n,
            total: acc.total / n,
        }
    }
}

/// Generator-side objective `adv_G + adv_F + λ·cycle`.
pub fn full_objective(losses: &LossReport, lambda: f64) -> f64 {
    losses.adv_g + losses.adv_f + lambda * losses.cycle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleGanConfig {
    pub lambda: f64,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub batch_frames: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss_form: LossForm,
    pub hidden: Vec<usize>,
}

impl Default for CycleGanConfig {
    fn default() -> Self {
        Self {
            lambda: 10.0,
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

impl CycleGanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.lr_generator > 0.0 && self.lr_discriminator > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_frames == 0 {
            return bad("batch_frames must be >= 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        Ok(())
    }
}

/// `(G, F, D_X, D_Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleGanModel {
    pub g: Mlp,
    pub f: Mlp,
    pub d_x: Mlp,
    pub d_y: Mlp,
}

impl CycleGanModel {
    /// Fresh networks with independent seeds expanded from `seed`.
    pub fn new(feature_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let gen_dims = layer_dims(feature_dim, hidden, feature_dim);
        let disc_dims = layer_dims(feature_dim, hidden, 1);
        Self::from_parts(
            Mlp::new(&gen_dims, derive_seed(seed, "init/G"))?,
            Mlp::new(&gen_dims, derive_seed(seed, "init/F"))?,
            Mlp::new(&disc_dims, derive_seed(seed, "init/D_X"))?,
            Mlp::new(&disc_dims, derive_seed(seed, "init/D_Y"))?,
        )
    }

    pub fn from_parts(g: Mlp, f: Mlp, d_x: Mlp, d_y: Mlp) -> Result<Self> {
        let dim = g.input_dim();
        let widths = [
            g.output_dim(),
            f.input_dim(),
            f.output_dim(),
            d_x.input_dim(),
            d_y.input_dim(),
        ];
        if let Some(&w) = widths.iter().find(|&&w| w != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: w,
                context: "CycleGAN network widths",
            });
        }
        for d in [&d_x, &d_y] {
            if d.output_dim() != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    actual: d.output_dim(),
                    context: "discriminator output",
                });
            }
        }
        Ok(Self { g, f, d_x, d_y })
    }

    pub fn feature_dim(&self) -> usize {
        self.g.input_dim()
    }
}

/// Generator gradients and the loss terms they came from.
#[derive(Debug, Clone)]
pub struct GeneratorGradients {
    pub adv_g: f64,
    pub adv_f: f64,
    pub cycle: f64,
    pub g: Gradients,
    pub f: Gradients,
}

/// Gradients of `adv_G + adv_F + λ·cycle` for `G` and `F`. `cycle_weight =
/// None` drops the cycle term from the gradient entirely (its value is still
/// reported).
pub fn generator_gradients(
    model: &CycleGanModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    form: LossForm,
    cycle_weight: Option<f64>,
) -> Result<GeneratorGradients> {
    let gx = model.g.forward(x)?;
    let fy = model.f.forward(y)?;
    generator_gradients_cached(model, x, y, &gx, &fy, form, cycle_weight)
}

fn generator_gradients_cached(
    model: &CycleGanModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    gx: &ForwardCache,
    fy: &ForwardCache,
    form: LossForm,
    cycle_weight: Option<f64>,
) -> Result<GeneratorGradients> {
    let (g, f) = (&model.g, &model.f);
    // forward cycle X → Ŷ → X̂ and backward cycle Y → X̃ → Ỹ
    let fgx = f.forward(gx.output().view())?;
    let gfy = g.forward(fy.output().view())?;
    let dy_fake = model.d_y.forward(gx.output().view())?;
    let dx_fake = model.d_x.forward(fy.output().view())?;

    let (adv_g, d_adv_g) = form.gen_terms(dy_fake.output());
    let (adv_f, d_adv_f) = form.gen_terms(dx_fake.output());
    let cycle = cycle_loss(x, fgx.output().view(), y, gfy.output().view())?;

    let mut grad_gx = model.d_y.input_gradient(&dy_fake, d_adv_g.view())?;
    let mut grad_fy = model.d_x.input_gradient(&dx_fake, d_adv_f.view())?;
    let mut grads_g = Gradients::zeros_like(g);
    let mut grads_f = Gradients::zeros_like(f);

    if let Some(lambda) = cycle_weight {
        let (gf_outer, d_gx) = f.backward(&fgx, l1_gradient(fgx.output(), x, lambda).view())?;
        let (gg_outer, d_fy) = g.backward(&gfy, l1_gradient(gfy.output(), y, lambda).view())?;
        grads_f.add_assign(&gf_outer);
        grads_g.add_assign(&gg_outer);
        grad_gx += &d_gx;
        grad_fy += &d_fy;
    }

    let (gg_inner, _) = g.backward(gx, grad_gx.view())?;
    let (gf_inner, _) = f.backward(fy, grad_fy.view())?;
    grads_g.add_assign(&gg_inner);
    grads_f.add_assign(&gf_inner);

    Ok(GeneratorGradients {
        adv_g,
        adv_f,
        cycle,
        g: grads_g,
        f: grads_f,
    })
}

/// Discriminator losses and gradients; `D_X` sees `x` as real and `F(y)` as
/// fake, `D_Y` sees `y` as real and `G(x)` as fake.
#[derive(Debug, Clone)]
pub struct DiscriminatorGradients {
    pub disc_x: f64,
    pub disc_y: f64,
    pub d_x: Gradients,
    pub d_y: Gradients,
}

pub(crate) fn discriminator_loss_gradients(
    disc: &Mlp,
    real: ArrayView2<'_, f64>,
    fake: ArrayView2<'_, f64>,
    form: LossForm,
) -> Result<(f64, Gradients)> {
    let on_real = disc.forward(real)?;
    let on_fake = disc.forward(fake)?;
    let (loss, d_real, d_fake) = form.disc_terms(on_real.output(), on_fake.output());
    let (mut grads, _) = disc.backward(&on_real, d_real.view())?;
    let (fake_grads, _) = disc.backward(&on_fake, d_fake.view())?;
    grads.add_assign(&fake_grads);
    Ok((loss, grads))
}

pub fn discriminator_gradients(
    model: &CycleGanModel,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    form: LossForm,
) -> Result<DiscriminatorGradients> {
    let gx = model.g.predict(x)?;
    let fy = model.f.predict(y)?;
    let (disc_x, d_x) = discriminator_loss_gradients(&model.d_x, x, fy.view(), form)?;
    let (disc_y, d_y) = discriminator_loss_gradients(&model.d_y, y, gx.view(), form)?;
    Ok(DiscriminatorGradients {
        disc_x,
        disc_y,
        d_x,
        d_y,
    })
}

/// A model plus one optimizer per network.
#[derive(Debug, Clone)]
pub struct CycleGanTrainer {
    model: CycleGanModel,
    config: CycleGanConfig,
    opt_g: OptimizerState,
    opt_f: OptimizerState,
    opt_dx: OptimizerState,
    opt_dy: OptimizerState,
    steps: u64,
}

impl CycleGanTrainer {
    pub fn new(model: CycleGanModel, config: CycleGanConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            opt_g: OptimizerState::adam(config.lr_generator)?,
            opt_f: OptimizerState::adam(config.lr_generator)?,
            opt_dx: OptimizerState::adam(config.lr_discriminator)?,
            opt_dy: OptimizerState::adam(config.lr_discriminator)?,
            model,
            config,
            steps: 0,
        })
    }

    pub fn with_optimizers(mut self, generator: OptimizerState, discriminator: OptimizerState) -> Self {
        self.opt_g = generator.clone();
        self.opt_f = generator;
        self.opt_dx = discriminator.clone();
        self.opt_dy = discriminator;
        self
    }

    pub fn model(&self) -> &CycleGanModel {
        &self.model
    }

    pub fn into_model(self) -> CycleGanModel {
        self.model
    }

    pub fn config(&self) -> &CycleGanConfig {
        &self.config
    }

    /// One alternating update: both discriminators, then both generators
    /// against the updated discriminators.
    pub fn train_step(&mut self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<LossReport> {
        let form = self.config.loss_form;
        let gx = self.model.g.forward(x)?;
        let fy = self.model.f.forward(y)?;

        let (disc_x, grads_dx) = discriminator_loss_gradients(&self.model.d_x, x, fy.output().view(), form)?;
        let (disc_y, grads_dy) = discriminator_loss_gradients(&self.model.d_y, y, gx.output().view(), form)?;
        self.check_finite(&[("disc_x", disc_x), ("disc_y", disc_y)])?;
        self.opt_dx.apply_update(&mut self.model.d_x, &grads_dx)?;
        self.opt_dy.apply_update(&mut self.model.d_y, &grads_dy)?;

        // G and F are unchanged since the caches were taken
        let lambda = self.config.lambda;
        let gen = generator_gradients_cached(&self.model, x, y, &gx, &fy, form, Some(lambda))?;
        let report = LossReport {
            adv_g: gen.adv_g,
            adv_f: gen.adv_f,
            disc_x,
            disc_y,
            cycle: gen.cycle,
            total: gen.adv_g + gen.adv_f + lambda * gen.cycle,
        };
        self.check_finite(&[
            ("adv_g", report.adv_g),
            ("adv_f", report.adv_f),
            ("cycle", report.cycle),
        ])?;
        self.opt_g.apply_update(&mut self.model.g, &gen.g)?;
        self.opt_f.apply_update(&mut self.model.f, &gen.f)?;
        self.steps += 1;
        Ok(report)
    }

    /// Number of completed `train_step` calls.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Runs `config.epochs` epochs; see [`train`].
    pub fn fit(
        &mut self,
        x_data: &FeatureSequence,
        y_data: &FeatureSequence,
        mut on_epoch: impl FnMut(usize, &LossReport),
    ) -> Result<Vec<LossReport>> {
        if x_data.frames() == 0 || y_data.frames() == 0 {
            return Err(Error::Empty("CycleGAN training data"));
        }
        let config = self.config.clone();
        let mut shuffle_x = rng_for(config.seed, "shuffle/X");
        let mut shuffle_y = rng_for(config.seed, "shuffle/Y");
        let steps = steps_per_epoch(x_data.frames().max(y_data.frames()), config.batch_frames);
        let (xs, ys) = (x_data.data(), y_data.data());
        let mut history = Vec::with_capacity(config.epochs);
        for epoch in 0..config.epochs {
            let bx = epoch_batches(x_data.frames(), config.batch_frames, steps, &mut shuffle_x);
            let by = epoch_batches(y_data.frames(), config.batch_frames, steps, &mut shuffle_y);
            let mut reports = Vec::with_capacity(steps);
            for (ix, iy) in bx.iter().zip(&by) {
                let xb = xs.select(Axis(0), ix);
                let yb = ys.select(Axis(0), iy);
                reports.push(self.train_step(xb.view(), yb.view())?);
            }
            let summary = LossReport::mean(&reports);
            log::debug!(
                "epoch {} cycle {:.4} total {:.4}",
                epoch + 1,
                summary.cycle,
                summary.total
            );
            on_epoch(epoch, &summary);
            history.push(summary);
        }
        Ok(history)
    }

    fn check_finite(&self, values: &[(&str, f64)]) -> Result<()> {
        if let Some((name, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
            let all: Vec<String> = values.iter().map(|(n, v)| format!("{n}={v}")).collect();
            return Err(Error::NonFinite(format!(
                "{name} = {v} at step {} ({})",
                self.steps,
                all.join(", ")
            )));
        }
        Ok(())
    }
}

/// Runs `config.epochs` epochs of nonparallel training. Each epoch draws
/// `max(T_x, T_y) / batch` batches from independent seeded shuffles of the
/// two datasets and pairs them positionally. Returns the per-epoch mean
/// losses.
pub fn train(
    model: CycleGanModel,
    x_data: &FeatureSequence,
    y_data: &FeatureSequence,
    config: &CycleGanConfig,
) -> Result<(CycleGanModel, Vec<LossReport>)> {
    train_with(model, x_data, y_data, config, |_, _| {})
}

pub fn train_with(
    model: CycleGanModel,
    x_data: &FeatureSequence,
    y_data: &FeatureSequence,
    config: &CycleGanConfig,
    on_epoch: impl FnMut(usize, &LossReport),
) -> Result<(CycleGanModel, Vec<LossReport>)> {
    let mut trainer = CycleGanTrainer::new(model, config.clone())?;
    let history = trainer.fit(x_data, y_data, on_epoch)?;
    Ok((trainer.into_model(), history))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Direction {
    /// Through `G`.
    #[default]
    #[serde(rename = "x2y")]
    XToY,
    /// Through `F`.
    #[serde(rename = "y2x")]
    YToX,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x2y" => Ok(Direction::XToY),
            "y2x" => Ok(Direction::YToX),
            _ => Err(Error::InvalidArgument(format!("unknown direction {s:?} (x2y|y2x)"))),
        }
    }
}

pub fn convert_frames(model: &CycleGanModel, x: &FeatureSequence, direction: Direction) -> Result<FeatureSequence> {
    let net = match direction {
        Direction::XToY => &model.g,
        Direction::YToX => &model.f,
    };
    FeatureSequence::new(x.kind(), net.predict(x.data())?)
}

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::align::{dtw_align_leading, paired_frames};
use crate::baselines::{
    train_gan_baseline, train_mse_baseline, GanBaselineConfig, MseBaselineConfig, ParallelTrainSet,
};
use crate::cyclegan::{train as train_cyclegan, CycleGanConfig, CycleGanModel, LossForm};
use crate::error::{Error, Result, ResultExt};
use crate::features::{normalize, FeatureKind, FeatureSequence, AUGMENTED_DIMS, LOWER_DIMS};
use crate::format::write_text;
use crate::net::DEFAULT_HIDDEN;
use crate::rng::derive_seed;

use super::model::{save_model, Manifest, Method, Role};
use super::{augmented_lower, discover_utterances, load_utterance, SpeakerStats, Utterance, UtterancePaths};

/// Everything `train` needs: data and statistics locations plus the
/// trainer hyper-parameters shared by the three methods.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub source: Vec<PathBuf>,
    pub target: Vec<PathBuf>,
    /// CSV of `source,target` mel-cepstrum paths, relative to the file.
    pub pairs: Option<PathBuf>,
    pub source_stats: PathBuf,
    pub target_stats: PathBuf,
    pub model_dir: PathBuf,
    pub lambda: f64,
    pub batch_frames: usize,
    /// `None` picks the method default (400, or 60 for `mse-parallel`).
    pub epochs: Option<usize>,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub seed: u64,
    pub loss_form: LossForm,
    pub mse_weight: f64,
    pub hidden: Vec<usize>,
}

impl TrainConfig {
    pub fn new(
        method: Method,
        source_stats: impl Into<PathBuf>,
        target_stats: impl Into<PathBuf>,
        model_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            method,
            source: Vec::new(),
            target: Vec::new(),
            pairs: None,
            source_stats: source_stats.into(),
            target_stats: target_stats.into(),
            model_dir: model_dir.into(),
            lambda: 10.0,
            batch_frames: 128,
            epochs: None,
            lr_generator: 0.001,
            lr_discriminator: 0.0001,
            seed: 0,
            loss_form: LossForm::Lsgan,
            mse_weight: 1.0,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }

    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(self.method.default_epochs())
    }

    pub fn cyclegan_config(&self) -> CycleGanConfig {
        CycleGanConfig {
            lambda: self.lambda,
            lr_generator: self.lr_generator,
            lr_discriminator: self.lr_discriminator,
            batch_frames: self.batch_frames,
            epochs: self.epochs(),
            seed: self.seed,
            loss_form: self.loss_form,
            hidden: self.hidden.clone(),
        }
    }

    pub fn gan_config(&self) -> GanBaselineConfig {
        GanBaselineConfig {
            mse_weight: self.mse_weight,
            lr_generator: self.lr_generator,
            lr_discriminator: self.lr_discriminator,
            batch_frames: self.batch_frames,
            epochs: self.epochs(),
            seed: self.seed,
            loss_form: self.loss_form,
            hidden: self.hidden.clone(),
        }
    }

    pub fn mse_config(&self) -> MseBaselineConfig {
        MseBaselineConfig {
            learning_rate: self.lr_generator,
            batch_frames: self.batch_frames,
            epochs: self.epochs(),
            seed: self.seed,
            hidden: self.hidden.clone(),
        }
    }

    fn check_paths(&self) -> Result<()> {
        let stats = [&self.source_stats, &self.target_stats];
        let inputs = self
            .source
            .iter()
            .chain(&self.target)
            .chain(self.pairs.as_ref())
            .chain(stats);
        for p in inputs {
            if !p.exists() {
                return Err(Error::InvalidArgument(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub manifest: Manifest,
    pub loss_header: Vec<&'static str>,
    /// One row per epoch, matching `loss_header` after the epoch column.
    pub loss_rows: Vec<Vec<f64>>,
    pub source_frames: usize,
    pub target_frames: usize,
}

/// Reads a `source,target` CSV of mel-cepstrum paths; relative entries are
/// resolved against the CSV's directory.
pub fn load_pairs(path: &Path) -> Result<Vec<(UtterancePaths, UtterancePaths)>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::from(e).in_file(path))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::from(e).in_file(path))?;
        if record.len() != 2 {
            return Err(Error::Format(format!("pairs row has {} fields, need 2", record.len())).in_file(path));
        }
        let resolve = |s: &str| UtterancePaths::from_mcep(&base.join(s));
        out.push((resolve(&record[0])?, resolve(&record[1])?));
    }
    if out.is_empty() {
        return Err(Error::Empty("pairs file lists no utterances").in_file(path));
    }
    Ok(out)
}

fn normalized(utt: &Utterance, stats: &SpeakerStats) -> Result<FeatureSequence> {
    normalize(&augmented_lower(&utt.mcep)?, &stats.norm)
}

fn pooled(parts: &[FeatureSequence]) -> Result<FeatureSequence> {
    FeatureSequence::concat(FeatureKind::Augmented75, parts)
}

fn write_loss_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for (epoch, row) in rows.iter().enumerate() {
        text.push_str(&(epoch + 1).to_string());
        for v in row {
            text.push(',');
            text.push_str(&v.to_string());
        }
        text.push('\n');
    }
    write_text(path, &text)
}

fn to_value(config: &impl Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(config)?)
}

/// Trains the configured method, then writes the networks, copied statistics,
/// `manifest.json` and `loss.csv` into the model directory.
pub fn cmd_train(config: &TrainConfig) -> Result<TrainSummary> {
    config.check_paths()?;
    let source_stats = SpeakerStats::read_dir(&config.source_stats)?;
    let target_stats = SpeakerStats::read_dir(&config.target_stats)?;
    for s in [&source_stats, &target_stats] {
        if s.norm.dim() != AUGMENTED_DIMS {
            return Err(Error::DimensionMismatch {
                expected: AUGMENTED_DIMS,
                actual: s.norm.dim(),
                context: "speaker normalization stats",
            });
        }
    }
    let pairs = config.pairs.as_deref().map(load_pairs).transpose()?;

    let (header, rows, source_frames, target_frames, manifest) = if config.method == Method::CycleGan {
        let (src_paths, tgt_paths) = match (&pairs, config.source.is_empty() && config.target.is_empty()) {
            (Some(p), true) => {
                log::warn!("cyclegan ignores the given alignment pairs; the two sides are used as unpaired sets");
                p.iter().cloned().unzip()
            }
            (p, _) => {
                if p.is_some() {
                    log::warn!("cyclegan ignores the given alignment pairs");
                }
                (
                    discover_utterances(&config.source)?,
                    discover_utterances(&config.target)?,
                )
            }
        };
        let load = |paths: &[UtterancePaths], stats: &SpeakerStats| -> Result<Vec<FeatureSequence>> {
            paths
                .iter()
                .map(|p| normalized(&load_utterance(p)?, stats).in_file(&p.mcep))
                .collect()
        };
        let x = pooled(&load(&src_paths, &source_stats)?)?;
        let y = pooled(&load(&tgt_paths, &target_stats)?)?;
        let cfg = config.cyclegan_config();
        cfg.validate()?;
        let model = CycleGanModel::new(AUGMENTED_DIMS, &cfg.hidden, cfg.seed)?;
        let (model, history) = train_cyclegan(model, &x, &y, &cfg)?;
        let rows: Vec<Vec<f64>> = history
            .iter()
            .map(|r| vec![r.adv_g, r.adv_f, r.disc_x, r.disc_y, r.cycle, r.total])
            .collect();
        let nets = [
            (Role::G, &model.g),
            (Role::F, &model.f),
            (Role::DX, &model.d_x),
            (Role::DY, &model.d_y),
        ];
        let manifest = save_model(
            &config.model_dir,
            Method::CycleGan,
            to_value(&cfg)?,
            &nets,
            &source_stats,
            &target_stats,
        )?;
        let header = vec!["epoch", "adv_G", "adv_F", "disc_X", "disc_Y", "cycle", "total"];
        (header, rows, x.frames(), y.frames(), manifest)
    } else {
        let pairs = pairs
            .ok_or_else(|| Error::InvalidArgument(format!("{} training needs a parallel pairs list", config.method)))?;
        if !config.source.is_empty() || !config.target.is_empty() {
            log::warn!("parallel training reads its utterances from the pairs list only");
        }
        let mut xs = Vec::with_capacity(pairs.len());
        let mut ys = Vec::with_capacity(pairs.len());
        for (sp, tp) in &pairs {
            let su = load_utterance(sp)?;
            let tu = load_utterance(tp)?;
            let path = dtw_align_leading(&su.mcep, &tu.mcep, LOWER_DIMS).in_file(&sp.mcep)?;
            let (x, y) = paired_frames(
                &normalized(&su, &source_stats)?,
                &normalized(&tu, &target_stats)?,
                &path,
            )?;
            xs.push(x);
            ys.push(y);
        }
        let data = ParallelTrainSet::new(pooled(&xs)?, pooled(&ys)?)?;
        let frames = data.frames();
        if config.method == Method::GanParallel {
            let cfg = config.gan_config();
            let (g, d, history) = train_gan_baseline(&data, &cfg)?;
            let rows = history.iter().map(|r| vec![r.adv, r.disc, r.mse, r.total]).collect();
            let manifest = save_model(
                &config.model_dir,
                Method::GanParallel,
                to_value(&cfg)?,
                &[(Role::G, &g), (Role::D, &d)],
                &source_stats,
                &target_stats,
            )?;
            (
                vec!["epoch", "adv_G", "disc_Y", "mse", "total"],
                rows,
                frames,
                frames,
                manifest,
            )
        } else {
            let cfg = config.mse_config();
            let (g, history) = train_mse_baseline(&data, &cfg)?;
            let rows = history.iter().map(|&m| vec![m]).collect();
            let manifest = save_model(
                &config.model_dir,
                Method::MseParallel,
                to_value(&cfg)?,
                &[(Role::G, &g)],
                &source_stats,
                &target_stats,
            )?;
            (vec!["epoch", "mse"], rows, frames, frames, manifest)
        }
    };
    write_loss_csv(&config.model_dir.join(&manifest.loss_history), &header, &rows)?;
    log::info!(
        "trained {} for {} epochs (seed {}, init/G seed {:#x})",
        config.method,
        rows.len(),
        config.seed,
        derive_seed(config.seed, "init/G")
    );
    Ok(TrainSummary {
        manifest,
        loss_header: header,
        loss_rows: rows,
        source_frames,
        target_frames,
    })
}

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::s;
use serde::{Deserialize, Serialize};

use crate::cyclegan::Direction;
use crate::error::{Error, Result, ResultExt};
use crate::features::{
    denormalize, merge_mcep, normalize, split_mcep, transform_f0, DeltaWindowSet, FeatureKind, FeatureSequence,
    LOWER_DIMS,
};
use crate::mlpg::{mlpg_generate, postfilter, GaussianTrajectory};

use super::model::{load_model, Method, Role, TrainedModel};
use super::{augmented_lower, discover_utterances, load_utterance, mel_cepstral_distortion, Utterance, UtterancePaths};

/// Stage names in execution order; `select_statics` replaces `mlpg` when
/// MLPG is off.
pub const STAGES: [&str; 10] = [
    "split_mcep",
    "compute_deltas",
    "normalize",
    "generator",
    "denormalize",
    "mlpg",
    "postfilter",
    "merge_mcep",
    "transform_f0",
    "copy_aperiodicity",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertConfig {
    pub model_dir: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub direction: Direction,
    pub mlpg: bool,
    pub postfilter_beta: f64,
}

impl ConvertConfig {
    pub fn new(model_dir: impl Into<PathBuf>, inputs: Vec<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            model_dir: model_dir.into(),
            inputs,
            out_dir: out_dir.into(),
            direction: Direction::XToY,
            mlpg: true,
            postfilter_beta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceReport {
    pub name: String,
    pub frames: usize,
    pub reference_frames: usize,
    /// Mel-cepstral distortion in dB against the input (conversion) or the
    /// reference (evaluation).
    pub mcd_db: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConversionReport {
    pub utterances: Vec<UtteranceReport>,
    /// Stages executed for each utterance, in order.
    pub stages: Vec<String>,
    pub seconds: f64,
}

impl ConversionReport {
    pub fn mean_mcd(&self) -> Option<f64> {
        if self.utterances.is_empty() {
            return None;
        }
        Some(self.utterances.iter().map(|u| u.mcd_db).sum::<f64>() / self.utterances.len() as f64)
    }
}

/// Runs one utterance through the conversion pipeline, returning the
/// converted streams and the stages executed.
pub fn convert_utterance(
    model: &TrainedModel,
    utt: &Utterance,
    direction: Direction,
    use_mlpg: bool,
    postfilter_beta: f64,
) -> Result<(Utterance, Vec<&'static str>)> {
    let (role, from, to) = match direction {
        Direction::XToY => (Role::G, &model.source, &model.target),
        Direction::YToX if model.method() == Method::CycleGan => (Role::F, &model.target, &model.source),
        Direction::YToX => {
            return Err(Error::InvalidArgument(format!(
                "{} models convert source to target only",
                model.method()
            )))
        }
    };
    let net = model.network(role)?;
    let mut stages = Vec::with_capacity(STAGES.len());

    let (_, higher) = split_mcep(&utt.mcep)?;
    stages.push("split_mcep");
    let aug = augmented_lower(&utt.mcep)?;
    stages.push("compute_deltas");
    let norm = normalize(&aug, &from.norm)?;
    stages.push("normalize");
    let mapped = FeatureSequence::new(FeatureKind::Augmented75, net.predict(norm.data())?)?;
    stages.push("generator");
    let denorm = denormalize(&mapped, &to.norm)?;
    stages.push("denormalize");
    let statics = if use_mlpg {
        let traj = GaussianTrajectory::new(denorm.into_data(), to.norm.variances(), DeltaWindowSet::standard())?;
        stages.push("mlpg");
        mlpg_generate(&traj)?
    } else {
        stages.push("select_statics");
        FeatureSequence::new(
            FeatureKind::McepLow25,
            denorm.data().slice(s![.., ..LOWER_DIMS]).to_owned(),
        )?
    };
    let filtered = postfilter(&statics, postfilter_beta)?;
    stages.push("postfilter");
    let mcep = merge_mcep(&filtered, &higher)?;
    stages.push("merge_mcep");
    let f0 = transform_f0(&utt.f0, &from.logf0, &to.logf0)?;
    stages.push("transform_f0");
    let ap = utt.ap.clone();
    stages.push("copy_aperiodicity");
    Ok((Utterance::new(utt.name.clone(), mcep, f0, ap)?, stages))
}

/// Converts every input utterance into `out_dir`, keeping file names. The
/// aperiodicity file is copied byte for byte.
pub fn cmd_convert(config: &ConvertConfig) -> Result<ConversionReport> {
    let start = Instant::now();
    let model = load_model(&config.model_dir)?;
    let inputs = discover_utterances(&config.inputs)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::from(e).in_file(&config.out_dir))?;
    let mut report = ConversionReport::default();
    for paths in &inputs {
        let t0 = Instant::now();
        let utt = load_utterance(paths)?;
        let (out, stages) = convert_utterance(&model, &utt, config.direction, config.mlpg, config.postfilter_beta)
            .in_file(&paths.mcep)?;
        let dest = UtterancePaths::in_dir(&config.out_dir, &utt.name);
        crate::format::write_ftr1(&dest.mcep, &out.mcep)?;
        crate::format::write_ftr1(&dest.f0, &out.f0)?;
        fs::copy(&paths.ap, &dest.ap).map_err(|e| Error::from(e).in_file(&paths.ap))?;
        if report.stages.is_empty() {
            report.stages = stages.iter().map(|s| s.to_string()).collect();
        }
        report.utterances.push(UtteranceReport {
            name: utt.name.clone(),
            frames: out.frames(),
            reference_frames: utt.frames(),
            mcd_db: mel_cepstral_distortion(&out.mcep, &utt.mcep)?,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

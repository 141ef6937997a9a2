//! File-level orchestration: statistics fitting, training, conversion,
//! alignment, synthetic data and objective evaluation.
//!
//! An utterance is three FTR1 files sharing a stem:
//! `<name>.mcep.ftr` (49-dim mel-cepstrum), `<name>.f0.ftr` and
//! `<name>.ap.ftr`. Commands accept directories (scanned for `*.mcep.ftr`)
//! or explicit mel-cepstrum paths.

mod convert;
mod model;
pub mod synthetic;
mod train;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::align::{dtw_align, dtw_align_leading, AlignmentPath};
use crate::error::{Error, Result, ResultExt};
use crate::features::{
    compute_deltas, fit_logf0_stats, fit_norm_stats, split_mcep, DeltaWindowSet, FeatureKind, FeatureSequence,
    LogF0Stats, NormStats, LOWER_DIMS,
};
use crate::format::{
    format_logf0_stats, format_norm_stats, read_ftr1, read_logf0_stats, read_norm_stats, write_ftr1, write_text,
};

pub use convert::{cmd_convert, convert_utterance, ConversionReport, ConvertConfig, UtteranceReport, STAGES};
pub use model::{load_model, save_model, Manifest, Method, NetworkEntry, Role, TrainedModel};
pub use synthetic::{cmd_gen_synthetic, generate_synthetic, MixtureComponent, SyntheticSpeaker, SyntheticSpec};
pub use train::{cmd_train, load_pairs, TrainConfig, TrainSummary};

pub const MCEP_SUFFIX: &str = ".mcep.ftr";
pub const F0_SUFFIX: &str = ".f0.ftr";
pub const AP_SUFFIX: &str = ".ap.ftr";
pub const NORM_FILE: &str = "norm.txt";
pub const LOGF0_FILE: &str = "logf0.txt";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct UtterancePaths {
    pub name: String,
    pub mcep: PathBuf,
    pub f0: PathBuf,
    pub ap: PathBuf,
}

impl UtterancePaths {
    pub fn in_dir(dir: &Path, name: &str) -> Self {
        Self {
            name: name.to_string(),
            mcep: dir.join(format!("{name}{MCEP_SUFFIX}")),
            f0: dir.join(format!("{name}{F0_SUFFIX}")),
            ap: dir.join(format!("{name}{AP_SUFFIX}")),
        }
    }

    /// Sibling stream paths of a `<name>.mcep.ftr` file.
    pub fn from_mcep(path: &Path) -> Result<Self> {
        let file = path.file_name().and_then(|f| f.to_str()).unwrap_or_default();
        let name = file
            .strip_suffix(MCEP_SUFFIX)
            .filter(|n| !n.is_empty())
            .ok_or_else(|| Error::InvalidArgument(format!("{} does not end in {MCEP_SUFFIX}", path.display())))?;
        Ok(Self::in_dir(path.parent().unwrap_or(Path::new("")), name))
    }
}

/// One utterance's three streams with matching frame counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub name: String,
    pub mcep: FeatureSequence,
    pub f0: FeatureSequence,
    pub ap: FeatureSequence,
}

impl Utterance {
    pub fn new(
        name: impl Into<String>,
        mcep: FeatureSequence,
        f0: FeatureSequence,
        ap: FeatureSequence,
    ) -> Result<Self> {
        expect_kind(&mcep, FeatureKind::Mcep49)?;
        expect_kind(&f0, FeatureKind::F0)?;
        expect_kind(&ap, FeatureKind::Aperiodicity)?;
        for other in [&f0, &ap] {
            if other.frames() != mcep.frames() {
                return Err(Error::FrameCountMismatch {
                    left: mcep.frames(),
                    right: other.frames(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            mcep,
            f0,
            ap,
        })
    }

    pub fn frames(&self) -> usize {
        self.mcep.frames()
    }
}

fn expect_kind(seq: &FeatureSequence, kind: FeatureKind) -> Result<()> {
    if seq.kind() != kind {
        return Err(Error::Format(format!("expected a {kind} stream, found {}", seq.kind())));
    }
    Ok(())
}

/// Expands directories into their sorted `*.mcep.ftr` utterances; explicit
/// files are taken as given. Duplicate paths are kept so that a file listed
/// twice is weighted twice.
pub fn discover_utterances(inputs: &[PathBuf]) -> Result<Vec<UtterancePaths>> {
    let mut out = Vec::new();
    for input in inputs {
        if !input.exists() {
            return Err(Error::InvalidArgument(format!("{} does not exist", input.display())));
        }
        if input.is_dir() {
            let mut found = Vec::new();
            for entry in fs::read_dir(input).map_err(|e| Error::from(e).in_file(input))? {
                let path = entry.map_err(|e| Error::from(e).in_file(input))?.path();
                if path.to_str().is_some_and(|p| p.ends_with(MCEP_SUFFIX)) {
                    found.push(UtterancePaths::from_mcep(&path)?);
                }
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(UtterancePaths::from_mcep(input)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no utterances found in the given inputs"));
    }
    Ok(out)
}

pub fn load_utterance(paths: &UtterancePaths) -> Result<Utterance> {
    let mcep = read_ftr1(&paths.mcep)?;
    let f0 = read_ftr1(&paths.f0)?;
    let ap = read_ftr1(&paths.ap)?;
    Utterance::new(paths.name.clone(), mcep, f0, ap).in_file(&paths.mcep)
}

pub fn load_utterances(inputs: &[PathBuf]) -> Result<Vec<Utterance>> {
    discover_utterances(inputs)?.iter().map(load_utterance).collect()
}

pub fn write_utterance(dir: &Path, utt: &Utterance) -> Result<UtterancePaths> {
    let paths = UtterancePaths::in_dir(dir, &utt.name);
    write_ftr1(&paths.mcep, &utt.mcep)?;
    write_ftr1(&paths.f0, &utt.f0)?;
    write_ftr1(&paths.ap, &utt.ap)?;
    Ok(paths)
}

/// Lower-order statics with standard Δ/ΔΔ appended (75 columns).
pub fn augmented_lower(mcep: &FeatureSequence) -> Result<FeatureSequence> {
    let (lower, _) = split_mcep(mcep)?;
    compute_deltas(&lower, &DeltaWindowSet::standard())
}

/// Per-speaker normalization and log-F0 statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerStats {
    pub norm: NormStats,
    pub logf0: LogF0Stats,
}

impl SpeakerStats {
    pub fn write(&self, norm_path: &Path, logf0_path: &Path) -> Result<()> {
        write_text(norm_path, &format_norm_stats(&self.norm))?;
        write_text(logf0_path, &format_logf0_stats(&self.logf0))
    }

    pub fn read(norm_path: &Path, logf0_path: &Path) -> Result<Self> {
        Ok(Self {
            norm: read_norm_stats(norm_path)?,
            logf0: read_logf0_stats(logf0_path)?,
        })
    }

    /// Reads `norm.txt` and `logf0.txt` from a stats directory.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        Self::read(&dir.join(NORM_FILE), &dir.join(LOGF0_FILE))
    }
}

/// Pools the augmented lower-order features and voiced F0 of all utterances.
pub fn fit_speaker_stats(utts: &[Utterance]) -> Result<SpeakerStats> {
    if utts.is_empty() {
        return Err(Error::Empty("statistics need at least one utterance"));
    }
    let aug: Vec<FeatureSequence> = utts.iter().map(|u| augmented_lower(&u.mcep)).collect::<Result<_>>()?;
    let pooled = FeatureSequence::concat(FeatureKind::Augmented75, &aug)?;
    let f0s: Vec<FeatureSequence> = utts.iter().map(|u| u.f0.clone()).collect();
    let f0 = FeatureSequence::concat(FeatureKind::F0, &f0s)?;
    let names = || utts.iter().map(|u| u.name.as_str()).collect::<Vec<_>>().join(", ");
    let norm =
        fit_norm_stats(&pooled).map_err(|e| Error::InsufficientData(format!("mel-cepstrum of [{}]: {e}", names())))?;
    let logf0 = fit_logf0_stats(&f0).map_err(|e| Error::InsufficientData(format!("F0 of [{}]: {e}", names())))?;
    Ok(SpeakerStats { norm, logf0 })
}

/// Fits one speaker's statistics and writes `norm.txt` and `logf0.txt` into
/// `out_dir`.
pub fn cmd_stats(inputs: &[PathBuf], out_dir: &Path) -> Result<SpeakerStats> {
    let paths = discover_utterances(inputs)?;
    let utts: Vec<Utterance> = paths.iter().map(load_utterance).collect::<Result<_>>()?;
    let stats = match fit_speaker_stats(&utts) {
        Err(e) if paths.len() == 1 => return Err(e.in_file(&paths[0].f0)),
        other => other?,
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::from(e).in_file(out_dir))?;
    stats.write(&out_dir.join(NORM_FILE), &out_dir.join(LOGF0_FILE))?;
    Ok(stats)
}

/// `(10 / ln 10) · sqrt(2 · Σ_{i≥1} (a_i − b_i)²)` over the lower-order
/// coefficients of one frame pair.
pub fn frame_mcd(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).skip(1).map(|(x, y)| (x - y).powi(2)).sum();
    10.0 / std::f64::consts::LN_10 * (2.0 * sum).sqrt()
}

fn mcd_columns(kind: FeatureKind, dim: usize) -> usize {
    match kind {
        FeatureKind::Mcep49 | FeatureKind::McepLow25 | FeatureKind::Augmented75 => LOWER_DIMS,
        _ => dim,
    }
}

/// Frame-averaged mel-cepstral distortion in dB, excluding coefficient 0.
/// Sequences of different lengths are DTW-aligned on the compared columns
/// first.
pub fn mel_cepstral_distortion(converted: &FeatureSequence, reference: &FeatureSequence) -> Result<f64> {
    if converted.kind() != reference.kind() || converted.dim() != reference.dim() {
        return Err(Error::Format(format!(
            "stream mismatch: {} ({} columns) vs {} ({} columns)",
            converted.kind(),
            converted.dim(),
            reference.kind(),
            reference.dim()
        )));
    }
    if converted.frames() == 0 || reference.frames() == 0 {
        return Err(Error::Empty("MCD needs non-empty sequences"));
    }
    let cols = mcd_columns(converted.kind(), converted.dim());
    let path = if converted.frames() == reference.frames() {
        AlignmentPath::identity(converted.frames())
    } else {
        dtw_align_leading(converted, reference, cols)?
    };
    let (a, b) = (converted.data(), reference.data());
    let total: f64 = path
        .pairs
        .iter()
        .map(|&(i, j)| {
            let ra: Vec<f64> = a.row(i).iter().take(cols).copied().collect();
            let rb: Vec<f64> = b.row(j).iter().take(cols).copied().collect();
            frame_mcd(&ra, &rb)
        })
        .sum();
    Ok(total / path.len() as f64)
}

/// Matches `*.mcep.ftr` files by utterance name and reports the per-utterance
/// distortion.
pub fn cmd_eval(converted: &[PathBuf], reference: &[PathBuf]) -> Result<ConversionReport> {
    let refs: BTreeMap<String, UtterancePaths> = discover_utterances(reference)?
        .into_iter()
        .map(|p| (p.name.clone(), p))
        .collect();
    let mut report = ConversionReport::default();
    for conv in discover_utterances(converted)? {
        let r = refs
            .get(&conv.name)
            .ok_or_else(|| Error::InvalidArgument(format!("no reference utterance named {:?}", conv.name)))?;
        let a = read_ftr1(&conv.mcep)?;
        let b = read_ftr1(&r.mcep)?;
        let mcd_db = mel_cepstral_distortion(&a, &b).in_file(&conv.mcep)?;
        report.utterances.push(UtteranceReport {
            name: conv.name.clone(),
            frames: a.frames(),
            reference_frames: b.frames(),
            mcd_db,
            seconds: 0.0,
        });
    }
    Ok(report)
}

/// DTW path between two feature files. Mel-cepstra are aligned on their 25
/// lower-order statics unless `full` is set.
pub fn cmd_align(a: &Path, b: &Path, full: bool) -> Result<AlignmentPath> {
    let sa = read_ftr1(a)?;
    let sb = read_ftr1(b)?;
    let both_mcep = sa.kind() == FeatureKind::Mcep49 && sb.kind() == FeatureKind::Mcep49;
    if both_mcep && !full {
        dtw_align_leading(&sa, &sb, LOWER_DIMS)
    } else {
        dtw_align(&sa, &sb)
    }
}

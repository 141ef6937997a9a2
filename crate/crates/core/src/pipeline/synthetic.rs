//! Two pseudo-speakers with Gaussian-mixture lower-order statics, emitted as
//! ordinary mel-cepstrum, F0 and aperiodicity streams.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSequence, HIGHER_DIMS, LOWER_DIMS};
use crate::rng::rng_for;

use super::{write_utterance, Utterance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    /// 25-dim mean of the lower-order statics.
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation (25 values) or one shared value.
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpeaker {
    pub name: String,
    pub components: Vec<MixtureComponent>,
    /// Natural-log F0 mean and std of voiced frames.
    pub log_f0_mean: f64,
    pub log_f0_std: f64,
    pub voiced_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub utterances: usize,
    pub frames_per_utterance: usize,
    pub aperiodicity_bands: usize,
    /// Shared component sequences with per-speaker frame repetition, plus a
    /// `pairs.csv` listing; otherwise the speakers are drawn independently.
    #[serde(default)]
    pub parallel: bool,
    pub speakers: [SyntheticSpeaker; 2],
}

impl SyntheticSpeaker {
    fn std_vector(c: &MixtureComponent) -> Array1<f64> {
        if c.std.len() == 1 {
            Array1::from_elem(LOWER_DIMS, c.std[0])
        } else {
            Array1::from(c.std.clone())
        }
    }

    /// Mixture mean `Σ_k w_k μ_k` with normalized weights.
    pub fn mixture_mean(&self) -> Array1<f64> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components.iter().fold(Array1::zeros(LOWER_DIMS), |acc, c| {
            acc + Array1::from(c.mean.clone()) * (c.weight / total)
        })
    }

    /// Per-dimension standard deviation of the mixture.
    pub fn mixture_std(&self) -> Array1<f64> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mean = self.mixture_mean();
        let second = self
            .components
            .iter()
            .fold(Array1::zeros(LOWER_DIMS), |acc: Array1<f64>, c| {
                let m = Array1::from(c.mean.clone());
                let s = Self::std_vector(c);
                acc + (&s * &s + &m * &m) * (c.weight / total)
            });
        (second - &mean * &mean).mapv(|v| v.max(0.0).sqrt())
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("speaker {:?}: {m}", self.name)));
        if self.components.is_empty() {
            return bad("needs at least one mixture component".into());
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return bad(format!("component {k} weight must be positive"));
            }
            if c.mean.len() != LOWER_DIMS {
                return bad(format!(
                    "component {k} mean has {} values, need {LOWER_DIMS}",
                    c.mean.len()
                ));
            }
            if c.std.len() != 1 && c.std.len() != LOWER_DIMS {
                return bad(format!("component {k} std needs 1 or {LOWER_DIMS} values"));
            }
            if c.mean.iter().chain(&c.std).any(|v| !v.is_finite()) || c.std.iter().any(|&s| s <= 0.0) {
                return bad(format!("component {k} has non-finite mean or non-positive std"));
            }
        }
        if !(self.log_f0_std > 0.0 && self.log_f0_mean.is_finite()) {
            return bad("log-F0 std must be positive".into());
        }
        if !(self.voiced_fraction > 0.0 && self.voiced_fraction <= 1.0) {
            return bad("voiced_fraction must be in (0, 1]".into());
        }
        Ok(())
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.utterances == 0 || self.frames_per_utterance < 2 {
            return Err(Error::InvalidArgument(
                "need at least one utterance of at least two frames".into(),
            ));
        }
        if self.aperiodicity_bands == 0 {
            return Err(Error::InvalidArgument("aperiodicity_bands must be >= 1".into()));
        }
        if self.speakers[0].name == self.speakers[1].name {
            return Err(Error::InvalidArgument("speaker names must differ".into()));
        }
        if self.parallel && self.speakers[0].components.len() != self.speakers[1].components.len() {
            return Err(Error::InvalidArgument(
                "parallel generation needs matching component counts".into(),
            ));
        }
        self.speakers.iter().try_for_each(SyntheticSpeaker::validate)
    }

    /// Three-component source and target speakers whose mixture means are
    /// `separation` apart, 2,000 frames each.
    pub fn toy(seed: u64, separation: f64) -> Self {
        let mut rng = rng_for(seed, "synthetic/toy-spec");
        let base: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..LOWER_DIMS)
                    .map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let shift = separation / (LOWER_DIMS as f64).sqrt();
        let weights = [0.5, 0.3, 0.2];
        let speaker = |name: &str, offset: f64, std: f64, f0: f64| SyntheticSpeaker {
            name: name.into(),
            components: base
                .iter()
                .zip(weights)
                .map(|(m, w)| MixtureComponent {
                    weight: w,
                    mean: m.iter().map(|v| v + offset).collect(),
                    std: vec![std],
                })
                .collect(),
            log_f0_mean: f0,
            log_f0_std: 0.15,
            voiced_fraction: 0.7,
        };
        let source = speaker("source", 0.0, 0.4, 4.8);
        let target = speaker("target", shift, 0.5, 5.3);
        SyntheticSpec {
            seed,
            utterances: 10,
            frames_per_utterance: 200,
            aperiodicity_bands: 5,
            parallel: false,
            speakers: [source, target],
        }
    }
}

struct SpeakerSampler<'a> {
    speaker: &'a SyntheticSpeaker,
    stds: Vec<Array1<f64>>,
    pick: WeightedIndex<f64>,
}

impl<'a> SpeakerSampler<'a> {
    fn new(speaker: &'a SyntheticSpeaker) -> Result<Self> {
        let pick = WeightedIndex::new(speaker.components.iter().map(|c| c.weight))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(Self {
            stds: speaker.components.iter().map(SyntheticSpeaker::std_vector).collect(),
            speaker,
            pick,
        })
    }

    fn lower_frame<R: Rng>(&self, component: usize, rng: &mut R) -> Vec<f64> {
        let c = &self.speaker.components[component];
        (0..LOWER_DIMS)
            .map(|d| c.mean[d] + self.stds[component][d] * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn utterance<R: Rng>(&self, name: String, components: &[usize], bands: usize, rng: &mut R) -> Result<Utterance> {
        let frames = components.len();
        let mut mcep = Array2::zeros((frames, LOWER_DIMS + HIGHER_DIMS));
        for (t, &k) in components.iter().enumerate() {
            for (d, v) in self.lower_frame(k, rng).into_iter().enumerate() {
                mcep[[t, d]] = v;
            }
            for h in 0..HIGHER_DIMS {
                let scale = 0.05 / (1.0 + h as f64);
                mcep[[t, LOWER_DIMS + h]] = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let log_f0 = Normal::new(self.speaker.log_f0_mean, self.speaker.log_f0_std)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut f0 = Array2::zeros((frames, 1));
        let mut voiced = 0;
        for t in 0..frames {
            if rng.random::<f64>() < self.speaker.voiced_fraction {
                f0[[t, 0]] = log_f0.sample(rng).exp();
                voiced += 1;
            }
        }
        // keep every utterance usable for F0 statistics
        for t in 0..frames {
            if voiced >= 2 {
                break;
            }
            if f0[[t, 0]] == 0.0 {
                f0[[t, 0]] = log_f0.sample(rng).exp();
                voiced += 1;
            }
        }
        let band = Uniform::new(-40.0, 0.0).expect("valid range");
        let ap = Array2::from_shape_simple_fn((frames, bands), || rng.sample(band));
        // round through f32 so in-memory values equal what FTR1 stores
        let f32ify = |a: Array2<f64>| a.mapv(|v| v as f32 as f64);
        Ok(Utterance {
            name,
            mcep: FeatureSequence::new(FeatureKind::Mcep49, f32ify(mcep))?,
            f0: FeatureSequence::new(FeatureKind::F0, f32ify(f0))?,
            ap: FeatureSequence::new(FeatureKind::Aperiodicity, f32ify(ap))?,
        })
    }
}

/// Generated utterances per speaker, in speaker order.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<[Vec<Utterance>; 2]> {
    spec.validate()?;
    let samplers = [
        SpeakerSampler::new(&spec.speakers[0])?,
        SpeakerSampler::new(&spec.speakers[1])?,
    ];
    let mut out: [Vec<Utterance>; 2] = [Vec::new(), Vec::new()];
    let mut content_rng = rng_for(spec.seed, "synthetic/content");
    for u in 0..spec.utterances {
        let name = format!("utt{u:04}");
        let shared: Vec<usize> = (0..spec.frames_per_utterance)
            .map(|_| samplers[0].pick.sample(&mut content_rng))
            .collect();
        for (s, sampler) in samplers.iter().enumerate() {
            let mut rng = rng_for(spec.seed, &format!("synthetic/{}/{name}", sampler.speaker.name));
            let components: Vec<usize> = if spec.parallel {
                // each content frame lasts one or two frames for this speaker
                shared
                    .iter()
                    .flat_map(|&k| std::iter::repeat_n(k, 1 + usize::from(rng.random::<bool>())))
                    .collect()
            } else {
                (0..spec.frames_per_utterance)
                    .map(|_| sampler.pick.sample(&mut rng))
                    .collect()
            };
            out[s].push(sampler.utterance(name.clone(), &components, spec.aperiodicity_bands, &mut rng)?);
        }
    }
    Ok(out)
}

/// Writes `<out>/<speaker>/<utt>.{mcep,f0,ap}.ftr` and, for parallel specs,
/// `<out>/pairs.csv`. Returns the two speaker directories.
pub fn cmd_gen_synthetic(spec: &SyntheticSpec, out_dir: &Path) -> Result<[PathBuf; 2]> {
    let speakers = generate_synthetic(spec)?;
    let dirs = [
        out_dir.join(&spec.speakers[0].name),
        out_dir.join(&spec.speakers[1].name),
    ];
    for (dir, utts) in dirs.iter().zip(&speakers) {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
        for u in utts {
            write_utterance(dir, u)?;
        }
    }
    if spec.parallel {
        let mut pairs = String::from("source,target\n");
        for u in &speakers[0] {
            pairs.push_str(&format!(
                "{}/{}.mcep.ftr,{}/{}.mcep.ftr\n",
                spec.speakers[0].name, u.name, spec.speakers[1].name, u.name
            ));
        }
        crate::format::write_text(out_dir.join("pairs.csv"), &pairs)?;
    }
    Ok(dirs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::encode_ftr1;

    fn small(parallel: bool) -> SyntheticSpec {
        let mut spec = SyntheticSpec::toy(7, 4.0);
        spec.utterances = 3;
        spec.frames_per_utterance = 40;
        spec.parallel = parallel;
        spec
    }

    #[test]
    fn toy_means_are_separated_as_requested() {
        let spec = SyntheticSpec::toy(3, 6.0);
        let d = &spec.speakers[1].mixture_mean() - &spec.speakers[0].mixture_mean();
        assert!((d.dot(&d).sqrt() - 6.0).abs() < 1e-12);
        assert_eq!(spec.utterances * spec.frames_per_utterance, 2000);
        assert_eq!(spec.speakers[0].components.len(), 3);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(&small(false)).unwrap();
        let b = generate_synthetic(&small(false)).unwrap();
        for (ua, ub) in a[0].iter().zip(&b[0]) {
            assert_eq!(encode_ftr1(&ua.mcep).unwrap(), encode_ftr1(&ub.mcep).unwrap());
            assert_eq!(encode_ftr1(&ua.f0).unwrap(), encode_ftr1(&ub.f0).unwrap());
        }
        let mut other = small(false);
        other.seed = 8;
        let c = generate_synthetic(&other).unwrap();
        assert_ne!(a[0][0].mcep, c[0][0].mcep);
    }

    #[test]
    fn streams_have_expected_shapes() {
        for parallel in [false, true] {
            let [src, tgt] = generate_synthetic(&small(parallel)).unwrap();
            for u in src.iter().chain(&tgt) {
                assert_eq!(u.ap.dim(), 5);
                assert!(u.ap.data().iter().all(|&v| (-40.0..0.0).contains(&v)));
                assert!(u.f0.data().iter().filter(|&&f| f > 0.0).count() >= 2);
                if !parallel {
                    assert_eq!(u.frames(), 40);
                } else {
                    assert!((40..=80).contains(&u.frames()));
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = small(false);
        s.speakers[0].components[0].mean.pop();
        assert!(generate_synthetic(&s).is_err());
        let mut s = small(false);
        s.speakers[1].name = s.speakers[0].name.clone();
        assert!(s.validate().is_err());
        let mut s = small(false);
        s.speakers[0].voiced_fraction = 0.0;
        assert!(s.validate().is_err());
        let mut s = small(false);
        s.frames_per_utterance = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn writes_pairs_for_parallel_specs() {
        let dir = tempfile::tempdir().unwrap();
        let [src, _] = cmd_gen_synthetic(&small(true), dir.path()).unwrap();
        assert!(src.join("utt0000.mcep.ftr").exists());
        let pairs = std::fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
        assert_eq!(pairs.lines().count(), 4);
        assert!(pairs.contains("source/utt0002.mcep.ftr,target/utt0002.mcep.ftr"));
    }
}

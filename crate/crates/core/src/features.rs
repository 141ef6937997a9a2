//! Frame-feature data model and the per-stream transforms of the conversion
//! pipeline: mel-cepstrum splitting, delta augmentation, z-score
//! normalization and log-F0 equalization.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Full mel-cepstrum order carried by the vocoder streams.
pub const MCEP_DIMS: usize = 49;
/// Lower-order coefficients (0..25) that are converted.
pub const LOWER_DIMS: usize = 25;
/// Higher-order coefficients (25..49) that are copied through.
pub const HIGHER_DIMS: usize = MCEP_DIMS - LOWER_DIMS;
/// Static + delta + delta-delta width of the converted stream.
pub const AUGMENTED_DIMS: usize = 3 * LOWER_DIMS;

/// Lower bound applied to every fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Mcep49,
    McepLow25,
    McepHigh24,
    Augmented75,
    F0,
    Aperiodicity,
    Generic,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::Generic,
        FeatureKind::Mcep49,
        FeatureKind::McepLow25,
        FeatureKind::McepHigh24,
        FeatureKind::Augmented75,
        FeatureKind::F0,
        FeatureKind::Aperiodicity,
    ];

    /// Width fixed by the kind, if any.
    pub fn width(self) -> Option<usize> {
        match self {
            FeatureKind::Mcep49 => Some(MCEP_DIMS),
            FeatureKind::McepLow25 => Some(LOWER_DIMS),
            FeatureKind::McepHigh24 => Some(HIGHER_DIMS),
            FeatureKind::Augmented75 => Some(AUGMENTED_DIMS),
            FeatureKind::F0 => Some(1),
            FeatureKind::Aperiodicity | FeatureKind::Generic => None,
        }
    }

    /// Code stored in the FTR1 header.
    pub fn code(self) -> u32 {
        match self {
            FeatureKind::Generic => 0,
            FeatureKind::Mcep49 => 1,
            FeatureKind::McepLow25 => 2,
            FeatureKind::McepHigh24 => 3,
            FeatureKind::Augmented75 => 4,
            FeatureKind::F0 => 5,
            FeatureKind::Aperiodicity => 6,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Generic => "generic",
            FeatureKind::Mcep49 => "mcep49",
            FeatureKind::McepLow25 => "mcep-low25",
            FeatureKind::McepHigh24 => "mcep-high24",
            FeatureKind::Augmented75 => "augmented75",
            FeatureKind::F0 => "f0",
            FeatureKind::Aperiodicity => "aperiodicity",
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature kind {s:?}")))
    }
}

/// A T×D matrix of frame features (row = frame) tagged with its stream kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    kind: FeatureKind,
    data: Array2<f64>,
}

impl FeatureSequence {
    pub fn new(kind: FeatureKind, data: Array2<f64>) -> Result<Self> {
        let dim = data.ncols();
        if dim == 0 {
            return Err(Error::Empty("feature dimension"));
        }
        if let Some(expected) = kind.width() {
            if dim != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: dim,
                    context: kind.name(),
                });
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{kind} entry at frame {}, dim {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { kind, data })
    }

    pub fn from_rows(kind: FeatureKind, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).or(kind.width()).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: bad.len(),
                context: "ragged rows",
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data =
            Array2::from_shape_vec((rows.len(), dim), flat).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(kind, data)
    }

    /// A zero-frame sequence of the given width.
    pub fn empty(kind: FeatureKind, dim: usize) -> Result<Self> {
        Self::new(kind, Array2::zeros((0, dim)))
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.row(t)
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Re-tags the sequence, re-checking the width constraint of the new kind.
    pub fn with_kind(self, kind: FeatureKind) -> Result<Self> {
        Self::new(kind, self.data)
    }

    pub fn expect_dim(&self, expected: usize, context: &'static str) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
                context,
            });
        }
        Ok(())
    }

    /// Stacks sequences of the same width frame-wise.
    pub fn concat(kind: FeatureKind, parts: &[FeatureSequence]) -> Result<Self> {
        let first = parts.first().ok_or(Error::Empty("sequence list"))?;
        let dim = first.dim();
        for p in parts {
            p.expect_dim(dim, "concatenated sequences")?;
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = concatenate(Axis(0), &views).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::new(kind, data)
    }
}

/// Splits a 49-dim mel-cepstrum into its lower 25 and higher 24 coefficients.
pub fn split_mcep(seq: &FeatureSequence) -> Result<(FeatureSequence, FeatureSequence)> {
    seq.expect_dim(MCEP_DIMS, "split_mcep input")?;
    let lower = seq.data.slice(s![.., ..LOWER_DIMS]).to_owned();
    let higher = seq.data.slice(s![.., LOWER_DIMS..]).to_owned();
    Ok((
        FeatureSequence::new(FeatureKind::McepLow25, lower)?,
        FeatureSequence::new(FeatureKind::McepHigh24, higher)?,
    ))
}

/// Column-wise concatenation of lower and higher coefficients.
pub fn merge_mcep(lower: &FeatureSequence, higher: &FeatureSequence) -> Result<FeatureSequence> {
    lower.expect_dim(LOWER_DIMS, "merge_mcep lower")?;
    higher.expect_dim(HIGHER_DIMS, "merge_mcep higher")?;
    if lower.frames() != higher.frames() {
        return Err(Error::FrameCountMismatch {
            left: lower.frames(),
            right: higher.frames(),
        });
    }
    let data = concatenate(Axis(1), &[lower.data.view(), higher.data.view()])
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    FeatureSequence::new(FeatureKind::Mcep49, data)
}

/// One regression window: a list of `(frame offset, coefficient)` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaWindow {
    taps: Vec<(isize, f64)>,
}

impl DeltaWindow {
    pub fn new(taps: Vec<(isize, f64)>) -> Result<Self> {
        if !taps.iter().any(|&(_, c)| c != 0.0) {
            return Err(Error::InvalidArgument(
                "delta window needs at least one nonzero coefficient".into(),
            ));
        }
        if taps.iter().any(|&(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite("delta window coefficient".into()));
        }
        Ok(Self { taps })
    }

    pub fn identity() -> Self {
        Self { taps: vec![(0, 1.0)] }
    }

    pub fn taps(&self) -> &[(isize, f64)] {
        &self.taps
    }

    pub fn max_offset(&self) -> usize {
        self.taps.iter().map(|&(o, _)| o.unsigned_abs()).max().unwrap_or(0)
    }

    /// Frame index touched by `offset` from `t`, with edge replication.
    #[inline]
    pub fn clamp_index(t: usize, offset: isize, frames: usize) -> usize {
        (t as isize + offset).clamp(0, frames as isize - 1) as usize
    }

    fn apply(&self, column: ArrayView1<'_, f64>, t: usize) -> f64 {
        let frames = column.len();
        self.taps
            .iter()
            .map(|&(o, c)| c * column[Self::clamp_index(t, o, frames)])
            .sum()
    }
}

/// Ordered windows, static identity first.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaWindowSet {
    windows: Vec<DeltaWindow>,
}

impl DeltaWindowSet {
    pub fn new(windows: Vec<DeltaWindow>) -> Result<Self> {
        match windows.first() {
            Some(w) if *w == DeltaWindow::identity() => Ok(Self { windows }),
            _ => Err(Error::InvalidArgument(
                "first delta window must be the static identity {(0, 1)}".into(),
            )),
        }
    }

    /// Static, Δ = {(-1,-0.5),(+1,0.5)}, ΔΔ = {(-1,1),(0,-2),(+1,1)}.
    pub fn standard() -> Self {
        Self {
            windows: vec![
                DeltaWindow::identity(),
                DeltaWindow {
                    taps: vec![(-1, -0.5), (1, 0.5)],
                },
                DeltaWindow {
                    taps: vec![(-1, 1.0), (0, -2.0), (1, 1.0)],
                },
            ],
        }
    }

    pub fn windows(&self) -> &[DeltaWindow] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn max_offset(&self) -> usize {
        self.windows.iter().map(DeltaWindow::max_offset).max().unwrap_or(0)
    }
}

impl Default for DeltaWindowSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Appends dynamic features: output columns are `[static | Δ | ΔΔ ...]`, each
/// block as wide as the input. Boundary frames replicate the edge frame.
pub fn compute_deltas(seq: &FeatureSequence, windows: &DeltaWindowSet) -> Result<FeatureSequence> {
    let frames = seq.frames();
    if frames == 0 {
        return Err(Error::Empty("compute_deltas needs at least one frame"));
    }
    let width = seq.dim();
    let mut out = Array2::zeros((frames, width * windows.len()));
    for (w, window) in windows.windows().iter().enumerate() {
        for d in 0..width {
            let column = seq.data.column(d);
            for t in 0..frames {
                out[[t, w * width + d]] = window.apply(column, t);
            }
        }
    }
    let kind = if width * windows.len() == AUGMENTED_DIMS {
        FeatureKind::Augmented75
    } else {
        FeatureKind::Generic
    };
    FeatureSequence::new(kind, out)
}

/// Per-dimension mean and (floored, population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl NormStats {
    pub fn new(mean: Array1<f64>, std: Array1<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: std.len(),
                context: "norm stats std",
            });
        }
        if mean.iter().chain(std.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("norm stats".into()));
        }
        if std.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidArgument("norm stats std must be positive".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Per-dimension variances, `std²`.
    pub fn variances(&self) -> Array1<f64> {
        self.std.mapv(|s| s * s)
    }
}

pub fn fit_norm_stats(seq: &FeatureSequence) -> Result<NormStats> {
    if seq.frames() < 2 {
        return Err(Error::InsufficientData(format!(
            "normalization stats need at least 2 frames, got {}",
            seq.frames()
        )));
    }
    let mean = seq.data.mean_axis(Axis(0)).expect("nonempty");
    let std = seq.data.std_axis(Axis(0), 0.0).mapv(|s| s.max(STD_FLOOR));
    NormStats::new(mean, std)
}

fn check_stats_dim(seq: &FeatureSequence, stats: &NormStats) -> Result<()> {
    seq.expect_dim(stats.dim(), "normalization stats width")
}

pub fn normalize(seq: &FeatureSequence, stats: &NormStats) -> Result<FeatureSequence> {
    check_stats_dim(seq, stats)?;
    let data = (&seq.data - &stats.mean) / &stats.std;
    FeatureSequence::new(seq.kind, data)
}

pub fn denormalize(seq: &FeatureSequence, stats: &NormStats) -> Result<FeatureSequence> {
    check_stats_dim(seq, stats)?;
    let data = &seq.data * &stats.std + &stats.mean;
    FeatureSequence::new(seq.kind, data)
}

/// Mean and standard deviation of natural-log F0 over voiced frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogF0Stats {
    pub mean: f64,
    pub std: f64,
    pub voiced_count: usize,
}

impl LogF0Stats {
    pub fn new(mean: f64, std: f64, voiced_count: usize) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() {
            return Err(Error::NonFinite("log-F0 stats".into()));
        }
        if std <= 0.0 {
            return Err(Error::InvalidArgument("log-F0 std must be positive".into()));
        }
        if voiced_count == 0 {
            return Err(Error::InsufficientData("log-F0 stats with no voiced frames".into()));
        }
        Ok(Self {
            mean,
            std,
            voiced_count,
        })
    }
}

fn voiced_log_f0(f0: &FeatureSequence) -> Result<Vec<f64>> {
    f0.expect_dim(1, "F0 track")?;
    Ok(f0.data.iter().filter(|&&f| f > 0.0).map(|f| f.ln()).collect())
}

pub fn fit_logf0_stats(f0: &FeatureSequence) -> Result<LogF0Stats> {
    let logs = voiced_log_f0(f0)?;
    if logs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "log-F0 stats need at least 2 voiced frames, got {}",
            logs.len()
        )));
    }
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    LogF0Stats::new(mean, var.sqrt().max(STD_FLOOR), logs.len())
}

/// Maps voiced frames through the log-domain mean/std equalization; unvoiced
/// frames (F0 = 0) stay 0.
pub fn transform_f0(f0: &FeatureSequence, src: &LogF0Stats, tgt: &LogF0Stats) -> Result<FeatureSequence> {
    f0.expect_dim(1, "F0 track")?;
    let data = f0.data.mapv(|f| {
        if f > 0.0 {
            ((f.ln() - src.mean) / src.std * tgt.std + tgt.mean).exp()
        } else {
            f
        }
    });
    FeatureSequence::new(f0.kind, data)
}

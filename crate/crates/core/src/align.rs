//! Dynamic time warping of parallel utterances.

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureSequence};

/// Monotone warping path from `(0, 0)` to `(T_a - 1, T_b - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    pub pairs: Vec<(usize, usize)>,
    /// Total squared-Euclidean cost accumulated along the path.
    pub cost: f64,
}

impl AlignmentPath {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The diagonal path for two sequences of equal length.
    pub fn identity(frames: usize) -> Self {
        Self {
            pairs: (0..frames).map(|t| (t, t)).collect(),
            cost: 0.0,
        }
    }

    /// Checks endpoints, unit steps and full coverage for lengths `(ta, tb)`.
    pub fn validate(&self, ta: usize, tb: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("invalid path: {msg}")));
        match (self.pairs.first(), self.pairs.last()) {
            (Some(&(0, 0)), Some(&last)) if ta > 0 && tb > 0 && last == (ta - 1, tb - 1) => {}
            _ => {
                return bad(format!(
                    "must run (0,0) -> ({}, {})",
                    ta.wrapping_sub(1),
                    tb.wrapping_sub(1)
                ))
            }
        }
        for w in self.pairs.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return bad(format!("step {:?} -> {:?}", w[0], w[1]));
            }
        }
        Ok(())
    }
}

#[inline]
fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Minimum-cost alignment under squared Euclidean frame distance with steps
/// `(1,0)`, `(0,1)`, `(1,1)`. Backtrace ties prefer the diagonal, then the
/// step that advances `a` only, then the step that advances `b` only.
pub fn dtw_align(a: &FeatureSequence, b: &FeatureSequence) -> Result<AlignmentPath> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
            context: "dtw_align",
        });
    }
    let (ta, tb) = (a.frames(), b.frames());
    if ta == 0 || tb == 0 {
        return Err(Error::Empty("dtw_align needs nonempty sequences"));
    }

    let mut acc = Array2::from_elem((ta, tb), f64::INFINITY);
    for i in 0..ta {
        for j in 0..tb {
            let d = squared_distance(a.frame(i), b.frame(j));
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[[i - 1, j - 1]]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 { acc[[i - 1, j]] } else { f64::INFINITY };
                let left = if j > 0 { acc[[i, j - 1]] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[[i, j]] = d + best;
        }
    }

    let mut pairs = vec![(ta - 1, tb - 1)];
    let (mut i, mut j) = (ta - 1, tb - 1);
    while (i, j) != (0, 0) {
        let mut next = None;
        let mut best = f64::INFINITY;
        // order encodes the tie-break preference; strict `<` keeps the first
        for cand in [
            (i > 0 && j > 0).then(|| (i - 1, j - 1)),
            (i > 0).then(|| (i - 1, j)),
            (j > 0).then(|| (i, j - 1)),
        ]
        .into_iter()
        .flatten()
        {
            if acc[cand] < best || next.is_none() {
                best = acc[cand];
                next = Some(cand);
            }
        }
        (i, j) = next.expect("a predecessor exists off the origin");
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(AlignmentPath {
        pairs,
        cost: acc[[ta - 1, tb - 1]],
    })
}

/// Gathers aligned rows: row k of the outputs is `(a[i_k], b[j_k])`.
pub fn paired_frames(
    a: &FeatureSequence,
    b: &FeatureSequence,
    path: &AlignmentPath,
) -> Result<(FeatureSequence, FeatureSequence)> {
    if let Some(&(i, j)) = path.pairs.iter().find(|&&(i, j)| i >= a.frames() || j >= b.frames()) {
        return Err(Error::IndexOutOfRange(format!(
            "path pair ({i}, {j}) outside {}x{} sequences",
            a.frames(),
            b.frames()
        )));
    }
    let gather = |seq: &FeatureSequence, pick: &dyn Fn(&(usize, usize)) -> usize| {
        let mut out = Array2::zeros((path.len(), seq.dim()));
        for (k, pair) in path.pairs.iter().enumerate() {
            out.row_mut(k).assign(&seq.frame(pick(pair)));
        }
        FeatureSequence::new(seq.kind(), out)
    };
    Ok((gather(a, &|p| p.0)?, gather(b, &|p| p.1)?))
}

/// Renders the path as `i,j` CSV lines with a header.
pub fn path_to_csv(path: &AlignmentPath) -> String {
    let mut out = String::from("source,target\n");
    for (i, j) in &path.pairs {
        out.push_str(&format!("{i},{j}\n"));
    }
    out
}

/// Convenience for the common case of aligning two utterances on their
/// first `dims` columns.
pub fn dtw_align_leading(a: &FeatureSequence, b: &FeatureSequence, dims: usize) -> Result<AlignmentPath> {
    let lead = |s: &FeatureSequence| -> Result<FeatureSequence> {
        if s.dim() < dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: s.dim(),
                context: "leading alignment columns",
            });
        }
        FeatureSequence::new(FeatureKind::Generic, s.data().slice(ndarray::s![.., ..dims]).to_owned())
    };
    dtw_align(&lead(a)?, &lead(b)?)
}

//! Segmentation metrics: Pk, the three-window S measure, and
//! alignment-based precision and recall.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::corpus::{GoldSegmentation, GoldTranscript};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    Range(String),
    Shape(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Range(m) => write!(f, "range error: {m}"),
            EvalError::Shape(m) => write!(f, "shape error: {m}"),
        }
    }
}

impl core::error::Error for EvalError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Token,
    Sentence,
}

/// Boundaries of a sequence of `len` positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    len: usize,
    changepoints: Vec<usize>,
    axis: Axis,
}

impl Segmentation {
    pub fn new(len: usize, changepoints: Vec<usize>, axis: Axis) -> Result<Self, EvalError> {
        if changepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EvalError::Range(
                "changepoints must be strictly increasing".into(),
            ));
        }
        if changepoints.iter().any(|&c| c == 0 || c >= len) {
            return Err(EvalError::Range(alloc::format!(
                "changepoints must lie in (0, {len})"
            )));
        }
        Ok(Segmentation {
            len,
            changepoints,
            axis,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn changepoints(&self) -> &[usize] {
        &self.changepoints
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Segment index of every position.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len);
        let mut seg = 0;
        for i in 0..self.len {
            while seg < self.changepoints.len() && self.changepoints[seg] <= i {
                seg += 1;
            }
            out.push(seg);
        }
        out
    }

    /// Half-open `(start, end)` extents.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.changepoints.len() + 1);
        let mut start = 0;
        for &c in &self.changepoints {
            out.push((start, c));
            start = c;
        }
        out.push((start, self.len));
        out
    }

    pub fn segment_lengths(&self) -> Vec<usize> {
        self.segments().iter().map(|&(a, b)| b - a).collect()
    }
}

fn check_pair(reference: &Segmentation, hypothesis: &Segmentation) -> Result<(), EvalError> {
    if reference.len != hypothesis.len {
        return Err(EvalError::Shape(alloc::format!(
            "reference has length {}, hypothesis {}",
            reference.len,
            hypothesis.len
        )));
    }
    if reference.axis != hypothesis.axis {
        return Err(EvalError::Shape(
            "reference and hypothesis use different axes".into(),
        ));
    }
    Ok(())
}

/// Number of window pairs `(i, i + k)` on which the two segmentations
/// disagree about same-segment membership, and the number of pairs.
pub fn pk_counts(
    reference: &Segmentation,
    hypothesis: &Segmentation,
    k: usize,
) -> Result<(usize, usize), EvalError> {
    check_pair(reference, hypothesis)?;
    let n = reference.len;
    if k == 0 || k >= n {
        return Err(EvalError::Range(alloc::format!(
            "window {k} must lie in [1, {})",
            n
        )));
    }
    let r = reference.labels();
    let h = hypothesis.labels();
    let miss = (0..n - k)
        .filter(|&i| (r[i] == r[i + k]) != (h[i] == h[i + k]))
        .count();
    Ok((miss, n - k))
}

pub fn pk(reference: &Segmentation, hypothesis: &Segmentation, k: usize) -> Result<f64, EvalError> {
    let (miss, pairs) = pk_counts(reference, hypothesis, k)?;
    Ok(miss as f64 / pairs as f64)
}

/// Windows at the maximum, minimum and rounded mean reference segment length.
pub fn s_windows(reference: &Segmentation) -> Result<[usize; 3], EvalError> {
    if reference.len < 2 {
        return Err(EvalError::Range(
            "S measure needs at least two positions".into(),
        ));
    }
    let lens = reference.segment_lengths();
    let max = *lens.iter().max().unwrap();
    let min = *lens.iter().min().unwrap();
    let mean = libm::round(reference.len as f64 / lens.len() as f64) as usize;
    let clamp = |k: usize| k.clamp(1, reference.len - 1);
    Ok([clamp(max), clamp(min), clamp(mean)])
}

pub fn s_measure(reference: &Segmentation, hypothesis: &Segmentation) -> Result<f64, EvalError> {
    let ks = s_windows(reference)?;
    let mut total = 0.0;
    for k in ks {
        total += pk(reference, hypothesis, k)?;
    }
    Ok(total / 3.0)
}

/// All `(hypothesis, reference)` index pairs whose start and end are both
/// closer than `threshold`.
pub fn align(
    reference: &[(usize, usize)],
    hypothesis: &[(usize, usize)],
    threshold: usize,
) -> Vec<(usize, usize)> {
    let close = |a: usize, b: usize| a.abs_diff(b) < threshold;
    let mut out = Vec::new();
    for (h, &(hs, he)) in hypothesis.iter().enumerate() {
        for (r, &(rs, re)) in reference.iter().enumerate() {
            if close(hs, rs) && close(he, re) {
                out.push((h, r));
            }
        }
    }
    out
}

/// Fraction of hypothesis segments aligned to some reference segment, and
/// fraction of reference segments aligned to some hypothesis segment.
pub fn precision_recall(
    reference: &[(usize, usize)],
    hypothesis: &[(usize, usize)],
    threshold: usize,
) -> (f64, f64) {
    let pairs = align(reference, hypothesis, threshold);
    let mut hyp_hit = alloc::vec![false; hypothesis.len()];
    let mut ref_hit = alloc::vec![false; reference.len()];
    for &(h, r) in &pairs {
        hyp_hit[h] = true;
        ref_hit[r] = true;
    }
    let ratio = |hits: &[bool]| {
        if hits.is_empty() {
            0.0
        } else {
            hits.iter().filter(|&&x| x).count() as f64 / hits.len() as f64
        }
    };
    (ratio(&hyp_hit), ratio(&ref_hit))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentThresholds {
    pub level1: usize,
    pub level2: usize,
}

impl Default for AlignmentThresholds {
    fn default() -> Self {
        AlignmentThresholds {
            level1: 10,
            level2: 500,
        }
    }
}

/// The six columns of a two-level segmentation evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub pr1: f64,
    pub rc1: f64,
    pub s1: f64,
    pub pr2: f64,
    pub rc2: f64,
    pub s2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptScores {
    pub id: String,
    #[serde(flatten)]
    pub scores: Scores,
    /// Pk of level 1 at the mean gold segment length.
    pub pk1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub thresholds: AlignmentThresholds,
    pub transcripts: Vec<TranscriptScores>,
    pub mean: Scores,
    pub mean_pk1: f64,
}

fn token_axis(gold: &GoldTranscript) -> Result<(usize, Vec<usize>), EvalError> {
    let missing = || {
        EvalError::Shape(alloc::format!(
            "transcript {:?} lacks token counts",
            gold.id
        ))
    };
    let n = gold.num_tokens.ok_or_else(missing)?;
    let starts = gold.sentence_starts.clone().ok_or_else(missing)?;
    if starts.last() != Some(&n) {
        return Err(EvalError::Shape(alloc::format!(
            "transcript {:?}: sentence starts do not end at {n}",
            gold.id
        )));
    }
    Ok((n, starts))
}

fn sentence_to_token(cps: &[usize], starts: &[usize], id: &str) -> Result<Vec<usize>, EvalError> {
    cps.iter()
        .map(|&c| {
            starts.get(c).copied().ok_or_else(|| {
                EvalError::Range(alloc::format!(
                    "transcript {id:?}: sentence {c} out of range"
                ))
            })
        })
        .collect()
}

/// Level-1 Pk at the rounded mean gold segment length.
pub fn pk_at_mean(reference: &Segmentation, hypothesis: &Segmentation) -> Result<f64, EvalError> {
    pk(reference, hypothesis, s_windows(reference)?[2])
}

/// Score one predicted transcript against gold. Both levels are measured on
/// the token axis; sentence changepoints map to their first token.
pub fn evaluate_transcript(
    gold: &GoldTranscript,
    pred: &GoldTranscript,
    thresholds: &AlignmentThresholds,
) -> Result<TranscriptScores, EvalError> {
    if gold.id != pred.id {
        return Err(EvalError::Shape(alloc::format!(
            "gold id {:?} does not match prediction {:?}",
            gold.id,
            pred.id
        )));
    }
    let (n, starts) = token_axis(gold)?;
    if let Some(pn) = pred.num_tokens {
        if pn != n {
            return Err(EvalError::Shape(alloc::format!(
                "transcript {:?}: token counts differ",
                gold.id
            )));
        }
    }
    let r1 = Segmentation::new(n, gold.level1.clone(), Axis::Token)?;
    let h1 = Segmentation::new(n, pred.level1.clone(), Axis::Token)?;
    let r2 = Segmentation::new(
        n,
        sentence_to_token(&gold.level2, &starts, &gold.id)?,
        Axis::Token,
    )?;
    let h2 = Segmentation::new(
        n,
        sentence_to_token(&pred.level2, &starts, &gold.id)?,
        Axis::Token,
    )?;
    let (pr1, rc1) = precision_recall(&r1.segments(), &h1.segments(), thresholds.level1);
    let (pr2, rc2) = precision_recall(&r2.segments(), &h2.segments(), thresholds.level2);
    Ok(TranscriptScores {
        id: gold.id.clone(),
        scores: Scores {
            pr1,
            rc1,
            s1: s_measure(&r1, &h1)?,
            pr2,
            rc2,
            s2: s_measure(&r2, &h2)?,
        },
        pk1: pk_at_mean(&r1, &h1)?,
    })
}

pub fn evaluate(
    gold: &GoldSegmentation,
    pred: &GoldSegmentation,
    thresholds: &AlignmentThresholds,
) -> Result<SegmentationReport, EvalError> {
    if gold.transcripts.len() != pred.transcripts.len() {
        return Err(EvalError::Shape(alloc::format!(
            "gold has {} transcripts, prediction {}",
            gold.transcripts.len(),
            pred.transcripts.len()
        )));
    }
    if gold.transcripts.is_empty() {
        return Err(EvalError::Shape("nothing to evaluate".into()));
    }
    let transcripts = gold
        .transcripts
        .iter()
        .zip(&pred.transcripts)
        .map(|(g, p)| evaluate_transcript(g, p, thresholds))
        .collect::<Result<Vec<_>, _>>()?;
    let n = transcripts.len() as f64;
    let mut mean = Scores::default();
    let mut mean_pk1 = 0.0;
    for t in &transcripts {
        mean.pr1 += t.scores.pr1 / n;
        mean.rc1 += t.scores.rc1 / n;
        mean.s1 += t.scores.s1 / n;
        mean.pr2 += t.scores.pr2 / n;
        mean.rc2 += t.scores.rc2 / n;
        mean.s2 += t.scores.s2 / n;
        mean_pk1 += t.pk1 / n;
    }
    Ok(SegmentationReport {
        thresholds: *thresholds,
        transcripts,
        mean,
        mean_pk1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn seg(len: usize, cps: &[usize]) -> Segmentation {
        Segmentation::new(len, cps.to_vec(), Axis::Token).unwrap()
    }

    /// Pair counting straight from the definition.
    fn brute(len: usize, r: &[usize], h: &[usize], k: usize) -> f64 {
        let same = |cps: &[usize], a: usize, b: usize| !cps.iter().any(|&c| a < c && c <= b);
        let miss = (0..len - k)
            .filter(|&i| same(r, i, i + k) != same(h, i, i + k))
            .count();
        miss as f64 / (len - k) as f64
    }

    #[test]
    fn pk_hand_case() {
        let v = pk(&seg(10, &[5]), &seg(10, &[4]), 3).unwrap();
        assert_eq!(v, brute(10, &[5], &[4], 3));
        assert_eq!(v, 2.0 / 7.0);
    }

    #[test]
    fn pk_extremes() {
        let all: Vec<usize> = (1..8).collect();
        assert_eq!(pk(&seg(8, &[]), &seg(8, &all), 1).unwrap(), 1.0);
        assert_eq!(pk(&seg(8, &[3]), &seg(8, &[3]), 4).unwrap(), 0.0);
        assert!(pk(&seg(8, &[3]), &seg(8, &[3]), 8).is_err());
        assert!(pk(&seg(8, &[3]), &seg(9, &[3]), 2).is_err());
    }

    #[test]
    fn s_measure_hand_case() {
        let (r, h) = (seg(12, &[4, 8]), seg(12, &[6]));
        let want = (0..3).map(|_| brute(12, &[4, 8], &[6], 4)).sum::<f64>() / 3.0;
        assert!((s_measure(&r, &h).unwrap() - want).abs() < 1e-15);
        let r = seg(12, &[2, 8]);
        let ks = s_windows(&r).unwrap();
        assert_eq!(ks, [6, 2, 4]);
        let want = ks.iter().map(|&k| brute(12, &[2, 8], &[6], k)).sum::<f64>() / 3.0;
        assert!((s_measure(&r, &h).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn s_windows_clamp_to_length() {
        assert_eq!(s_windows(&seg(5, &[])).unwrap(), [4, 4, 4]);
    }

    #[test]
    fn alignment_is_strict() {
        let r = [(0, 20), (20, 40)];
        assert_eq!(align(&r, &r, 10), vec![(0, 0), (1, 1)]);
        assert!(align(&r, &[(10, 30)], 10).is_empty());
        assert_eq!(align(&r, &[(9, 29)], 10), vec![(0, 0)]);
        // one hypothesis straddling two short reference segments
        assert_eq!(align(&[(0, 3), (3, 6)], &[(1, 5)], 4), vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn precision_recall_ratios() {
        let r = [(0, 10), (10, 20), (20, 30), (30, 40)];
        let h = [(0, 10), (10, 30), (30, 40)];
        assert_eq!(precision_recall(&r, &h, 3), (2.0 / 3.0, 2.0 / 4.0));
        assert_eq!(precision_recall(&r, &r, 1), (1.0, 1.0));
        assert_eq!(precision_recall(&r, &[], 5), (0.0, 0.0));
        assert_eq!(precision_recall(&[(0, 10)], &[(100, 200)], 5), (0.0, 0.0));
    }

    #[test]
    fn evaluate_identity() {
        let g = GoldTranscript {
            id: "a".into(),
            level1: vec![3, 7],
            level2: vec![1],
            categories: None,
            num_tokens: Some(10),
            sentence_starts: Some(vec![0, 5, 10]),
        };
        let gold = GoldSegmentation {
            transcripts: vec![g],
        };
        let rep = evaluate(&gold, &gold, &AlignmentThresholds::default()).unwrap();
        assert_eq!(
            rep.mean,
            Scores {
                pr1: 1.0,
                rc1: 1.0,
                s1: 0.0,
                pr2: 1.0,
                rc2: 1.0,
                s2: 0.0
            }
        );
    }
}

//! Three-level grouped sequential data (tokens in sentences in transcripts),
//! the latent segmentation state, and gold annotations.
//!
//! Token positions are 0-based within their transcript. Categories are
//! 0-based `0..K`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use serde::{Deserialize, Serialize};

pub type TopicId = u32;

/// Where `prev(i)` is defined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrevScope {
    /// `prev(i) = i - 1` anywhere inside a transcript.
    #[default]
    Transcript,
    /// `prev(i)` is undefined at the first token of every sentence.
    Sentence,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CorpusError {
    Format(String),
    Range {
        transcript: usize,
        token: u32,
        vocab_size: usize,
    },
    Shape(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::Format(m) => write!(f, "format error: {m}"),
            CorpusError::Range {
                transcript,
                token,
                vocab_size,
            } => {
                write!(f, "token id {token} in transcript {transcript} out of range for vocabulary size {vocab_size}")
            }
            CorpusError::Shape(m) => write!(f, "shape error: {m}"),
        }
    }
}

impl core::error::Error for CorpusError {}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    tokens: Vec<u32>,
    /// Token offset of every sentence start, plus a final entry equal to the token count.
    sentence_starts: Vec<usize>,
}

impl Transcript {
    /// Build from nested sentences. Empty sentences are rejected.
    pub fn from_sentences(
        id: impl Into<String>,
        sentences: &[Vec<u32>],
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        let mut tokens = Vec::new();
        let mut sentence_starts = Vec::with_capacity(sentences.len() + 1);
        for (j, s) in sentences.iter().enumerate() {
            if s.is_empty() {
                return Err(CorpusError::Format(alloc::format!(
                    "transcript {id:?}: sentence {j} is empty"
                )));
            }
            sentence_starts.push(tokens.len());
            tokens.extend_from_slice(s);
        }
        if sentences.is_empty() {
            return Err(CorpusError::Format(alloc::format!(
                "transcript {id:?} has no sentences"
            )));
        }
        sentence_starts.push(tokens.len());
        Ok(Transcript {
            id,
            tokens,
            sentence_starts,
        })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_sentences(&self) -> usize {
        self.sentence_starts.len() - 1
    }

    /// Token offsets of sentence starts followed by the token count.
    pub fn sentence_starts(&self) -> &[usize] {
        &self.sentence_starts
    }

    pub fn sentence_start(&self, j: usize) -> usize {
        self.sentence_starts[j]
    }

    pub fn sentence_range(&self, j: usize) -> Range<usize> {
        self.sentence_starts[j]..self.sentence_starts[j + 1]
    }

    /// Token range covered by sentences `sentences`.
    pub fn token_range(&self, sentences: Range<usize>) -> Range<usize> {
        self.sentence_starts[sentences.start]..self.sentence_starts[sentences.end]
    }

    pub fn sentence(&self, j: usize) -> &[u32] {
        &self.tokens[self.sentence_range(j)]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.num_sentences()).map(move |j| self.sentence(j))
    }

    /// Sentence containing token `i`.
    pub fn sentence_of(&self, i: usize) -> usize {
        match self.sentence_starts.binary_search(&i) {
            Ok(j) => j,
            Err(j) => j - 1,
        }
    }

    pub fn is_sentence_start(&self, i: usize) -> bool {
        self.sentence_starts[..self.num_sentences()]
            .binary_search(&i)
            .is_ok()
    }

    pub fn prev(&self, i: usize, scope: PrevScope) -> Option<usize> {
        if i == 0 || i >= self.tokens.len() {
            return None;
        }
        match scope {
            PrevScope::Transcript => Some(i - 1),
            PrevScope::Sentence if self.is_sentence_start(i) => None,
            PrevScope::Sentence => Some(i - 1),
        }
    }

    pub fn next(&self, i: usize, scope: PrevScope) -> Option<usize> {
        let j = i + 1;
        if j >= self.tokens.len() {
            return None;
        }
        match scope {
            PrevScope::Transcript => Some(j),
            PrevScope::Sentence if self.is_sentence_start(j) => None,
            PrevScope::Sentence => Some(j),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedCorpus {
    pub vocab_size: usize,
    pub transcripts: Vec<Transcript>,
}

impl GroupedCorpus {
    pub fn new(vocab_size: usize, transcripts: Vec<Transcript>) -> Result<Self, CorpusError> {
        if vocab_size == 0 {
            return Err(CorpusError::Format(
                "vocabulary size must be positive".into(),
            ));
        }
        for (g, t) in transcripts.iter().enumerate() {
            if let Some(&bad) = t.tokens.iter().find(|&&y| y as usize >= vocab_size) {
                return Err(CorpusError::Range {
                    transcript: g,
                    token: bad,
                    vocab_size,
                });
            }
        }
        Ok(GroupedCorpus {
            vocab_size,
            transcripts,
        })
    }

    pub fn num_tokens(&self) -> usize {
        self.transcripts.iter().map(|t| t.num_tokens()).sum()
    }

    /// Corpus containing only transcript `g`.
    pub fn single(&self, g: usize) -> GroupedCorpus {
        GroupedCorpus {
            vocab_size: self.vocab_size,
            transcripts: alloc::vec![self.transcripts[g].clone()],
        }
    }
}

/// Latent variables of one transcript.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptState {
    /// Topic (story) per token.
    pub z1: Vec<TopicId>,
    /// Category per sentence.
    pub z2: Vec<usize>,
    /// First sentence of segments `1..K`.
    pub changepoints: Vec<usize>,
    /// Segment sizes in sentences.
    pub sizes: Vec<usize>,
    /// Topics with `B = 0` at the end of the transcript, ascending.
    pub blocked: Vec<TopicId>,
}

impl TranscriptState {
    /// Rebuild `z2` and `sizes` from changepoints.
    pub fn from_changepoints(
        z1: Vec<TopicId>,
        changepoints: Vec<usize>,
        num_sentences: usize,
    ) -> Self {
        let sizes = sizes_from_changepoints(&changepoints, num_sentences);
        let z2 = z2_from_sizes(&sizes);
        let blocked = blocked_from_z1(&z1);
        TranscriptState {
            z1,
            z2,
            changepoints,
            sizes,
            blocked,
        }
    }

    pub fn num_segments(&self) -> usize {
        self.sizes.len()
    }

    /// Sentence range of segment `s`.
    pub fn segment_sentences(&self, s: usize) -> Range<usize> {
        let start = if s == 0 { 0 } else { self.changepoints[s - 1] };
        let end = if s < self.changepoints.len() {
            self.changepoints[s]
        } else {
            self.z2.len()
        };
        start..end
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentState {
    pub transcripts: Vec<TranscriptState>,
    pub seed: u64,
}

pub fn sizes_from_changepoints(changepoints: &[usize], num_sentences: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(changepoints.len() + 1);
    let mut prev = 0;
    for &c in changepoints {
        sizes.push(c.saturating_sub(prev));
        prev = c;
    }
    sizes.push(num_sentences.saturating_sub(prev));
    sizes
}

pub fn changepoints_from_sizes(sizes: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    let mut out = Vec::with_capacity(sizes.len().saturating_sub(1));
    for &n in &sizes[..sizes.len().saturating_sub(1)] {
        acc += n;
        out.push(acc);
    }
    out
}

pub fn z2_from_sizes(sizes: &[usize]) -> Vec<usize> {
    let mut z2 = Vec::with_capacity(sizes.iter().sum());
    for (s, &n) in sizes.iter().enumerate() {
        z2.extend(core::iter::repeat_n(s, n));
    }
    z2
}

/// Positions `j > 0` with `z[j] != z[j - 1]`.
pub fn change_positions<T: PartialEq>(z: &[T]) -> Vec<usize> {
    (1..z.len()).filter(|&j| z[j] != z[j - 1]).collect()
}

pub fn blocked_from_z1(z1: &[TopicId]) -> Vec<TopicId> {
    let mut b: Vec<TopicId> = z1.to_vec();
    b.sort_unstable();
    b.dedup();
    b
}

/// Level-1 changepoints (token indices) and level-2 changepoints (sentence
/// indices) per transcript.
pub fn segments_from_state(
    state: &LatentState,
    corpus: &GroupedCorpus,
) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>), CorpusError> {
    if state.transcripts.len() != corpus.transcripts.len() {
        return Err(CorpusError::Shape(alloc::format!(
            "state has {} transcripts, corpus has {}",
            state.transcripts.len(),
            corpus.transcripts.len()
        )));
    }
    let mut l1 = Vec::with_capacity(corpus.transcripts.len());
    let mut l2 = Vec::with_capacity(corpus.transcripts.len());
    for (g, (ts, t)) in state
        .transcripts
        .iter()
        .zip(&corpus.transcripts)
        .enumerate()
    {
        if ts.z1.len() != t.num_tokens() || ts.z2.len() != t.num_sentences() {
            return Err(CorpusError::Shape(alloc::format!(
                "transcript {g}: state length does not match corpus"
            )));
        }
        l1.push(change_positions(&ts.z1));
        l2.push(ts.changepoints.clone());
    }
    Ok((l1, l2))
}

/// A violated latent-state invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Shape {
        transcript: usize,
        message: String,
    },
    Z2NotNondecreasing {
        transcript: usize,
        sentence: usize,
    },
    WrongCategoryCount {
        transcript: usize,
        expected: usize,
        found: usize,
    },
    SizesMismatch {
        transcript: usize,
    },
    ChangepointsMismatch {
        transcript: usize,
    },
    TopicNonContiguous {
        transcript: usize,
        topic: TopicId,
    },
    TopicCrossesCategories {
        transcript: usize,
        topic: TopicId,
    },
    BlockedMismatch {
        transcript: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                transcript,
                message,
            } => write!(f, "transcript {transcript}: {message}"),
            Violation::Z2NotNondecreasing {
                transcript,
                sentence,
            } => {
                write!(
                    f,
                    "transcript {transcript}: Z2 not nondecreasing at sentence {sentence}"
                )
            }
            Violation::WrongCategoryCount {
                transcript,
                expected,
                found,
            } => {
                write!(f, "transcript {transcript}: Z2 takes {found} values, expected categories 0..{expected}")
            }
            Violation::SizesMismatch { transcript } => {
                write!(f, "transcript {transcript}: sizes N disagree with Z2")
            }
            Violation::ChangepointsMismatch { transcript } => {
                write!(
                    f,
                    "transcript {transcript}: changepoints I disagree with Z2"
                )
            }
            Violation::TopicNonContiguous { transcript, topic } => {
                write!(f, "transcript {transcript}: topic {topic} non-contiguous")
            }
            Violation::TopicCrossesCategories { transcript, topic } => {
                write!(
                    f,
                    "transcript {transcript}: topic {topic} spans two categories"
                )
            }
            Violation::BlockedMismatch { transcript } => {
                write!(
                    f,
                    "transcript {transcript}: blocked mask disagrees with used topics"
                )
            }
        }
    }
}

/// Check every latent-state invariant for a K-category segmentation.
pub fn validate_state(
    state: &LatentState,
    corpus: &GroupedCorpus,
    k: usize,
) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if state.transcripts.len() != corpus.transcripts.len() {
        v.push(Violation::Shape {
            transcript: 0,
            message: "transcript count mismatch".into(),
        });
        return Err(v);
    }
    for (g, (ts, t)) in state
        .transcripts
        .iter()
        .zip(&corpus.transcripts)
        .enumerate()
    {
        if ts.z1.len() != t.num_tokens() || ts.z2.len() != t.num_sentences() {
            v.push(Violation::Shape {
                transcript: g,
                message: "Z1/Z2 length does not match corpus".into(),
            });
            continue;
        }
        if let Some(j) = (1..ts.z2.len()).find(|&j| ts.z2[j] < ts.z2[j - 1]) {
            v.push(Violation::Z2NotNondecreasing {
                transcript: g,
                sentence: j,
            });
        }
        let mut seen: Vec<usize> = ts.z2.clone();
        seen.dedup();
        let exact = seen.len() == k && seen.iter().enumerate().all(|(s, &c)| s == c);
        if !exact {
            seen.sort_unstable();
            seen.dedup();
            v.push(Violation::WrongCategoryCount {
                transcript: g,
                expected: k,
                found: seen.len(),
            });
        }
        let mut counts =
            alloc::vec![0usize; k.max(ts.z2.iter().copied().max().map_or(0, |m| m + 1))];
        for &c in &ts.z2 {
            counts[c] += 1;
        }
        counts.truncate(k);
        if ts.sizes != counts || ts.sizes.iter().sum::<usize>() != t.num_sentences() {
            v.push(Violation::SizesMismatch { transcript: g });
        }
        if ts.changepoints != change_positions(&ts.z2) || ts.changepoints.len() + 1 != k {
            v.push(Violation::ChangepointsMismatch { transcript: g });
        }
        // topic runs: contiguous and inside one category
        let mut runs: BTreeMap<TopicId, (usize, usize)> = BTreeMap::new();
        let mut reported = Vec::new();
        for (i, &z) in ts.z1.iter().enumerate() {
            match runs.get_mut(&z) {
                Some((_, last)) if *last + 1 == i => *last = i,
                Some(_) => {
                    if !reported.contains(&z) {
                        reported.push(z);
                        v.push(Violation::TopicNonContiguous {
                            transcript: g,
                            topic: z,
                        });
                    }
                }
                None => {
                    runs.insert(z, (i, i));
                }
            }
        }
        for (&z, &(first, last)) in &runs {
            if ts.z2[t.sentence_of(first)] != ts.z2[t.sentence_of(last)] {
                v.push(Violation::TopicCrossesCategories {
                    transcript: g,
                    topic: z,
                });
            }
        }
        if ts.blocked != blocked_from_z1(&ts.z1) {
            v.push(Violation::BlockedMismatch { transcript: g });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Gold (or predicted) boundaries of one transcript.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldTranscript {
    pub id: String,
    /// Token indices where the story changes.
    pub level1: Vec<usize>,
    /// Sentence indices where the category changes.
    pub level2: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<usize>>,
    /// Token count, so metrics can be computed without the corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_tokens: Option<usize>,
    /// Token offsets of sentence starts plus the token count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_starts: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSegmentation {
    pub transcripts: Vec<GoldTranscript>,
}

impl GoldSegmentation {
    /// Gold annotations implied by a latent state.
    pub fn from_state(state: &LatentState, corpus: &GroupedCorpus) -> Result<Self, CorpusError> {
        let (l1, l2) = segments_from_state(state, corpus)?;
        let transcripts = corpus
            .transcripts
            .iter()
            .zip(l1)
            .zip(l2)
            .zip(&state.transcripts)
            .map(|(((t, level1), level2), ts)| {
                let mut cats = ts.z2.clone();
                cats.dedup();
                GoldTranscript {
                    id: t.id.clone(),
                    level1,
                    level2,
                    categories: Some(cats),
                    num_tokens: Some(t.num_tokens()),
                    sentence_starts: Some(t.sentence_starts().to_vec()),
                }
            })
            .collect();
        Ok(GoldSegmentation { transcripts })
    }

    pub fn validate(&self, corpus: &GroupedCorpus, k: Option<usize>) -> Result<(), CorpusError> {
        if self.transcripts.len() != corpus.transcripts.len() {
            return Err(CorpusError::Shape(
                "gold and corpus transcript counts differ".into(),
            ));
        }
        for (g, (gt, t)) in self.transcripts.iter().zip(&corpus.transcripts).enumerate() {
            let inc = |xs: &[usize], len: usize| {
                xs.windows(2).all(|w| w[0] < w[1]) && xs.iter().all(|&x| x > 0 && x < len)
            };
            if !inc(&gt.level1, t.num_tokens()) || !inc(&gt.level2, t.num_sentences()) {
                return Err(CorpusError::Shape(alloc::format!(
                    "transcript {g}: changepoints not increasing or out of range"
                )));
            }
            if let Some(k) = k {
                if gt.level2.len() + 1 != k {
                    return Err(CorpusError::Shape(alloc::format!(
                        "transcript {g}: expected {} level-2 changepoints",
                        k - 1
                    )));
                }
            }
        }
        Ok(())
    }
}

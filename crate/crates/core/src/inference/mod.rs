//! Blocked Gibbs segmentation.
//!
//! Each sweep visits every transcript and, for each category boundary,
//! jointly resamples the boundary together with the story assignments of the
//! two adjacent segments, then block-resamples each segment's story
//! assignment. Both moves are Metropolis-Hastings steps whose proposals come
//! from exact forward filtering on a Markov approximation of the segment
//! conditional, so the chain leaves the exact conditional invariant. Topic
//! rows are re-estimated from the counts once per sweep.

mod baseline;
mod segment;

pub use baseline::baseline_markov;
pub use segment::Label;

use alloc::borrow::Cow;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    changepoints_from_sizes, validate_state, GroupedCorpus, LatentState, PrevScope, TopicId,
    Transcript, TranscriptState,
};
use crate::generative::{discretize_sizes, GenError, SizeConcentration};
use crate::math;
use crate::rng::{stream_rng, streams, SeededRng};
use crate::topics::{CountTables, TopicError, TopicMatrix};
use segment::{labels_from_ids, SegmentModel};

/// Relative joint log-likelihood changes are compared across this many sweeps.
pub const CONVERGENCE_WINDOW: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: SizeConcentration,
    pub rho: f64,
    /// Maximum number of sweeps.
    pub iterations: usize,
    pub burn_in: usize,
    /// Largest distance a changepoint may move in one step.
    pub candidate_window: Option<usize>,
    pub seed: u64,
    /// Stop once the relative joint log-likelihood change over
    /// [`CONVERGENCE_WINDOW`] sweeps falls below this; `None` runs every sweep.
    pub epsilon: Option<f64>,
    pub prev_scope: PrevScope,
    /// Re-estimate topic rows after every sweep.
    pub update_phi: bool,
    /// Allow stories that no existing topic explains.
    pub allow_new_topics: bool,
    /// Half-width in tokens of the word-frequency window that scores new
    /// stories in move proposals.
    #[serde(default = "default_proposal_window")]
    pub proposal_window: usize,
    /// Let uncategorized topics serve several categories during the first
    /// half of burn-in, then restore the one-category rule.
    #[serde(default = "default_relax")]
    pub relax_burn_in: bool,
}

fn default_relax() -> bool {
    true
}

fn default_proposal_window() -> usize {
    25
}

impl Default for InferenceParams {
    fn default() -> Self {
        InferenceParams {
            k: 5,
            alpha: 1.0,
            beta: 0.01,
            gamma: SizeConcentration::Symmetric(5.0),
            rho: 0.993,
            iterations: 500,
            burn_in: 100,
            candidate_window: None,
            seed: 0,
            epsilon: Some(1e-4),
            prev_scope: PrevScope::Transcript,
            update_phi: true,
            allow_new_topics: true,
            proposal_window: default_proposal_window(),
            relax_burn_in: default_relax(),
        }
    }
}

impl InferenceParams {
    pub fn validate(&self) -> Result<(), InferError> {
        let err = |m: String| Err(InferError::Config(m));
        if self.k == 0 {
            return err("k must be at least 1".into());
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return err("alpha and beta must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return err(alloc::format!("rho must lie in [0, 1], got {}", self.rho));
        }
        let g = self.gamma.expand(self.k);
        if g.len() != self.k || g.iter().any(|&x| !(x > 0.0)) {
            return err(alloc::format!("gamma needs {} positive entries", self.k));
        }
        if self.burn_in >= self.iterations && !(self.iterations == 0 && self.burn_in == 0) {
            return err(alloc::format!(
                "burn_in {} must be below iterations {}",
                self.burn_in,
                self.iterations
            ));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return err("epsilon must be positive".into());
            }
        }
        if self.proposal_window == 0 {
            return err("proposal_window must be positive".into());
        }
        if self.candidate_window == Some(0) {
            return err("candidate_window must be positive".into());
        }
        Ok(())
    }

    fn alpha_new(&self) -> f64 {
        if self.allow_new_topics {
            self.alpha
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InferError {
    Config(String),
    Infeasible(String),
    /// Every story option of a segment is masked.
    Exhausted(String),
    Shape(String),
    Topic(TopicError),
}

impl fmt::Display for InferError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InferError::Config(m) => write!(f, "config error: {m}"),
            InferError::Infeasible(m) => write!(f, "infeasible: {m}"),
            InferError::Exhausted(m) => write!(f, "exhausted: {m}"),
            InferError::Shape(m) => write!(f, "shape error: {m}"),
            InferError::Topic(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for InferError {}

impl From<TopicError> for InferError {
    fn from(e: TopicError) -> Self {
        InferError::Topic(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub joint_ll: f64,
    /// Level-2 changepoints (sentence indices) per transcript after the sweep.
    pub changepoints: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub state: LatentState,
    pub topics: TopicMatrix,
    pub trace: Vec<TraceEntry>,
    /// `[g][s][j]`: kept sweeps in which changepoint `s` of transcript `g` sat at sentence `j`.
    pub changepoint_counts: Vec<Vec<Vec<u32>>>,
    pub kept: usize,
    pub converged: bool,
}

impl InferenceResult {
    /// Posterior frequency of each sentence as changepoint `s` of transcript `g`.
    pub fn changepoint_frequencies(&self, g: usize, s: usize) -> Vec<f64> {
        let n = self.kept.max(1) as f64;
        self.changepoint_counts[g][s]
            .iter()
            .map(|&c| c as f64 / n)
            .collect()
    }
}

struct TopicStore {
    category: Vec<Option<usize>>,
    prior_use: Vec<f64>,
    phi: Vec<Vec<f64>>,
    valid: Vec<bool>,
}

impl TopicStore {
    fn len(&self) -> usize {
        self.phi.len()
    }
}

struct Assignment {
    z1: Vec<TopicId>,
    changepoints: Vec<usize>,
}

impl Assignment {
    fn segment_sentences(&self, s: usize, num_sentences: usize) -> Range<usize> {
        let start = if s == 0 { 0 } else { self.changepoints[s - 1] };
        let end = if s < self.changepoints.len() {
            self.changepoints[s]
        } else {
            num_sentences
        };
        start..end
    }
}

/// Blocked Gibbs sampler over a grouped corpus.
pub struct Sampler<'c> {
    corpus: &'c GroupedCorpus,
    params: InferenceParams,
    gamma: Vec<f64>,
    tables: CountTables,
    topics: TopicStore,
    states: Vec<Assignment>,
    rngs: Vec<SeededRng>,
    forced: Vec<Vec<bool>>,
    masked: bool,
    relaxed: bool,
}

fn build_model<'a>(
    tables: &CountTables,
    topics: &'a TopicStore,
    params: &InferenceParams,
    s: usize,
    masked: bool,
    relaxed: bool,
) -> SegmentModel<'a> {
    let v = tables.vocab_size();
    let vb = v as f64 * params.beta;
    let mut entries = Vec::new();
    for k in 0..topics.len() {
        let id = k as TopicId;
        let available = match topics.category[k] {
            Some(c) => c == s,
            None => relaxed || tables.use_outside(s, id) == 0,
        };
        let w = tables.use_count(s, id) as f64 + topics.prior_use[k];
        if !available || w <= 0.0 {
            continue;
        }
        let row: Cow<'a, [f64]> = if topics.valid[k] {
            Cow::Borrowed(&topics.phi[k])
        } else {
            let n = tables.topic_tokens(id) as f64;
            Cow::Owned(
                (0..v)
                    .map(|y| (tables.topic_word(id, y as u32) as f64 + params.beta) / (n + vb))
                    .collect(),
            )
        };
        entries.push((id, w, row));
    }
    let model = SegmentModel::new(entries, params.alpha_new(), params.rho, params.beta, v);
    if masked {
        model
    } else {
        model.unmasked()
    }
}

fn log_ratio(target_new: f64, approx_new: f64, target_cur: f64, approx_cur: f64) -> f64 {
    if target_new == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if target_cur == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (target_new - approx_new) - (target_cur - approx_cur)
}

fn accept<R: Rng + ?Sized>(rng: &mut R, log_r: f64) -> bool {
    if log_r >= 0.0 {
        return true;
    }
    if log_r == f64::NEG_INFINITY || log_r.is_nan() {
        return false;
    }
    math::ln(math::open01(rng)) < log_r
}

fn shares_old(a: &[Label], b: &[Label]) -> bool {
    let left: BTreeSet<TopicId> = a
        .iter()
        .filter_map(|l| {
            if let Label::Old(k) = l {
                Some(*k)
            } else {
                None
            }
        })
        .collect();
    b.iter()
        .any(|l| matches!(l, Label::Old(k) if left.contains(k)))
}

fn check_inputs(
    corpus: &GroupedCorpus,
    init: Option<&TopicMatrix>,
    params: &InferenceParams,
    check_categories: bool,
) -> Result<(), InferError> {
    params.validate()?;
    if corpus.transcripts.is_empty() {
        return Err(InferError::Shape("corpus has no transcripts".into()));
    }
    for t in &corpus.transcripts {
        if t.num_sentences() < params.k {
            return Err(InferError::Infeasible(alloc::format!(
                "transcript {:?} has {} sentences, fewer than k = {}",
                t.id,
                t.num_sentences(),
                params.k
            )));
        }
    }
    if let Some(m) = init {
        if m.vocab_size != corpus.vocab_size {
            return Err(InferError::Shape(alloc::format!(
                "topics have vocabulary {}, corpus {}",
                m.vocab_size,
                corpus.vocab_size
            )));
        }
        m.validate()?;
        if let Some(c) = m
            .category
            .iter()
            .flatten()
            .find(|&&c| check_categories && c >= params.k)
        {
            return Err(InferError::Config(alloc::format!(
                "topic category {c} is not below k = {}",
                params.k
            )));
        }
    }
    Ok(())
}

impl<'c> Sampler<'c> {
    /// Validate inputs and draw the initial state.
    pub fn new(
        corpus: &'c GroupedCorpus,
        init: Option<&TopicMatrix>,
        params: &InferenceParams,
    ) -> Result<Self, InferError> {
        check_inputs(corpus, init, params, true)?;
        Self::build(corpus, init, params, true, streams::INFERENCE_BASE)
    }

    /// Toggle the relaxed phase, in which uncategorized topics may serve
    /// several categories at once, and so may recur across the segments of a
    /// transcript. Leaving it restores the one-category rule and the mask.
    pub fn set_relaxed(&mut self, relaxed: bool) -> Result<(), InferError> {
        if self.relaxed && !relaxed {
            self.relaxed = false;
            self.harden()?;
        }
        self.relaxed = relaxed;
        Ok(())
    }

    /// Restore the one-category rule after a relaxed phase: each shared
    /// uncategorized topic keeps its most frequent category and every segment
    /// that uses it elsewhere is redrawn.
    fn harden(&mut self) -> Result<(), InferError> {
        let k = self.params.k;
        let mut pinned = Vec::new();
        for t in 0..self.topics.len() {
            let id = t as TopicId;
            if self.topics.category[t].is_some() {
                continue;
            }
            let users: Vec<usize> = (0..k)
                .filter(|&s| self.tables.use_count(s, id) > 0)
                .collect();
            if users.len() > 1 {
                let best = *users
                    .iter()
                    .max_by_key(|&&s| (self.tables.use_count(s, id), core::cmp::Reverse(s)))
                    .unwrap();
                self.topics.category[t] = Some(best);
                pinned.push(t);
            }
        }
        for g in 0..self.states.len() {
            for s in 0..k {
                let range = self.token_range(g, s);
                let bad = self
                    .segment_topics(g, range)
                    .iter()
                    .any(|&t| self.topics.category[t as usize].is_some_and(|c| c != s));
                if bad {
                    self.block_move(g, s, true)?;
                }
            }
        }
        for t in pinned {
            self.topics.category[t] = None;
        }
        Ok(())
    }

    fn build(
        corpus: &'c GroupedCorpus,
        init: Option<&TopicMatrix>,
        params: &InferenceParams,
        masked: bool,
        stream_base: u64,
    ) -> Result<Self, InferError> {
        let v = corpus.vocab_size;
        let topics = match init {
            Some(m) => TopicStore {
                category: m.category.clone(),
                prior_use: m.usage.iter().map(|&u| u as f64).collect(),
                phi: m.rows.clone(),
                valid: m.active.clone(),
            },
            None => TopicStore {
                category: Vec::new(),
                prior_use: Vec::new(),
                phi: Vec::new(),
                valid: Vec::new(),
            },
        };
        let mut tables = CountTables::new(v, params.k);
        if topics.len() > 0 {
            tables.ensure_topic((topics.len() - 1) as TopicId);
        }
        let forced = corpus
            .transcripts
            .iter()
            .map(|t| {
                (0..t.num_tokens())
                    .map(|i| {
                        i == 0
                            || (params.prev_scope == PrevScope::Sentence && t.is_sentence_start(i))
                    })
                    .collect()
            })
            .collect();
        let rngs = (0..corpus.transcripts.len())
            .map(|g| stream_rng(params.seed, stream_base + g as u64))
            .collect();
        let mut sampler = Sampler {
            corpus,
            params: params.clone(),
            gamma: params.gamma.expand(params.k),
            tables,
            topics,
            states: Vec::new(),
            rngs,
            forced,
            masked,
            relaxed: false,
        };
        for g in 0..corpus.transcripts.len() {
            sampler.initialize_transcript(g)?;
        }
        Ok(sampler)
    }

    fn transcript(&self, g: usize) -> &'c Transcript {
        &self.corpus.transcripts[g]
    }

    fn token_range(&self, g: usize, s: usize) -> Range<usize> {
        let t = self.transcript(g);
        t.token_range(self.states[g].segment_sentences(s, t.num_sentences()))
    }

    fn initialize_transcript(&mut self, g: usize) -> Result<(), InferError> {
        let t = self
            .corpus
            .transcripts
            .get(g)
            .ok_or_else(|| InferError::Shape("no such transcript".into()))?;
        let rng = &mut self.rngs[g];
        let fractions = math::sample_dirichlet(rng, &self.gamma);
        let sizes = discretize_sizes(&fractions, t.num_sentences()).map_err(|e| match e {
            GenError::Infeasible(m) => InferError::Infeasible(m),
            other => InferError::Config(alloc::format!("{other}")),
        })?;
        let changepoints = changepoints_from_sizes(&sizes);
        self.states.push(Assignment {
            z1: vec![0; t.num_tokens()],
            changepoints,
        });
        for s in 0..self.params.k {
            let range = self.token_range(g, s);
            let labels = {
                let model = build_model(
                    &self.tables,
                    &self.topics,
                    &self.params,
                    s,
                    self.masked,
                    self.relaxed,
                );
                if !model.feasible() {
                    return Err(InferError::Exhausted(alloc::format!(
                        "transcript {:?}, category {s}: no story available",
                        t.id
                    )));
                }
                let y = &t.tokens()[range.clone()];
                let forced = &self.forced[g][range.clone()];
                let rng = &mut self.rngs[g];
                if self.masked {
                    sequential_labels(&model, rng, y, forced)
                } else {
                    let e = vec![1.0 / self.corpus.vocab_size as f64; y.len()];
                    let (f, _) = model.forward(y, &e, forced);
                    let xs = model.sample_backward(rng, &f, forced, y.len());
                    model.label(rng, &xs, forced)
                }
            };
            let mut taken = Vec::new();
            self.write_labels(g, range.clone(), &labels, s, &mut taken);
            self.add_segment(g, s);
        }
        Ok(())
    }

    fn allocate(&mut self, s: usize, taken: &mut Vec<TopicId>) -> TopicId {
        let free = (0..self.topics.len() as TopicId).find(|&k| {
            self.topics.prior_use[k as usize] == 0.0
                && self.tables.total_use(k) == 0
                && self.tables.topic_tokens(k) == 0
                && !taken.contains(&k)
        });
        let k = match free {
            Some(k) => k,
            None => {
                let v = self.corpus.vocab_size;
                self.topics.phi.push(vec![1.0 / v as f64; v]);
                self.topics.category.push(None);
                self.topics.prior_use.push(0.0);
                self.topics.valid.push(false);
                let k = (self.topics.len() - 1) as TopicId;
                self.tables.ensure_topic(k);
                k
            }
        };
        self.topics.category[k as usize] = Some(s);
        self.topics.valid[k as usize] = false;
        taken.push(k);
        k
    }

    fn write_labels(
        &mut self,
        g: usize,
        range: Range<usize>,
        labels: &[Label],
        s: usize,
        taken: &mut Vec<TopicId>,
    ) {
        let mut fresh: Vec<TopicId> = Vec::new();
        for (i, &l) in range.zip(labels) {
            let k = match l {
                Label::Old(k) => k,
                Label::New(j) => {
                    let j = j as usize;
                    if j == fresh.len() {
                        let k = self.allocate(s, taken);
                        fresh.push(k);
                    }
                    fresh[j]
                }
            };
            self.states[g].z1[i] = k;
        }
    }

    fn segment_topics(&self, g: usize, range: Range<usize>) -> Vec<TopicId> {
        let z = &self.states[g].z1[range];
        let mut out: Vec<TopicId> = Vec::new();
        for (i, &k) in z.iter().enumerate() {
            if i == 0 || z[i - 1] != k {
                out.push(k);
            }
        }
        out
    }

    fn add_segment(&mut self, g: usize, s: usize) {
        let range = self.token_range(g, s);
        let t = self.transcript(g);
        for i in range.clone() {
            self.tables.add_token(self.states[g].z1[i], t.tokens()[i]);
        }
        for k in self.segment_topics(g, range) {
            self.tables.add_use(s, k);
        }
    }

    fn remove_segment(&mut self, g: usize, s: usize) -> Result<(), InferError> {
        let range = self.token_range(g, s);
        let t = self.transcript(g);
        for i in range.clone() {
            self.tables
                .remove_token(self.states[g].z1[i], t.tokens()[i])?;
        }
        for k in self.segment_topics(g, range) {
            self.tables.remove_use(s, k)?;
        }
        Ok(())
    }

    /// Metropolis-Hastings block move on the story assignment of segment `s`
    /// of transcript `g`. Returns whether the proposal was accepted.
    pub fn block_resample_segment(&mut self, g: usize, s: usize) -> Result<bool, InferError> {
        self.block_move(g, s, false)
    }

    fn block_move(&mut self, g: usize, s: usize, force: bool) -> Result<bool, InferError> {
        self.check_index(g, s)?;
        self.remove_segment(g, s)?;
        let range = self.token_range(g, s);
        let t = self.transcript(g);
        let y = &t.tokens()[range.clone()];
        let forced = &self.forced[g][range.clone()];
        let e = self.new_emission(y);
        let proposal = {
            let model = build_model(
                &self.tables,
                &self.topics,
                &self.params,
                s,
                self.masked,
                self.relaxed,
            );
            if !model.feasible() {
                self.add_segment(g, s);
                return Err(InferError::Exhausted(alloc::format!(
                    "transcript {:?}, category {s}: no story available",
                    t.id
                )));
            }
            let rng = &mut self.rngs[g];
            let (f, _) = model.forward(y, &e, forced);
            let xs = model.sample_backward(rng, &f, forced, y.len());
            let prop = model.label(rng, &xs, forced);
            let cur = labels_from_ids(&model, &self.states[g].z1[range.clone()]);
            let r = log_ratio(
                model.target_log_prob(&prop, y, forced),
                model.approx_log_prob(&prop, y, &e, forced),
                model.target_log_prob(&cur, y, forced),
                model.approx_log_prob(&cur, y, &e, forced),
            );
            if force || accept(rng, r) {
                Some(prop)
            } else {
                None
            }
        };
        let accepted = proposal.is_some();
        if let Some(labels) = proposal {
            let mut taken = Vec::new();
            self.write_labels(g, range, &labels, s, &mut taken);
        }
        self.add_segment(g, s);
        Ok(accepted)
    }

    /// Metropolis-Hastings move on changepoint `s` (between categories `s`
    /// and `s + 1`) jointly with the story assignments of both segments.
    /// Returns whether the proposal was accepted.
    pub fn resample_changepoint(&mut self, g: usize, s: usize) -> Result<bool, InferError> {
        if s + 1 >= self.params.k {
            return Err(InferError::Shape(alloc::format!(
                "changepoint {s} does not exist for k = {}",
                self.params.k
            )));
        }
        self.check_index(g, s)?;
        let t = self.transcript(g);
        let ns = t.num_sentences();
        let a = self.states[g].segment_sentences(s, ns).start;
        let b = self.states[g].segment_sentences(s + 1, ns).end;
        let cur_c = self.states[g].changepoints[s];
        self.remove_segment(g, s)?;
        self.remove_segment(g, s + 1)?;
        let ta = t.sentence_start(a);
        let tb = t.sentence_start(b);
        let y = &t.tokens()[ta..tb];
        let forced = &self.forced[g][ta..tb];
        let e = self.new_emission(y);
        let mut sizes: Vec<f64> = (0..self.params.k)
            .map(|q| self.states[g].segment_sentences(q, ns).len() as f64)
            .collect();
        let outcome = {
            let left = build_model(
                &self.tables,
                &self.topics,
                &self.params,
                s,
                self.masked,
                self.relaxed,
            );
            let right = build_model(
                &self.tables,
                &self.topics,
                &self.params,
                s + 1,
                self.masked,
                self.relaxed,
            );
            if !left.feasible() || !right.feasible() {
                None
            } else {
                let (f, cum) = left.forward(y, &e, forced);
                let (bk, scale) = right.backward(y, &e, forced);
                let candidates: Vec<usize> = (a + 1..b).collect();
                let log_r: Vec<f64> = candidates
                    .iter()
                    .map(|&c| {
                        sizes[s] = (c - a) as f64;
                        sizes[s + 1] = (b - c) as f64;
                        let fr: Vec<f64> = sizes.iter().map(|&n| n / ns as f64).collect();
                        let tc = t.sentence_start(c) - ta;
                        math::dirichlet_log_density(&fr, &self.gamma)
                            + cum[tc - 1]
                            + right.start_evidence(y, &e, &bk, &scale, tc)
                    })
                    .collect();
                let window = |center: usize| -> Vec<f64> {
                    candidates
                        .iter()
                        .zip(&log_r)
                        .map(|(&c, &lr)| match self.params.candidate_window {
                            Some(w) if c.abs_diff(center) > w => f64::NEG_INFINITY,
                            _ => lr,
                        })
                        .collect()
                };
                let rng = &mut self.rngs[g];
                let here = window(cur_c);
                let pick =
                    math::sample_log_weighted(rng, &here).expect("candidate set is nonempty");
                let new_c = candidates[pick];
                let tc = t.sentence_start(new_c) - ta;
                let xl = left.sample_backward(rng, &f, forced, tc);
                let ll = left.label(rng, &xl, &forced[..tc]);
                let xr = right.sample_forward(rng, y, &e, &bk, forced, tc);
                let lr = right.label(rng, &xr, &forced[tc..]);
                let score = |l_labels: &[Label], r_labels: &[Label], cut: usize| -> (f64, f64) {
                    if shares_old(l_labels, r_labels) {
                        return (f64::NEG_INFINITY, 0.0);
                    }
                    let target = left.target_log_prob(l_labels, &y[..cut], &forced[..cut])
                        + right.target_log_prob(r_labels, &y[cut..], &forced[cut..]);
                    let approx =
                        left.approx_log_prob(l_labels, &y[..cut], &e[..cut], &forced[..cut])
                            + right.approx_log_prob(r_labels, &y[cut..], &e[cut..], &forced[cut..]);
                    (target, approx)
                };
                let (tp, ap) = score(&ll, &lr, tc);
                let cur_cut = t.sentence_start(cur_c) - ta;
                let z = &self.states[g].z1[ta..tb];
                let cl = labels_from_ids(&left, &z[..cur_cut]);
                let cr = labels_from_ids(&right, &z[cur_cut..]);
                let (tcur, acur) = score(&cl, &cr, cur_cut);
                let mut r = log_ratio(tp, ap, tcur, acur);
                if self.params.candidate_window.is_some() && r.is_finite() {
                    r += math::log_sum_exp(&here) - math::log_sum_exp(&window(new_c));
                }
                Some(if accept(rng, r) {
                    Some((new_c, ll, lr))
                } else {
                    None
                })
            }
        };
        let Some(result) = outcome else {
            self.add_segment(g, s);
            self.add_segment(g, s + 1);
            return Err(InferError::Exhausted(alloc::format!(
                "transcript {:?}: no story available near changepoint {s}",
                t.id
            )));
        };
        let accepted = result.is_some();
        if let Some((new_c, ll, lr)) = result {
            self.states[g].changepoints[s] = new_c;
            let mut taken = Vec::new();
            let tc = t.sentence_start(new_c);
            self.write_labels(g, ta..tc, &ll, s, &mut taken);
            self.write_labels(g, tc..tb, &lr, s + 1, &mut taken);
        }
        self.add_segment(g, s);
        self.add_segment(g, s + 1);
        Ok(accepted)
    }

    fn new_emission(&self, y: &[u32]) -> Vec<f64> {
        segment::new_story_emission(
            y,
            self.corpus.vocab_size,
            self.params.beta,
            self.params.proposal_window,
        )
    }

    fn check_index(&self, g: usize, s: usize) -> Result<(), InferError> {
        if g >= self.states.len() || s >= self.params.k {
            return Err(InferError::Shape(alloc::format!("no segment ({g}, {s})")));
        }
        Ok(())
    }

    /// One pass over every transcript: each changepoint move followed by the
    /// block move of the segment to its left, then the last segment.
    pub fn sweep(&mut self) -> Result<(), InferError> {
        for g in 0..self.states.len() {
            for s in 0..self.params.k {
                if s + 1 < self.params.k {
                    self.resample_changepoint(g, s)?;
                }
                self.block_resample_segment(g, s)?;
            }
        }
        Ok(())
    }

    /// Replace every topic that holds tokens with its posterior mean.
    pub fn update_phi(&mut self) {
        let v = self.corpus.vocab_size;
        let vb = v as f64 * self.params.beta;
        for k in 0..self.topics.len() {
            let id = k as TopicId;
            let n = self.tables.topic_tokens(id);
            if n == 0 {
                continue;
            }
            let row = &mut self.topics.phi[k];
            for (y, p) in row.iter_mut().enumerate() {
                *p = (self.tables.topic_word(id, y as u32) as f64 + self.params.beta)
                    / (n as f64 + vb);
            }
            self.topics.valid[k] = true;
        }
    }

    pub fn state(&self) -> LatentState {
        let transcripts = self
            .states
            .iter()
            .zip(&self.corpus.transcripts)
            .map(|(a, t)| {
                TranscriptState::from_changepoints(
                    a.z1.clone(),
                    a.changepoints.clone(),
                    t.num_sentences(),
                )
            })
            .collect();
        LatentState {
            transcripts,
            seed: self.params.seed,
        }
    }

    pub fn changepoints(&self) -> Vec<Vec<usize>> {
        self.states.iter().map(|a| a.changepoints.clone()).collect()
    }

    /// Current topic rows, labeled with the category that uses them.
    pub fn topics(&self) -> TopicMatrix {
        let mut m = TopicMatrix::empty(self.corpus.vocab_size, self.params.k);
        for k in 0..self.topics.len() {
            let id = k as TopicId;
            let category = self.topics.category[k]
                .or_else(|| (0..self.params.k).find(|&s| self.tables.use_count(s, id) > 0));
            let usage = self.topics.prior_use[k] as u64 + self.tables.total_use(id) as u64;
            m.push(self.topics.phi[k].clone(), category, usage);
            m.active[k] = self.topics.valid[k];
        }
        m
    }

    pub fn tables(&self) -> &CountTables {
        &self.tables
    }

    pub fn joint_log_likelihood(&self) -> f64 {
        joint_log_likelihood(self.corpus, &self.state(), &self.topics(), &self.params)
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Check the latent state invariants, count conservation and that every
    /// topic is used by a single category.
    /// While relaxed only count conservation is checked.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.tables.total_tokens() != self.corpus.num_tokens() as u64 {
            return Err("token counts do not add up to the corpus size".into());
        }
        if self.relaxed {
            return Ok(());
        }
        validate_state(&self.state(), self.corpus, self.params.k)
            .map_err(|v| alloc::format!("{}", v[0]))?;
        for k in 0..self.topics.len() {
            let id = k as TopicId;
            let users: Vec<usize> = (0..self.params.k)
                .filter(|&s| self.tables.use_count(s, id) > 0)
                .collect();
            if users.len() > 1 {
                return Err(alloc::format!("topic {k} is used by categories {users:?}"));
            }
            if let (Some(c), Some(&u)) = (self.topics.category[k], users.first()) {
                if c != u {
                    return Err(alloc::format!(
                        "topic {k} of category {c} is used by category {u}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Draw labels left to right from the segment prior times the emission.
fn sequential_labels<R: Rng + ?Sized>(
    model: &SegmentModel<'_>,
    rng: &mut R,
    y: &[u32],
    forced: &[bool],
) -> Vec<Label> {
    let c = model.num_existing();
    let mut used = vec![false; c];
    let mut remaining = model.total;
    let mut unused = c;
    let mut labels: Vec<Label> = Vec::with_capacity(y.len());
    let mut bags: Vec<alloc::collections::BTreeMap<u32, u32>> = Vec::new();
    let mut sizes: Vec<u32> = Vec::new();
    let vb = model.vocab as f64 * model.beta;
    let mut weights = Vec::with_capacity(c + 2);
    for (t, &yt) in y.iter().enumerate() {
        let options = if unused > 0 || model.alpha_new > 0.0 {
            remaining.max(0.0) + model.alpha_new
        } else {
            0.0
        };
        let rho = if t == 0 || forced[t] { 0.0 } else { model.rho };
        weights.clear();
        let stay = if t == 0 {
            0.0
        } else {
            let e = match labels[t - 1] {
                Label::Old(k) => model.rows[model.index_of(k).unwrap()][yt as usize],
                Label::New(j) => {
                    (*bags[j as usize].get(&yt).unwrap_or(&0) as f64 + model.beta)
                        / (sizes[j as usize] as f64 + vb)
                }
            };
            (if options > 0.0 { rho } else { 1.0 }) * e
        };
        weights.push(stay);
        for x in 0..c {
            let w = if used[x] || options <= 0.0 {
                0.0
            } else {
                (1.0 - rho) * model.w[x] / options * model.rows[x][yt as usize]
            };
            weights.push(w);
        }
        let new_w = if options > 0.0 {
            (1.0 - rho) * model.alpha_new / options / model.vocab as f64
        } else {
            0.0
        };
        weights.push(new_w);
        let pick = math::sample_weighted(rng, &weights).unwrap_or(0);
        let l = if pick == 0 {
            labels[t - 1]
        } else if pick <= c {
            let x = pick - 1;
            used[x] = true;
            unused -= 1;
            remaining = if unused == 0 {
                0.0
            } else {
                remaining - model.w[x]
            };
            Label::Old(model.ids[x])
        } else {
            bags.push(Default::default());
            sizes.push(0);
            Label::New((bags.len() - 1) as u32)
        };
        if let Label::New(j) = l {
            *bags[j as usize].entry(yt).or_insert(0) += 1;
            sizes[j as usize] += 1;
        }
        labels.push(l);
    }
    labels
}

/// Draw an initial latent state: Dirichlet segment sizes and a left-to-right
/// story walk against the given topics.
pub fn initialize(
    corpus: &GroupedCorpus,
    init: Option<&TopicMatrix>,
    params: &InferenceParams,
) -> Result<LatentState, InferError> {
    Ok(Sampler::new(corpus, init, params)?.state())
}

/// Run the sampler for up to `params.iterations` sweeps.
pub fn run(
    corpus: &GroupedCorpus,
    init: Option<&TopicMatrix>,
    params: &InferenceParams,
) -> Result<InferenceResult, InferError> {
    let mut sampler = Sampler::new(corpus, init, params)?;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut counts: Vec<Vec<Vec<u32>>> = corpus
        .transcripts
        .iter()
        .map(|t| vec![vec![0; t.num_sentences()]; params.k - 1])
        .collect();
    let mut kept = 0;
    let mut converged = false;
    sampler.relaxed = params.relax_burn_in && params.burn_in >= 2;
    for it in 0..params.iterations {
        if it == params.burn_in / 2 {
            sampler.set_relaxed(false)?;
        }
        sampler.sweep()?;
        if params.update_phi {
            sampler.update_phi();
        }
        if cfg!(debug_assertions) {
            sampler.check_invariants().map_err(InferError::Shape)?;
        }
        let changepoints = sampler.changepoints();
        if it >= params.burn_in {
            for (g, cps) in changepoints.iter().enumerate() {
                for (s, &c) in cps.iter().enumerate() {
                    counts[g][s][c] += 1;
                }
            }
            kept += 1;
        }
        let joint_ll = sampler.joint_log_likelihood();
        trace.push(TraceEntry {
            iter: it,
            joint_ll,
            changepoints,
        });
        if let Some(eps) = params.epsilon {
            if it >= params.burn_in && trace.len() > CONVERGENCE_WINDOW {
                let old = trace[trace.len() - 1 - CONVERGENCE_WINDOW].joint_ll;
                if (joint_ll - old).abs() < eps * old.abs() {
                    converged = true;
                    break;
                }
            }
        }
    }
    Ok(InferenceResult {
        state: sampler.state(),
        topics: sampler.topics(),
        trace,
        changepoint_counts: counts,
        kept,
        converged,
    })
}

/// Log prior mass and emission log-likelihood of the tokens of sentences
/// `sentences` in transcript `g`. Stories continue with probability `rho`
/// and otherwise start a topic of the segment's category that the transcript
/// has not used yet, weighted by the topic's usage, or a new topic (usage
/// zero) weighted by `alpha`.
pub fn segment_log_likelihood(
    corpus: &GroupedCorpus,
    state: &LatentState,
    phi: &TopicMatrix,
    params: &InferenceParams,
    g: usize,
    sentences: Range<usize>,
) -> Result<f64, InferError> {
    let t = corpus
        .transcripts
        .get(g)
        .ok_or_else(|| InferError::Shape(alloc::format!("no transcript {g}")))?;
    let ts = state
        .transcripts
        .get(g)
        .ok_or_else(|| InferError::Shape(alloc::format!("state has no transcript {g}")))?;
    if sentences.start > sentences.end || sentences.end > t.num_sentences() {
        return Err(InferError::Shape(alloc::format!(
            "sentences {sentences:?} outside transcript {g}"
        )));
    }
    if ts.z1.len() != t.num_tokens() || ts.z2.len() != t.num_sentences() {
        return Err(InferError::Shape(alloc::format!(
            "transcript {g}: state length does not match corpus"
        )));
    }
    if phi.vocab_size != corpus.vocab_size {
        return Err(InferError::Shape(
            "topic vocabulary does not match corpus".into(),
        ));
    }
    Ok(extent_log_prob(
        t,
        ts,
        phi,
        params,
        t.token_range(sentences),
    ))
}

fn extent_log_prob(
    t: &Transcript,
    ts: &TranscriptState,
    phi: &TopicMatrix,
    params: &InferenceParams,
    range: Range<usize>,
) -> f64 {
    let usage = |k: TopicId| phi.usage.get(k as usize).copied().unwrap_or(0) as f64;
    let available = |k: TopicId, s: usize| match phi.category.get(k as usize).copied().flatten() {
        Some(c) => c == s,
        None => true,
    };
    let alpha_new = params.alpha_new();
    let inv_v = 1.0 / phi.vocab_size as f64;
    let z = &ts.z1;
    let mut blocked: BTreeSet<TopicId> = z[..range.start].iter().copied().collect();
    let mut lp = 0.0;
    let mut current: Option<usize> = None;
    let mut remaining = 0.0;
    let mut unused = 0usize;
    for i in range {
        let s = ts.z2[t.sentence_of(i)];
        if current != Some(s) {
            current = Some(s);
            remaining = 0.0;
            unused = 0;
            for k in 0..phi.num_topics() as TopicId {
                if usage(k) > 0.0 && available(k, s) && !blocked.contains(&k) {
                    remaining += usage(k);
                    unused += 1;
                }
            }
        }
        let same_segment_prev = i > 0 && ts.z2[t.sentence_of(i - 1)] == s;
        let forced = t.prev(i, params.prev_scope).is_none() || !same_segment_prev;
        let rho = if forced { 0.0 } else { params.rho };
        let options = if unused > 0 || alpha_new > 0.0 {
            remaining.max(0.0) + alpha_new
        } else {
            0.0
        };
        let k = z[i];
        let prior = if same_segment_prev && z[i - 1] == k {
            if options > 0.0 {
                rho
            } else {
                1.0
            }
        } else if options <= 0.0 || blocked.contains(&k) {
            0.0
        } else if usage(k) > 0.0 {
            if !available(k, s) {
                0.0
            } else {
                unused -= 1;
                let p = (1.0 - rho) * usage(k) / options;
                remaining = if unused == 0 {
                    0.0
                } else {
                    remaining - usage(k)
                };
                p
            }
        } else {
            (1.0 - rho) * alpha_new / options
        };
        blocked.insert(k);
        let e = match phi.rows.get(k as usize) {
            Some(row) if phi.active[k as usize] => row[t.tokens()[i] as usize],
            _ => inv_v,
        };
        lp += math::ln_prob(prior) + math::ln_prob(e);
    }
    lp
}

/// Joint log-likelihood of a state up to a constant: Dirichlet log density
/// of the segment fractions plus, per transcript, the story prior and the
/// emissions. Additive over transcripts.
pub fn joint_log_likelihood(
    corpus: &GroupedCorpus,
    state: &LatentState,
    phi: &TopicMatrix,
    params: &InferenceParams,
) -> Result<f64, InferError> {
    if state.transcripts.len() != corpus.transcripts.len() {
        return Err(InferError::Shape(
            "state and corpus transcript counts differ".into(),
        ));
    }
    let gamma = params.gamma.expand(params.k);
    let mut total = 0.0;
    for (g, (t, ts)) in corpus
        .transcripts
        .iter()
        .zip(&state.transcripts)
        .enumerate()
    {
        if ts.sizes.len() != gamma.len() {
            return Err(InferError::Shape(alloc::format!(
                "transcript {g} has {} segments, expected {}",
                ts.sizes.len(),
                gamma.len()
            )));
        }
        let n = t.num_sentences() as f64;
        let fractions: Vec<f64> = ts.sizes.iter().map(|&x| x as f64 / n).collect();
        total += math::dirichlet_log_density(&fractions, &gamma);
        total += segment_log_likelihood(corpus, state, phi, params, g, 0..t.num_sentences())?;
    }
    Ok(total)
}

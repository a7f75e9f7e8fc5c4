//! Collapsed Dirichlet-multinomial topic machinery.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::corpus::{GroupedCorpus, TopicId};
use crate::math;
use crate::rng::{stream_rng, streams};

#[derive(Clone, Debug, PartialEq)]
pub enum TopicError {
    Range(String),
    NegativeCount { topic: TopicId, what: &'static str },
    Config(String),
}

impl fmt::Display for TopicError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopicError::Range(m) => write!(f, "range error: {m}"),
            TopicError::NegativeCount { topic, what } => {
                write!(f, "decrement of absent {what} count for topic {topic}")
            }
            TopicError::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl core::error::Error for TopicError {}

/// Sufficient statistics of a topic assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTables {
    vocab_size: usize,
    categories: usize,
    topic_word: Vec<Vec<u32>>,
    topic_tokens: Vec<u64>,
    /// `[s][k]`: innovation entries of topic `k` under category `s`.
    category_topic_use: Vec<Vec<u32>>,
}

impl CountTables {
    pub fn new(vocab_size: usize, categories: usize) -> Self {
        CountTables {
            vocab_size,
            categories,
            topic_word: Vec::new(),
            topic_tokens: Vec::new(),
            category_topic_use: vec![Vec::new(); categories],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn num_topics(&self) -> usize {
        self.topic_word.len()
    }

    pub fn ensure_topic(&mut self, k: TopicId) {
        let k = k as usize;
        if k >= self.topic_word.len() {
            self.topic_word.resize(k + 1, vec![0; self.vocab_size]);
            self.topic_tokens.resize(k + 1, 0);
            for row in &mut self.category_topic_use {
                row.resize(k + 1, 0);
            }
        }
    }

    pub fn add_token(&mut self, k: TopicId, v: u32) {
        self.ensure_topic(k);
        self.topic_word[k as usize][v as usize] += 1;
        self.topic_tokens[k as usize] += 1;
    }

    pub fn remove_token(&mut self, k: TopicId, v: u32) -> Result<(), TopicError> {
        let cell = self
            .topic_word
            .get_mut(k as usize)
            .and_then(|r| r.get_mut(v as usize))
            .filter(|c| **c > 0)
            .ok_or(TopicError::NegativeCount {
                topic: k,
                what: "topic-word",
            })?;
        *cell -= 1;
        self.topic_tokens[k as usize] -= 1;
        Ok(())
    }

    pub fn add_use(&mut self, s: usize, k: TopicId) {
        self.ensure_topic(k);
        self.category_topic_use[s][k as usize] += 1;
    }

    pub fn remove_use(&mut self, s: usize, k: TopicId) -> Result<(), TopicError> {
        let cell = self
            .category_topic_use
            .get_mut(s)
            .and_then(|r| r.get_mut(k as usize))
            .filter(|c| **c > 0)
            .ok_or(TopicError::NegativeCount {
                topic: k,
                what: "category-use",
            })?;
        *cell -= 1;
        Ok(())
    }

    pub fn topic_word(&self, k: TopicId, v: u32) -> u32 {
        self.topic_word.get(k as usize).map_or(0, |r| r[v as usize])
    }

    pub fn topic_word_row(&self, k: TopicId) -> Option<&[u32]> {
        self.topic_word.get(k as usize).map(|r| r.as_slice())
    }

    pub fn topic_tokens(&self, k: TopicId) -> u64 {
        self.topic_tokens.get(k as usize).copied().unwrap_or(0)
    }

    pub fn use_count(&self, s: usize, k: TopicId) -> u32 {
        self.category_topic_use
            .get(s)
            .and_then(|r| r.get(k as usize))
            .copied()
            .unwrap_or(0)
    }

    /// Innovation entries of `k` summed over categories other than `s`.
    pub fn use_outside(&self, s: usize, k: TopicId) -> u32 {
        (0..self.categories)
            .filter(|&c| c != s)
            .map(|c| self.use_count(c, k))
            .sum()
    }

    pub fn total_use(&self, k: TopicId) -> u32 {
        (0..self.categories).map(|c| self.use_count(c, k)).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.topic_tokens.iter().sum()
    }

    /// True when every count is zero.
    pub fn is_empty(&self) -> bool {
        self.topic_tokens.iter().all(|&n| n == 0)
            && self.topic_word.iter().all(|r| r.iter().all(|&c| c == 0))
            && self
                .category_topic_use
                .iter()
                .all(|r| r.iter().all(|&c| c == 0))
    }
}

/// `(n_kv + beta) / (n_k + V beta)`. Topics beyond the table are brand new and
/// get `1 / V`.
pub fn predictive_word_prob(
    tables: &CountTables,
    k: TopicId,
    v: u32,
    beta: f64,
) -> Result<f64, TopicError> {
    if !(beta > 0.0) {
        return Err(TopicError::Range(alloc::format!(
            "beta must be positive, got {beta}"
        )));
    }
    if v as usize >= tables.vocab_size {
        return Err(TopicError::Range(alloc::format!(
            "word {v} outside vocabulary of size {}",
            tables.vocab_size
        )));
    }
    let vb = tables.vocab_size as f64 * beta;
    Ok((tables.topic_word(k, v) as f64 + beta) / (tables.topic_tokens(k) as f64 + vb))
}

/// Point-estimated topic-word distributions with per-topic category labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicMatrix {
    pub vocab_size: usize,
    /// Number of categories the labels refer to; 0 when unlabeled.
    pub categories: usize,
    pub rows: Vec<Vec<f64>>,
    pub category: Vec<Option<usize>>,
    /// Number of innovation entries (story starts) observed per topic.
    pub usage: Vec<u64>,
    pub active: Vec<bool>,
}

impl TopicMatrix {
    pub fn empty(vocab_size: usize, categories: usize) -> Self {
        TopicMatrix {
            vocab_size,
            categories,
            rows: Vec::new(),
            category: Vec::new(),
            usage: Vec::new(),
            active: Vec::new(),
        }
    }

    pub fn num_topics(&self) -> usize {
        self.rows.len()
    }

    pub fn push(&mut self, row: Vec<f64>, category: Option<usize>, usage: u64) {
        self.rows.push(row);
        self.category.push(category);
        self.usage.push(usage);
        self.active.push(true);
    }

    /// Every active row is a probability vector (within 1e-9).
    pub fn validate(&self) -> Result<(), TopicError> {
        let n = self.rows.len();
        if self.category.len() != n || self.usage.len() != n || self.active.len() != n {
            return Err(TopicError::Config(
                "topic matrix columns have different lengths".into(),
            ));
        }
        for (k, row) in self.rows.iter().enumerate() {
            if row.len() != self.vocab_size {
                return Err(TopicError::Range(alloc::format!(
                    "topic {k} has {} entries, expected {}",
                    row.len(),
                    self.vocab_size
                )));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(TopicError::Range(alloc::format!(
                    "topic {k} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if self.active[k] && (s - 1.0).abs() > 1e-9 {
                return Err(TopicError::Range(alloc::format!("topic {k} sums to {s}")));
            }
            if let Some(c) = self.category[k] {
                if self.categories > 0 && c >= self.categories {
                    return Err(TopicError::Range(alloc::format!(
                        "topic {k} has category {c} >= {}",
                        self.categories
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Posterior-mean topics under a symmetric Dirichlet(beta) prior.
pub fn estimate_phi(tables: &CountTables, beta: f64) -> TopicMatrix {
    let v = tables.vocab_size;
    let vb = v as f64 * beta;
    let mut m = TopicMatrix::empty(v, tables.categories);
    for k in 0..tables.num_topics() {
        let denom = tables.topic_tokens[k] as f64 + vb;
        let row = tables.topic_word[k]
            .iter()
            .map(|&c| (c as f64 + beta) / denom)
            .collect();
        m.push(row, None, tables.total_use(k as TopicId) as u64);
    }
    m
}

/// Unnormalized CRP weights for one category.
#[derive(Clone, Debug, PartialEq)]
pub struct CrpWeights {
    /// Existing topics with positive weight, ascending id.
    pub topics: Vec<(TopicId, f64)>,
    pub new: f64,
}

impl CrpWeights {
    pub fn total(&self) -> f64 {
        self.topics.iter().map(|&(_, w)| w).sum::<f64>() + self.new
    }

    /// Normalized probabilities, existing topics first, new topic last.
    pub fn probabilities(&self) -> Vec<f64> {
        let z = self.total();
        self.topics
            .iter()
            .map(|&(_, w)| w / z)
            .chain(core::iter::once(self.new / z))
            .collect()
    }
}

/// CRP weights for drawing a story under category `s`: existing topics are
/// weighted by their innovation count, zeroed when blocked or owned by
/// another category; a new topic gets `alpha`.
pub fn crp_topic_weights(
    tables: &CountTables,
    s: usize,
    blocked: impl Fn(TopicId) -> bool,
    categories: &[Option<usize>],
    alpha: f64,
) -> CrpWeights {
    let mut topics = Vec::new();
    for k in 0..tables.num_topics() as TopicId {
        let n = tables.use_count(s, k);
        if n == 0 || blocked(k) {
            continue;
        }
        let allowed = match categories.get(k as usize).copied().flatten() {
            Some(c) => c == s,
            None => tables.use_outside(s, k) == 0,
        };
        if allowed {
            topics.push((k, n as f64));
        }
    }
    CrpWeights { topics, new: alpha }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitTopicsParams {
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for InitTopicsParams {
    fn default() -> Self {
        InitTopicsParams {
            alpha: 1.0,
            beta: 0.01,
            iters: 50,
            seed: 0,
        }
    }
}

struct Unit {
    bag: Vec<(usize, u32)>,
    len: u32,
}

#[derive(Clone)]
struct Cluster {
    counts: Vec<u32>,
    total: u32,
    members: u32,
}

/// Learn topics by clustering initial level-1 segments with a collapsed CRP
/// mixture. Each segment is one draw-unit assigned to a single topic.
///
/// `segments[g]` holds level-1 changepoints (token indices) for transcript `g`.
pub fn init_topics(
    corpus: &GroupedCorpus,
    segments: &[Vec<usize>],
    params: &InitTopicsParams,
) -> Result<TopicMatrix, TopicError> {
    if segments.len() != corpus.transcripts.len() {
        return Err(TopicError::Config(
            "one changepoint list per transcript is required".into(),
        ));
    }
    if !(params.alpha > 0.0 && params.beta > 0.0) {
        return Err(TopicError::Config("alpha and beta must be positive".into()));
    }
    let v = corpus.vocab_size;
    let mut units = Vec::new();
    for (t, cps) in corpus.transcripts.iter().zip(segments) {
        let mut bounds = Vec::with_capacity(cps.len() + 2);
        bounds.push(0);
        bounds.extend_from_slice(cps);
        bounds.push(t.num_tokens());
        for w in bounds.windows(2) {
            if w[1] <= w[0] || w[1] > t.num_tokens() {
                return Err(TopicError::Config(alloc::format!(
                    "empty or out-of-range segment in transcript {:?}",
                    t.id
                )));
            }
            let mut counts = alloc::collections::BTreeMap::new();
            for &y in &t.tokens()[w[0]..w[1]] {
                *counts.entry(y as usize).or_insert(0u32) += 1;
            }
            units.push(Unit {
                bag: counts.into_iter().collect(),
                len: (w[1] - w[0]) as u32,
            });
        }
    }
    if units.is_empty() {
        return Err(TopicError::Config("no segments".into()));
    }

    let mut clusters: Vec<Cluster> = Vec::with_capacity(units.len());
    let mut assign: Vec<usize> = Vec::with_capacity(units.len());
    for (u, unit) in units.iter().enumerate() {
        let mut c = Cluster {
            counts: vec![0; v],
            total: 0,
            members: 0,
        };
        add_unit(&mut c, unit);
        clusters.push(c);
        assign.push(u);
    }
    let mut free: Vec<usize> = Vec::new();
    let mut rng = stream_rng(params.seed, streams::INIT_TOPICS);
    let empty_ll: Vec<f64> = units
        .iter()
        .map(|u| math::dirmult_log_predictive(|_| 0.0, 0.0, &u.bag, v, params.beta))
        .collect();
    let mut logw: Vec<f64> = Vec::new();
    let mut live: Vec<usize> = Vec::new();
    for _ in 0..params.iters {
        for (u, unit) in units.iter().enumerate() {
            let c = assign[u];
            remove_unit(&mut clusters[c], unit);
            if clusters[c].members == 0 {
                free.push(c);
            }
            logw.clear();
            live.clear();
            for (ci, cl) in clusters.iter().enumerate() {
                if cl.members == 0 {
                    continue;
                }
                let ll = math::dirmult_log_predictive(
                    |w| cl.counts[w] as f64,
                    cl.total as f64,
                    &unit.bag,
                    v,
                    params.beta,
                );
                logw.push(math::ln(cl.members as f64) + ll);
                live.push(ci);
            }
            logw.push(math::ln(params.alpha) + empty_ll[u]);
            let pick = math::sample_log_weighted(&mut rng, &logw).expect("finite weights");
            let target = if pick < live.len() {
                live[pick]
            } else {
                // reuse the lowest free slot for determinism
                free.sort_unstable();
                if free.is_empty() {
                    clusters.push(Cluster {
                        counts: vec![0; v],
                        total: 0,
                        members: 0,
                    });
                    clusters.len() - 1
                } else {
                    free.remove(0)
                }
            };
            free.retain(|&f| f != target);
            add_unit(&mut clusters[target], unit);
            assign[u] = target;
        }
    }

    // compact in order of first use
    let mut relabel = vec![usize::MAX; clusters.len()];
    let mut m = TopicMatrix::empty(v, 0);
    let vb = v as f64 * params.beta;
    for &c in &assign {
        if relabel[c] == usize::MAX {
            relabel[c] = m.num_topics();
            let cl = &clusters[c];
            let denom = cl.total as f64 + vb;
            m.push(
                cl.counts
                    .iter()
                    .map(|&n| (n as f64 + params.beta) / denom)
                    .collect(),
                None,
                cl.members as u64,
            );
        }
    }
    Ok(m)
}

/// Cluster assignment of each initial segment, from a learned matrix, by
/// maximum likelihood. Used to measure purity against truth labels.
pub fn assign_segments(
    corpus: &GroupedCorpus,
    segments: &[Vec<usize>],
    topics: &TopicMatrix,
) -> Vec<usize> {
    let mut out = Vec::new();
    for (t, cps) in corpus.transcripts.iter().zip(segments) {
        let mut bounds = vec![0];
        bounds.extend_from_slice(cps);
        bounds.push(t.num_tokens());
        for w in bounds.windows(2) {
            let mut best = (f64::NEG_INFINITY, 0);
            for (k, row) in topics.rows.iter().enumerate() {
                let ll: f64 = t.tokens()[w[0]..w[1]]
                    .iter()
                    .map(|&y| math::ln_prob(row[y as usize]))
                    .sum();
                if ll > best.0 {
                    best = (ll, k);
                }
            }
            out.push(best.1);
        }
    }
    out
}

fn add_unit(c: &mut Cluster, u: &Unit) {
    for &(w, n) in &u.bag {
        c.counts[w] += n;
    }
    c.total += u.len;
    c.members += 1;
}

fn remove_unit(c: &mut Cluster, u: &Unit) {
    for &(w, n) in &u.bag {
        c.counts[w] -= n;
    }
    c.total -= u.len;
    c.members -= 1;
}

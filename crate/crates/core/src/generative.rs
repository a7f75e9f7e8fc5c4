//! Forward samplers: the generalized grouped-sequential process for the
//! supported recovery configurations, and the news-transcript model used to
//! build synthetic corpora with ground truth.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, RngCore};
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    changepoints_from_sizes, CorpusError, GoldSegmentation, GroupedCorpus, LatentState, PrevScope,
    TopicId, Transcript, TranscriptState,
};
use crate::math;
use crate::rng::{stream_rng, streams, SeededRng};
use crate::topics::TopicMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerativeMode {
    Dpmm,
    FiniteLda,
    StickyHmm,
    NewsTranscript,
    NdpMask,
}

impl GenerativeMode {
    pub fn levels(self) -> usize {
        match self {
            GenerativeMode::Dpmm | GenerativeMode::StickyHmm => 1,
            GenerativeMode::FiniteLda | GenerativeMode::NdpMask => 2,
            GenerativeMode::NewsTranscript => 3,
        }
    }
}

/// Dirichlet concentration for segment-size fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeConcentration {
    Symmetric(f64),
    Vector(Vec<f64>),
}

impl SizeConcentration {
    pub fn expand(&self, k: usize) -> Vec<f64> {
        match self {
            SizeConcentration::Symmetric(g) => vec![*g; k],
            SizeConcentration::Vector(v) => v.clone(),
        }
    }
}

/// Whether segment-size fractions measure sentence mass or token mass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizeAxis {
    #[default]
    Sentences,
    Tokens,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeConfig {
    pub mode: GenerativeMode,
    pub levels: usize,
    /// Concentration of the level-1 mixture distributions.
    pub alpha: f64,
    /// Symmetric Dirichlet smoothing of topics.
    pub beta: f64,
    pub gamma: SizeConcentration,
    /// Probability of continuing the previous token's topic.
    pub rho: f64,
    /// Number of categories (level-2 segments per transcript).
    pub k: usize,
    pub vocab_size: usize,
    pub transcripts: usize,
    /// Inclusive range of sentences per transcript.
    pub sentences: (usize, usize),
    /// Inclusive range of tokens per sentence.
    pub tokens_per_sentence: (usize, usize),
    pub seed: u64,
    /// Number of topics pre-allocated to categories before lazy stick extension.
    pub truncation: usize,
    /// Hard cap on topics per category; makes the supply finite.
    pub topic_cap: Option<usize>,
    pub size_axis: SizeAxis,
    pub prev_scope: PrevScope,
    /// Weight of the per-category base measure `H_c` in topic draws; 0 decouples topics.
    pub category_base_strength: f64,
    /// Concentration of the level-2 clustering (NDP mode).
    pub cluster_alpha: f64,
    /// Topic count of the finite model.
    pub lda_topics: usize,
}

impl GenerativeConfig {
    pub fn for_mode(mode: GenerativeMode) -> Self {
        let base = GenerativeConfig {
            mode,
            levels: mode.levels(),
            alpha: 1.0,
            beta: 0.01,
            gamma: SizeConcentration::Symmetric(5.0),
            rho: 0.993,
            k: 5,
            vocab_size: 1000,
            transcripts: 10,
            sentences: (300, 350),
            tokens_per_sentence: (13, 17),
            seed: 0,
            truncation: 200,
            topic_cap: None,
            size_axis: SizeAxis::Sentences,
            prev_scope: PrevScope::Transcript,
            category_base_strength: 0.0,
            cluster_alpha: 1.0,
            lda_topics: 10,
        };
        match mode {
            GenerativeMode::NewsTranscript => base,
            GenerativeMode::Dpmm | GenerativeMode::StickyHmm => GenerativeConfig {
                k: 1,
                transcripts: 1,
                sentences: (10, 10),
                tokens_per_sentence: (10, 10),
                vocab_size: 100,
                rho: if mode == GenerativeMode::StickyHmm {
                    0.9
                } else {
                    0.0
                },
                ..base
            },
            GenerativeMode::FiniteLda | GenerativeMode::NdpMask => GenerativeConfig {
                k: 1,
                transcripts: 20,
                sentences: (5, 5),
                tokens_per_sentence: (10, 10),
                vocab_size: 100,
                rho: 0.0,
                ..base
            },
        }
    }

    pub fn news() -> Self {
        Self::for_mode(GenerativeMode::NewsTranscript)
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let err = |m: String| Err(GenError::Config(m));
        if self.levels != self.mode.levels() {
            return err(alloc::format!(
                "mode {:?} has {} levels, config says {}",
                self.mode,
                self.mode.levels(),
                self.levels
            ));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return err("alpha and beta must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return err(alloc::format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.vocab_size == 0 || self.transcripts == 0 {
            return err("vocab_size and transcripts must be positive".into());
        }
        if self.sentences.0 == 0 || self.sentences.0 > self.sentences.1 {
            return err("sentence range must be nonempty and start at 1 or more".into());
        }
        if self.tokens_per_sentence.0 == 0
            || self.tokens_per_sentence.0 > self.tokens_per_sentence.1
        {
            return err("tokens-per-sentence range must be nonempty and start at 1 or more".into());
        }
        if self.category_base_strength < 0.0 {
            return err("category_base_strength must be nonnegative".into());
        }
        match self.mode {
            GenerativeMode::NewsTranscript => {
                if self.k == 0 {
                    return err("k must be at least 1".into());
                }
                let g = self.gamma.expand(self.k);
                if g.len() != self.k || g.iter().any(|&x| !(x > 0.0)) {
                    return err(alloc::format!("gamma needs {} positive entries", self.k));
                }
                if self.sentences.0 < self.k {
                    return Err(GenError::Infeasible(alloc::format!(
                        "transcripts may have {} sentences, fewer than k = {}",
                        self.sentences.0,
                        self.k
                    )));
                }
                if self.topic_cap == Some(0) {
                    return err("topic_cap must be positive".into());
                }
            }
            GenerativeMode::NdpMask => {
                if !(self.cluster_alpha > 0.0) {
                    return err("cluster_alpha must be positive".into());
                }
            }
            GenerativeMode::FiniteLda => {
                if self.lda_topics == 0 {
                    return err("lda_topics must be positive".into());
                }
            }
            GenerativeMode::Dpmm | GenerativeMode::StickyHmm => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GenError {
    Config(String),
    Infeasible(String),
    Corpus(CorpusError),
}

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenError::Config(m) => write!(f, "config error: {m}"),
            GenError::Infeasible(m) => write!(f, "infeasible: {m}"),
            GenError::Corpus(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for GenError {}

impl From<CorpusError> for GenError {
    fn from(e: CorpusError) -> Self {
        GenError::Corpus(e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub corpus: GroupedCorpus,
    pub truth: LatentState,
    pub topics: TopicMatrix,
    pub gold: GoldSegmentation,
    /// Largest unbroken stick mass left in any level-1 distribution.
    pub residual_mass: f64,
}

/// Split `total` items into `fractions.len()` positive parts closest in L1 to
/// `fractions * total` (largest-remainder rounding with a floor of one).
pub fn discretize_sizes(fractions: &[f64], total: usize) -> Result<Vec<usize>, GenError> {
    let k = fractions.len();
    if k == 0 {
        return Err(GenError::Config("no fractions".into()));
    }
    if total < k {
        return Err(GenError::Infeasible(alloc::format!(
            "cannot split {total} items into {k} nonempty parts"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|&f| !(f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(GenError::Config(
            "fractions must be a point of the simplex".into(),
        ));
    }
    let x: Vec<f64> = fractions.iter().map(|&f| f * total as f64).collect();
    let mut n: Vec<usize> = x
        .iter()
        .map(|&xi| (libm::floor(xi) as usize).max(1))
        .collect();
    let cost = |ni: usize, xi: f64| libm::fabs(ni as f64 - xi);
    let mut assigned: usize = n.iter().sum();
    while assigned < total {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for i in 0..k {
            let d = cost(n[i] + 1, x[i]) - cost(n[i], x[i]);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        n[best] += 1;
        assigned += 1;
    }
    while assigned > total {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for i in 0..k {
            if n[i] > 1 {
                let d = cost(n[i] - 1, x[i]) - cost(n[i], x[i]);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
        }
        n[best] -= 1;
        assigned -= 1;
    }
    Ok(n)
}

/// Segment sizes in sentences whose boundaries fall at the sentence starts
/// nearest to the cumulative token-mass targets.
pub fn sizes_from_token_mass(
    fractions: &[f64],
    sentence_starts: &[usize],
) -> Result<Vec<usize>, GenError> {
    let k = fractions.len();
    let num_sentences = sentence_starts.len() - 1;
    if num_sentences < k {
        return Err(GenError::Infeasible(alloc::format!(
            "cannot split {num_sentences} sentences into {k} segments"
        )));
    }
    let total = *sentence_starts.last().unwrap() as f64;
    let mut bounds = Vec::with_capacity(k - 1);
    let mut acc = 0.0;
    let mut lo = 1;
    for s in 0..k - 1 {
        acc += fractions[s];
        let target = acc * total;
        let hi = num_sentences - (k - 1 - s);
        let mut best = lo;
        for j in lo..=hi {
            if libm::fabs(sentence_starts[j] as f64 - target)
                < libm::fabs(sentence_starts[best] as f64 - target)
            {
                best = j;
            }
        }
        bounds.push(best);
        lo = best + 1;
    }
    Ok(crate::corpus::sizes_from_changepoints(
        &bounds,
        num_sentences,
    ))
}

/// A GEM(alpha) distribution over topic atoms, broken lazily. With a cap the
/// last stick absorbs the remainder and the support is finite.
struct LazyGem {
    alpha: f64,
    log_w: Vec<f64>,
    atoms: Vec<TopicId>,
    log_rest: f64,
}

impl LazyGem {
    fn new(alpha: f64) -> Self {
        LazyGem {
            alpha,
            log_w: Vec::new(),
            atoms: Vec::new(),
            log_rest: 0.0,
        }
    }

    fn break_stick<R: Rng + ?Sized>(&mut self, rng: &mut R, atom: TopicId) -> f64 {
        let (ln_v, ln_rest) = math::sample_stick_log(rng, self.alpha);
        self.log_w.push(self.log_rest + ln_v);
        self.atoms.push(atom);
        self.log_rest += ln_rest;
        ln_v
    }

    /// Give the remainder to the last stick.
    fn close(&mut self) {
        if let Some(last) = self.log_w.last_mut() {
            *last = math::log_add_exp(*last, self.log_rest);
            self.log_rest = f64::NEG_INFINITY;
        }
    }

    /// Draw from the distribution restricted to unblocked atoms. New sticks
    /// get atoms from `fresh`. Blocked atoms found in the remainder trigger a
    /// restart, which samples exactly from the restriction.
    fn draw<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        blocked: &dyn Fn(TopicId) -> bool,
        fresh: &mut dyn FnMut(&mut R) -> TopicId,
    ) -> Option<TopicId> {
        for _ in 0..100_000 {
            let mut logw: Vec<f64> = Vec::with_capacity(self.atoms.len() + 1);
            let mut idx = Vec::with_capacity(self.atoms.len());
            for (i, (&a, &lw)) in self.atoms.iter().zip(&self.log_w).enumerate() {
                if !blocked(a) {
                    logw.push(lw);
                    idx.push(i);
                }
            }
            logw.push(self.log_rest);
            let pick = math::sample_log_weighted(rng, &logw)?;
            if pick < idx.len() {
                return Some(self.atoms[idx[pick]]);
            }
            loop {
                let atom = fresh(rng);
                let ln_v = self.break_stick(rng, atom);
                if math::ln(math::open01(rng)) < ln_v {
                    if blocked(atom) {
                        break;
                    }
                    return Some(atom);
                }
            }
        }
        None
    }

    fn residual(&self) -> f64 {
        math::exp(self.log_rest)
    }
}

/// Sequential CRP seating, shared by the DP mixture sampler and its
/// probability evaluation.
#[derive(Clone, Debug, Default)]
pub struct CrpSeating {
    counts: Vec<u64>,
    customers: u64,
}

impl CrpSeating {
    /// Probability that the next customer sits at `table` (`table == tables()` opens a new one).
    pub fn prob(&self, table: usize, alpha: f64) -> f64 {
        let denom = self.customers as f64 + alpha;
        if table < self.counts.len() {
            self.counts[table] as f64 / denom
        } else if table == self.counts.len() {
            alpha / denom
        } else {
            0.0
        }
    }

    pub fn tables(&self) -> usize {
        self.counts.len()
    }

    pub fn seat(&mut self, table: usize) {
        if table == self.counts.len() {
            self.counts.push(0);
        }
        self.counts[table] += 1;
        self.customers += 1;
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, alpha: f64) -> usize {
        let w: Vec<f64> = self
            .counts
            .iter()
            .map(|&c| c as f64)
            .chain(core::iter::once(alpha))
            .collect();
        math::sample_weighted(rng, &w).expect("positive alpha")
    }
}

/// Log probability that sequential CRP seating produces the labels `z`
/// (tables numbered in order of first appearance).
pub fn crp_seating_log_prob(z: &[TopicId], alpha: f64) -> f64 {
    let mut crp = CrpSeating::default();
    let mut lp = 0.0;
    for &t in z {
        lp += math::ln_prob(crp.prob(t as usize, alpha));
        if t as usize > crp.tables() {
            return f64::NEG_INFINITY;
        }
        crp.seat(t as usize);
    }
    lp
}

struct TopicBank {
    vocab_size: usize,
    beta: f64,
    rows: Vec<Vec<f64>>,
    samplers: Vec<WeightedIndex<f64>>,
    category: Vec<Option<usize>>,
    usage: Vec<u64>,
    base: Vec<Vec<f64>>,
    base_strength: f64,
}

impl TopicBank {
    fn new(vocab_size: usize, beta: f64) -> Self {
        TopicBank {
            vocab_size,
            beta,
            rows: Vec::new(),
            samplers: Vec::new(),
            category: Vec::new(),
            usage: Vec::new(),
            base: Vec::new(),
            base_strength: 0.0,
        }
    }

    fn create<R: Rng + ?Sized>(&mut self, rng: &mut R, category: Option<usize>) -> TopicId {
        let alphas: Vec<f64> = match category {
            Some(c) if self.base_strength > 0.0 => self.base[c]
                .iter()
                .map(|&h| self.beta + self.base_strength * h)
                .collect(),
            _ => vec![self.beta; self.vocab_size],
        };
        let row = math::sample_dirichlet(rng, &alphas);
        self.samplers
            .push(WeightedIndex::new(&row).expect("valid topic row"));
        self.rows.push(row);
        self.category.push(category);
        self.usage.push(0);
        (self.rows.len() - 1) as TopicId
    }

    fn emit<R: Rng + ?Sized>(&self, rng: &mut R, k: TopicId) -> u32 {
        self.samplers[k as usize].sample(rng) as u32
    }

    fn into_matrix(self, categories: usize) -> TopicMatrix {
        let mut m = TopicMatrix::empty(self.vocab_size, categories);
        for ((row, c), u) in self.rows.into_iter().zip(self.category).zip(self.usage) {
            m.push(row, c, u);
        }
        m
    }
}

struct Shape {
    sentence_lengths: Vec<usize>,
}

fn draw_shape<R: Rng + ?Sized>(rng: &mut R, cfg: &GenerativeConfig) -> Shape {
    let s = rng.random_range(cfg.sentences.0..=cfg.sentences.1);
    let sentence_lengths = (0..s)
        .map(|_| rng.random_range(cfg.tokens_per_sentence.0..=cfg.tokens_per_sentence.1))
        .collect();
    Shape { sentence_lengths }
}

fn sentences_from(tokens: &[u32], lengths: &[usize]) -> Vec<Vec<u32>> {
    let mut out = Vec::with_capacity(lengths.len());
    let mut at = 0;
    for &l in lengths {
        out.push(tokens[at..at + l].to_vec());
        at += l;
    }
    out
}

fn transcript_id(g: usize) -> String {
    alloc::format!("t{g:04}")
}

/// Topic-pool ownership: `c(k)` uniform over categories, redrawn until every
/// category owns at least `need` topics.
fn draw_ownership<R: Rng + ?Sized>(
    rng: &mut R,
    pool: usize,
    k: usize,
    need: usize,
) -> Result<Vec<usize>, GenError> {
    if need * k > pool {
        return Err(GenError::Config(alloc::format!(
            "truncation {pool} cannot give each of {k} categories {need} topics"
        )));
    }
    for _ in 0..1000 {
        let owners: Vec<usize> = (0..pool).map(|_| rng.random_range(0..k)).collect();
        let mut counts = vec![0usize; k];
        for &o in &owners {
            counts[o] += 1;
        }
        if counts.iter().all(|&c| c >= need) {
            return Ok(owners);
        }
    }
    Err(GenError::Config(
        "could not draw a topic ownership that feeds every category".into(),
    ))
}

/// Draw a synthetic news corpus: categories in fixed order per transcript,
/// Dirichlet segment sizes, sticky stories that never repeat inside a
/// transcript, and category-specific topics.
pub fn sample_news(cfg: &GenerativeConfig) -> Result<SyntheticCorpus, GenError> {
    if cfg.mode != GenerativeMode::NewsTranscript {
        return Err(GenError::Config(alloc::format!(
            "sample_news needs news mode, got {:?}",
            cfg.mode
        )));
    }
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, streams::GENERATE);
    let k = cfg.k;
    let v = cfg.vocab_size;
    let gamma = cfg.gamma.expand(k);

    let mut bank = TopicBank::new(v, cfg.beta);
    if cfg.category_base_strength > 0.0 {
        bank.base = (0..k)
            .map(|_| math::sample_dirichlet(&mut rng, &vec![cfg.beta; v]))
            .collect();
        bank.base_strength = cfg.category_base_strength;
    }

    let mut thetas: Vec<LazyGem> = (0..k).map(|_| LazyGem::new(cfg.alpha)).collect();
    match cfg.topic_cap {
        Some(cap) => {
            for (s, theta) in thetas.iter_mut().enumerate() {
                for _ in 0..cap {
                    let t = bank.create(&mut rng, Some(s));
                    theta.break_stick(&mut rng, t);
                }
                theta.close();
            }
        }
        None => {
            let mean_tokens = (cfg.sentences.0 + cfg.sentences.1) as f64 / 2.0
                * (cfg.tokens_per_sentence.0 + cfg.tokens_per_sentence.1) as f64
                / 2.0;
            let stories = 1.0 + mean_tokens / k as f64 * (1.0 - cfg.rho);
            let need = (libm::ceil(stories / 2.0) as usize).max(1);
            let owners = draw_ownership(&mut rng, cfg.truncation.max(k), k, need)?;
            for &o in &owners {
                let t = bank.create(&mut rng, Some(o));
                thetas[o].break_stick(&mut rng, t);
            }
        }
    }

    let mut transcripts = Vec::with_capacity(cfg.transcripts);
    let mut states = Vec::with_capacity(cfg.transcripts);
    for g in 0..cfg.transcripts {
        let shape = draw_shape(&mut rng, cfg);
        let num_sentences = shape.sentence_lengths.len();
        let fractions = math::sample_dirichlet(&mut rng, &gamma);
        let sizes = match cfg.size_axis {
            SizeAxis::Sentences => discretize_sizes(&fractions, num_sentences)?,
            SizeAxis::Tokens => {
                let mut starts = vec![0];
                for &l in &shape.sentence_lengths {
                    starts.push(starts.last().unwrap() + l);
                }
                sizes_from_token_mass(&fractions, &starts)?
            }
        };
        let z2 = crate::corpus::z2_from_sizes(&sizes);

        let mut z1: Vec<TopicId> = Vec::new();
        let mut tokens: Vec<u32> = Vec::new();
        let mut used: Vec<TopicId> = Vec::new();
        for (j, &len) in shape.sentence_lengths.iter().enumerate() {
            let s = z2[j];
            for pos in 0..len {
                let segment_start = z1.is_empty() || (pos == 0 && z2[j - 1] != s);
                let sentence_break = pos == 0 && cfg.prev_scope == PrevScope::Sentence;
                let rho = if segment_start || sentence_break {
                    0.0
                } else {
                    cfg.rho
                };
                let stay = rho > 0.0 && rng.random::<f64>() < rho;
                let topic = if stay {
                    *z1.last().unwrap()
                } else {
                    let blocked = |t: TopicId| used.contains(&t);
                    let bank_ref = &mut bank;
                    let mut fresh = |r: &mut SeededRng| bank_ref.create(r, Some(s));
                    let t = thetas[s]
                        .draw(&mut rng, &blocked, &mut fresh)
                        .ok_or_else(|| {
                            GenError::Infeasible(alloc::format!(
                                "transcript {g}: every topic of category {s} is already used"
                            ))
                        })?;
                    used.push(t);
                    bank.usage[t as usize] += 1;
                    t
                };
                tokens.push(bank.emit(&mut rng, topic));
                z1.push(topic);
            }
        }
        let sentences = sentences_from(&tokens, &shape.sentence_lengths);
        transcripts.push(Transcript::from_sentences(transcript_id(g), &sentences)?);
        states.push(TranscriptState::from_changepoints(
            z1,
            changepoints_from_sizes(&sizes),
            num_sentences,
        ));
    }
    let residual_mass = thetas.iter().map(|t| t.residual()).fold(0.0, f64::max);
    finish(cfg, transcripts, states, bank, k, residual_mass)
}

fn finish(
    cfg: &GenerativeConfig,
    transcripts: Vec<Transcript>,
    states: Vec<TranscriptState>,
    bank: TopicBank,
    categories: usize,
    residual_mass: f64,
) -> Result<SyntheticCorpus, GenError> {
    let corpus = GroupedCorpus::new(cfg.vocab_size, transcripts)?;
    let truth = LatentState {
        transcripts: states,
        seed: cfg.seed,
    };
    let gold = GoldSegmentation::from_state(&truth, &corpus)?;
    Ok(SyntheticCorpus {
        corpus,
        truth,
        topics: bank.into_matrix(categories),
        gold,
        residual_mass,
    })
}

/// Forward-sample one of the recovery configurations of the generalized model.
pub fn sample_gbm(cfg: &GenerativeConfig) -> Result<SyntheticCorpus, GenError> {
    cfg.validate()?;
    match cfg.mode {
        GenerativeMode::NewsTranscript => Err(GenError::Config(
            "news mode is sampled by sample_news".into(),
        )),
        GenerativeMode::Dpmm => sample_dpmm(cfg),
        GenerativeMode::FiniteLda => sample_lda(cfg),
        GenerativeMode::StickyHmm => sample_sticky(cfg),
        GenerativeMode::NdpMask => sample_ndp(cfg),
    }
}

fn plain_state(
    z1: Vec<TopicId>,
    z2_value: usize,
    num_sentences: usize,
    blocked: Vec<TopicId>,
) -> TranscriptState {
    TranscriptState {
        z1,
        z2: vec![z2_value; num_sentences],
        changepoints: Vec::new(),
        sizes: vec![num_sentences],
        blocked,
    }
}

fn sample_dpmm(cfg: &GenerativeConfig) -> Result<SyntheticCorpus, GenError> {
    let mut rng = stream_rng(cfg.seed, streams::GENERATE);
    let mut bank = TopicBank::new(cfg.vocab_size, cfg.beta);
    let mut crp = CrpSeating::default();
    let mut transcripts = Vec::new();
    let mut states = Vec::new();
    for g in 0..cfg.transcripts {
        let shape = draw_shape(&mut rng, cfg);
        let n: usize = shape.sentence_lengths.iter().sum();
        let mut z1 = Vec::with_capacity(n);
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            let table = crp.sample(&mut rng, cfg.alpha);
            if table == crp.tables() {
                bank.create(&mut rng, None);
                bank.usage[table] += 1;
            }
            crp.seat(table);
            tokens.push(bank.emit(&mut rng, table as TopicId));
            z1.push(table as TopicId);
        }
        transcripts.push(Transcript::from_sentences(
            transcript_id(g),
            &sentences_from(&tokens, &shape.sentence_lengths),
        )?);
        states.push(plain_state(z1, 0, shape.sentence_lengths.len(), Vec::new()));
    }
    finish(cfg, transcripts, states, bank, 0, 0.0)
}

fn sample_lda(cfg: &GenerativeConfig) -> Result<SyntheticCorpus, GenError> {
    let mut rng = stream_rng(cfg.seed, streams::GENERATE);
    let mut bank = TopicBank::new(cfg.vocab_size, cfg.beta);
    for _ in 0..cfg.lda_topics {
        bank.create(&mut rng, None);
    }
    let mut transcripts = Vec::new();
    let mut states = Vec::new();
    for g in 0..cfg.transcripts {
        let shape = draw_shape(&mut rng, cfg);
        let theta = math::sample_dirichlet(&mut rng, &vec![cfg.alpha; cfg.lda_topics]);
        let pick = WeightedIndex::new(&theta)
            .map_err(|_| GenError::Config("degenerate document mixture".into()))?;
        let n: usize = shape.sentence_lengths.iter().sum();
        let mut z1 = Vec::with_capacity(n);
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            let t = pick.sample(&mut rng) as TopicId;
            bank.usage[t as usize] += 1;
            tokens.push(bank.emit(&mut rng, t));
            z1.push(t);
        }
        transcripts.push(Transcript::from_sentences(
            transcript_id(g),
            &sentences_from(&tokens, &shape.sentence_lengths),
        )?);
        // each document is its own level-2 group
        states.push(plain_state(z1, g, shape.sentence_lengths.len(), Vec::new()));
    }
    finish(cfg, transcripts, states, bank, 0, 0.0)
}

fn sample_sticky(cfg: &GenerativeConfig) -> Result<SyntheticCorpus, GenError> {
    let mut rng = stream_rng(cfg.seed, streams::GENERATE);
    let mut bank = TopicBank::new(cfg.vocab_size, cfg.beta);
    let mut theta = LazyGem::new(cfg.alpha);
    let mut transcripts = Vec::new();
    let mut states = Vec::new();
    for g in 0..cfg.transcripts {
        let shape = draw_shape(&mut rng, cfg);
        let mut z1: Vec<TopicId> = Vec::new();
        let mut tokens = Vec::new();
        for &len in &shape.sentence_lengths {
            for pos in 0..len {
                let can_stay =
                    !z1.is_empty() && !(pos == 0 && cfg.prev_scope == PrevScope::Sentence);
                let t = if can_stay && rng.random::<f64>() < cfg.rho {
                    *z1.last().unwrap()
                } else {
                    let bank_ref = &mut bank;
                    let mut fresh = |r: &mut SeededRng| bank_ref.create(r, None);
                    let t = theta
                        .draw(&mut rng, &|_| false, &mut fresh)
                        .expect("unmasked draw");
                    bank.usage[t as usize] += 1;
                    t
                };
                tokens.push(bank.emit(&mut rng, t));
                z1.push(t);
            }
        }
        transcripts.push(Transcript::from_sentences(
            transcript_id(g),
            &sentences_from(&tokens, &shape.sentence_lengths),
        )?);
        states.push(plain_state(z1, 0, shape.sentence_lengths.len(), Vec::new()));
    }
    let residual = theta.residual();
    finish(cfg, transcripts, states, bank, 0, residual)
}

fn sample_ndp(cfg: &GenerativeConfig) -> Result<SyntheticCorpus, GenError> {
    let mut rng = stream_rng(cfg.seed, streams::GENERATE);
    let mut bank = TopicBank::new(cfg.vocab_size, cfg.beta);
    // global atom measure shared by every cluster's distribution
    let mut base = LazyGem::new(cfg.alpha);
    let mut clusters: Vec<LazyGem> = Vec::new();
    let mut doc_crp = CrpSeating::default();
    let mut owner: Vec<Option<usize>> = Vec::new();
    let mut transcripts = Vec::new();
    let mut assignments = Vec::new();
    let mut z1s = Vec::new();
    for g in 0..cfg.transcripts {
        let shape = draw_shape(&mut rng, cfg);
        let z = doc_crp.sample(&mut rng, cfg.cluster_alpha);
        if z == doc_crp.tables() {
            clusters.push(LazyGem::new(cfg.alpha));
        }
        doc_crp.seat(z);
        let n: usize = shape.sentence_lengths.iter().sum();
        let mut z1 = Vec::with_capacity(n);
        let mut tokens = Vec::with_capacity(n);
        for _ in 0..n {
            let owner_ref = &owner;
            let blocked =
                |t: TopicId| matches!(owner_ref.get(t as usize), Some(Some(o)) if *o != z);
            let bank_ref = &mut bank;
            let base_ref = &mut base;
            // new sticks take atoms from the base measure restricted to this cluster's mask
            let mut fresh = |r: &mut SeededRng| {
                let mut new_topic = |r2: &mut SeededRng| bank_ref.create(r2, None);
                base_ref
                    .draw(r, &blocked, &mut new_topic)
                    .expect("base draw with fresh atoms")
            };
            let t = clusters[z]
                .draw(&mut rng, &blocked, &mut fresh)
                .ok_or_else(|| {
                    GenError::Infeasible("no unmasked topic for level-2 cluster".into())
                })?;
            if owner.len() <= t as usize {
                owner.resize(t as usize + 1, None);
            }
            if owner[t as usize].is_none() {
                owner[t as usize] = Some(z);
            }
            if !z1.contains(&t) {
                bank.usage[t as usize] += 1;
            }
            tokens.push(bank.emit(&mut rng, t));
            z1.push(t);
        }
        transcripts.push(Transcript::from_sentences(
            transcript_id(g),
            &sentences_from(&tokens, &shape.sentence_lengths),
        )?);
        assignments.push((z, shape.sentence_lengths.len()));
        z1s.push(z1);
    }
    // final mask of each document: topics owned by other clusters
    let states = z1s
        .into_iter()
        .zip(&assignments)
        .map(|(z1, &(z, ns))| {
            let blocked = owner
                .iter()
                .enumerate()
                .filter(|(_, o)| matches!(o, Some(c) if *c != z))
                .map(|(t, _)| t as TopicId)
                .collect();
            plain_state(z1, z, ns, blocked)
        })
        .collect();
    for (t, o) in owner.iter().enumerate() {
        bank.category[t] = *o;
    }
    let categories = clusters.len();
    let residual = base.residual();
    finish(cfg, transcripts, states, bank, categories, residual)
}

/// Draw `n` fresh seeds from a generator, for callers that split a run.
pub fn split_seeds<R: RngCore>(rng: &mut R, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.next_u64()).collect()
}

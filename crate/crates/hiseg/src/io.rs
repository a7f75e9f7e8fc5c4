//! On-disk formats. Every index in a file is 0-based.
//!
//! - corpus: JSON lines `{id, sentences: [[token id]]}` with a `.vocab`
//!   sidecar holding one token string per line (line number = id);
//! - gold / predictions: JSON lines `{id, level1, level2, ...}`, `level1` in
//!   tokens and `level2` in sentences;
//! - latent state: JSON lines, one transcript per line;
//! - trace: JSON lines `{iter, joint_ll, changepoints}`; `joint_ll` is null
//!   for sweeps whose state lies outside the model support, which happens
//!   only in the relaxed part of burn-in;
//! - topics: a text header `hiseg-topics V=.. topics=.. K=..` followed by one
//!   line per topic: category (`-` when unassigned), V probabilities with 17
//!   significant digits, usage count and an active flag.

use std::fs;
use std::path::{Path, PathBuf};

use hiseg_core::corpus::{
    GoldSegmentation, GoldTranscript, GroupedCorpus, LatentState, Transcript, TranscriptState,
};
use hiseg_core::topics::TopicMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TOPICS_MAGIC: &str = "hiseg-topics";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::io(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CorpusRecord {
    id: String,
    sentences: Vec<Vec<u32>>,
}

/// `c.jsonl` -> `c.vocab`.
pub fn vocab_path(corpus: &Path) -> PathBuf {
    corpus.with_extension("vocab")
}

pub fn corpus_to_jsonl(corpus: &GroupedCorpus) -> String {
    to_jsonl(corpus.transcripts.iter().map(|t| CorpusRecord {
        id: t.id.clone(),
        sentences: t.sentences().map(<[u32]>::to_vec).collect(),
    }))
}

/// Placeholder vocabulary `w0, w1, ...` for synthetic corpora.
pub fn synthetic_vocab(vocab_size: usize) -> String {
    (0..vocab_size).map(|v| format!("w{v}\n")).collect()
}

/// Load a corpus. The vocabulary size comes from the sidecar when present,
/// otherwise from the largest token id.
pub fn read_corpus(path: &Path) -> Result<GroupedCorpus> {
    let records: Vec<CorpusRecord> = parse_jsonl(&read_text(path)?, path)?;
    let transcripts = records
        .iter()
        .map(|r| Transcript::from_sentences(r.id.clone(), &r.sentences))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let vp = vocab_path(path);
    let vocab_size = if vp.exists() {
        read_text(&vp)?.lines().count()
    } else {
        transcripts
            .iter()
            .flat_map(|t| t.tokens().iter())
            .max()
            .map_or(0, |&m| m as usize + 1)
    };
    GroupedCorpus::new(vocab_size, transcripts).map_err(|e| CliError::io(path, e))
}

pub fn read_gold(path: &Path) -> Result<GoldSegmentation> {
    Ok(GoldSegmentation {
        transcripts: parse_jsonl(&read_text(path)?, path)?,
    })
}

pub fn gold_to_jsonl(gold: &GoldSegmentation) -> String {
    to_jsonl(&gold.transcripts)
}

/// Fill token counts and sentence offsets from the corpus where missing.
pub fn attach_offsets(gold: &mut GoldSegmentation, corpus: &GroupedCorpus) {
    for (g, t) in gold.transcripts.iter_mut().zip(&corpus.transcripts) {
        g.num_tokens.get_or_insert(t.num_tokens());
        g.sentence_starts
            .get_or_insert_with(|| t.sentence_starts().to_vec());
    }
}

/// Predicted segmentation in the gold format.
pub fn prediction(
    corpus: &GroupedCorpus,
    level1: &[Vec<usize>],
    level2: &[Vec<usize>],
) -> GoldSegmentation {
    let transcripts = corpus
        .transcripts
        .iter()
        .enumerate()
        .map(|(g, t)| GoldTranscript {
            id: t.id.clone(),
            level1: level1[g].clone(),
            level2: level2.get(g).cloned().unwrap_or_default(),
            categories: None,
            num_tokens: Some(t.num_tokens()),
            sentence_starts: Some(t.sentence_starts().to_vec()),
        })
        .collect();
    GoldSegmentation { transcripts }
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    id: String,
    #[serde(flatten)]
    state: TranscriptState,
}

pub fn state_to_jsonl(state: &LatentState, corpus: &GroupedCorpus) -> String {
    to_jsonl(
        corpus
            .transcripts
            .iter()
            .zip(&state.transcripts)
            .map(|(t, s)| StateRecord {
                id: t.id.clone(),
                state: s.clone(),
            }),
    )
}

pub fn read_state(path: &Path) -> Result<Vec<(String, TranscriptState)>> {
    let records: Vec<StateRecord> = parse_jsonl(&read_text(path)?, path)?;
    Ok(records.into_iter().map(|r| (r.id, r.state)).collect())
}

pub fn topics_to_string(m: &TopicMatrix) -> String {
    let mut out = format!(
        "{TOPICS_MAGIC} V={} topics={} K={}\n",
        m.vocab_size,
        m.num_topics(),
        m.categories
    );
    for k in 0..m.num_topics() {
        match m.category[k] {
            Some(c) => out.push_str(&c.to_string()),
            None => out.push('-'),
        }
        for p in &m.rows[k] {
            out.push_str(&format!(" {p:.16e}"));
        }
        out.push_str(&format!(" {} {}\n", m.usage[k], u8::from(m.active[k])));
    }
    out
}

pub fn parse_topics(text: &str, path: &Path) -> Result<TopicMatrix> {
    let bad = |m: String| CliError::io(path, m);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| bad("empty topics file".into()))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(TOPICS_MAGIC) {
        return Err(bad(format!("header must start with {TOPICS_MAGIC:?}")));
    }
    let mut get = |key: &str| -> Result<usize> {
        let f = fields
            .next()
            .ok_or_else(|| bad(format!("header lacks {key}")))?;
        f.strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("malformed header field {f:?}")))
    };
    let (v, n, k) = (get("V")?, get("topics")?, get("K")?);
    let mut m = TopicMatrix::empty(v, k);
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != v + 3 {
            return Err(bad(format!(
                "topic {i}: expected {} fields, found {}",
                v + 3,
                f.len()
            )));
        }
        let category = match f[0] {
            "-" => None,
            c => Some(
                c.parse()
                    .map_err(|_| bad(format!("topic {i}: bad category {c:?}")))?,
            ),
        };
        let row = f[1..=v]
            .iter()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|_| bad(format!("topic {i}: bad probability {x:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let usage = f[v + 1]
            .parse()
            .map_err(|_| bad(format!("topic {i}: bad usage {:?}", f[v + 1])))?;
        m.push(row, category, usage);
        m.active[i] = match f[v + 2] {
            "1" => true,
            "0" => false,
            x => return Err(bad(format!("topic {i}: bad active flag {x:?}"))),
        };
    }
    if m.num_topics() != n {
        return Err(bad(format!(
            "header announces {n} topics, found {}",
            m.num_topics()
        )));
    }
    m.validate().map_err(|e| bad(e.to_string()))?;
    Ok(m)
}

pub fn read_topics(path: &Path) -> Result<TopicMatrix> {
    parse_topics(&read_text(path)?, path)
}

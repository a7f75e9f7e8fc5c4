use std::path::Path;

use hiseg::io;
use hiseg_core::generative::{sample_news, GenerativeConfig};
use hiseg_core::topics::TopicMatrix;

fn small() -> hiseg_core::SyntheticCorpus {
    let cfg = GenerativeConfig {
        k: 2,
        transcripts: 3,
        sentences: (8, 10),
        tokens_per_sentence: (4, 6),
        vocab_size: 30,
        seed: 5,
        ..GenerativeConfig::news()
    };
    sample_news(&cfg).unwrap()
}

#[test]
fn topics_round_trip_is_bit_exact() {
    let mut m = TopicMatrix::empty(3, 2);
    m.push(vec![0.1, 0.2, 0.7], Some(1), 4);
    m.push(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0], None, 0);
    m.push(vec![5e-324, 0.5, 0.5], Some(0), 9);
    m.active[2] = false;
    let text = io::topics_to_string(&m);
    let back = io::parse_topics(&text, Path::new("t.topics")).unwrap();
    assert_eq!(back, m);
    for (a, b) in m.rows.iter().flatten().zip(back.rows.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let first = text
        .lines()
        .nth(1)
        .unwrap()
        .split_whitespace()
        .nth(1)
        .unwrap();
    let mantissa = first.split('e').next().unwrap().replace('.', "");
    assert_eq!(mantissa.len(), 17);
}

#[test]
fn synthetic_topics_round_trip() {
    let s = small();
    let back = io::parse_topics(&io::topics_to_string(&s.topics), Path::new("t")).unwrap();
    assert_eq!(back, s.topics);
}

#[test]
fn malformed_topics_are_rejected() {
    let p = Path::new("bad.topics");
    assert!(io::parse_topics("", p).is_err());
    assert!(io::parse_topics("topics V=2 topics=1 K=1\n0 0.5 0.5 1 1\n", p).is_err());
    assert!(io::parse_topics("hiseg-topics V=2 topics=2 K=1\n0 0.5 0.5 1 1\n", p).is_err());
    assert!(io::parse_topics("hiseg-topics V=2 topics=1 K=1\n0 0.5 0.6 1 1\n", p).is_err());
    assert!(io::parse_topics("hiseg-topics V=2 topics=1 K=1\n0 0.5 1 1\n", p).is_err());
    assert!(io::parse_topics("hiseg-topics V=2 topics=1 K=1\n0 0.5 0.5 1 2\n", p).is_err());
    assert!(io::parse_topics("hiseg-topics V=2 topics=1 K=1\n0 0.5 0.5 1 1\n", p).is_ok());
}

#[test]
fn corpus_and_gold_round_trip() {
    let s = small();
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("c.jsonl");
    io::write_atomic(&cp, io::corpus_to_jsonl(&s.corpus).as_bytes()).unwrap();
    io::write_atomic(
        &io::vocab_path(&cp),
        io::synthetic_vocab(s.corpus.vocab_size).as_bytes(),
    )
    .unwrap();
    assert_eq!(io::read_corpus(&cp).unwrap(), s.corpus);

    let gp = dir.path().join("g.jsonl");
    io::write_atomic(&gp, io::gold_to_jsonl(&s.gold).as_bytes()).unwrap();
    assert_eq!(io::read_gold(&gp).unwrap(), s.gold);

    let sp = dir.path().join("s.jsonl");
    io::write_atomic(&sp, io::state_to_jsonl(&s.truth, &s.corpus).as_bytes()).unwrap();
    let states = io::read_state(&sp).unwrap();
    assert_eq!(states.len(), s.corpus.transcripts.len());
    for ((id, st), (t, truth)) in states
        .iter()
        .zip(s.corpus.transcripts.iter().zip(&s.truth.transcripts))
    {
        assert_eq!(id, &t.id);
        assert_eq!(st, truth);
    }
}

#[test]
fn vocabulary_size_falls_back_to_largest_id() {
    let dir = tempfile::tempdir().unwrap();
    let cp = dir.path().join("c.jsonl");
    std::fs::write(&cp, "{\"id\":\"a\",\"sentences\":[[0,4],[2]]}\n\n").unwrap();
    assert_eq!(io::read_corpus(&cp).unwrap().vocab_size, 5);
    std::fs::write(io::vocab_path(&cp), "a\nb\nc\nd\ne\nf\ng\n").unwrap();
    assert_eq!(io::read_corpus(&cp).unwrap().vocab_size, 7);
    std::fs::write(io::vocab_path(&cp), "a\nb\n").unwrap();
    assert!(io::read_corpus(&cp).is_err());
}

#[test]
fn bad_lines_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let gp = dir.path().join("g.jsonl");
    std::fs::write(&gp, "{\"id\":\"a\",\"level1\":[],\"level2\":[]}\n{oops\n").unwrap();
    let e = io::read_gold(&gp).unwrap_err();
    assert_eq!(e.exit_code(), 2);
    let rec = e.record();
    assert!(rec.contains("line 2") && rec.contains("g.jsonl"), "{rec}");
    assert!(!rec.contains('\n'));
}

use std::collections::BTreeMap;

use hiseg_core::corpus::{
    changepoints_from_sizes, sizes_from_changepoints, validate_state, z2_from_sizes, GroupedCorpus,
    PrevScope, TopicId, Transcript,
};
use hiseg_core::dos::{format_dos, lookup_known_model, parse_dos, KNOWN_MODELS};
use hiseg_core::eval::{pk, precision_recall, Axis, Segmentation};
use hiseg_core::generative::{sample_news, GenerativeConfig};
use hiseg_core::inference::{InferenceParams, Sampler};
use hiseg_core::topics::{crp_topic_weights, CountTables};
use proptest::prelude::*;

/// A valid classification string with `levels` levels.
fn dos_string() -> impl Strategy<Value = String> {
    (1usize..4)
        .prop_flat_map(|levels| {
            let share = prop::sample::select(vec!["F", "G", "C"]);
            let part = (
                prop::collection::vec(share.clone(), levels + 1),
                prop::sample::select(vec!["N", "P", "NP"]),
                any::<bool>(),
            );
            (
                Just(levels),
                prop::collection::vec(share, levels),
                prop::collection::vec(part, levels),
            )
        })
        .prop_map(|(levels, phi, parts)| {
            let mut out = vec![phi.join("-")];
            for (l, (shares, dim, seq)) in parts.into_iter().enumerate() {
                if dim == "N" {
                    out.push("N".into());
                    continue;
                }
                let mut tokens: Vec<&str> = if levels == 1 {
                    vec!["F"]
                } else {
                    shares[..levels - 1 - l].to_vec()
                };
                tokens.push(dim);
                if seq {
                    tokens.push("S");
                }
                out.push(tokens.join("-"));
            }
            out.join(";")
        })
}

fn segmentation(len: usize) -> impl Strategy<Value = Segmentation> {
    prop::collection::btree_set(1..len, 0..len).prop_map(move |cps| {
        Segmentation::new(len, cps.into_iter().collect(), Axis::Token).unwrap()
    })
}

fn reversed(s: &Segmentation) -> Segmentation {
    let n = s.len();
    let mut cps: Vec<usize> = s.changepoints().iter().map(|&c| n - c).collect();
    cps.reverse();
    Segmentation::new(n, cps, Axis::Token).unwrap()
}

fn transcript() -> impl Strategy<Value = Transcript> {
    prop::collection::vec(prop::collection::vec(0u32..5, 1..5), 1..6)
        .prop_map(|s| Transcript::from_sentences("t", &s).unwrap())
}

proptest! {
    #[test]
    fn dos_round_trip(s in dos_string()) {
        let c = parse_dos(&s).unwrap();
        prop_assert_eq!(format_dos(&c), s.clone());
        let noisy = format!("  {} ", s.to_lowercase().replace(';', " ; "));
        prop_assert_eq!(format_dos(&parse_dos(&noisy).unwrap()), s);
    }

    #[test]
    fn dos_part_count_law(s in "[CFGNPS]{1,2}(-[CFGNPS]{1,2}){0,3}(;[CFGNPS]{1,2}(-[CFGNPS]{1,2}){0,3}){0,4}") {
        if parse_dos(&s).is_ok() {
            let parts: Vec<&str> = s.split(';').collect();
            prop_assert_eq!(parts.len(), parts[0].matches('-').count() + 2);
        }
    }

    #[test]
    fn sizes_changepoints_bijection(sizes in prop::collection::vec(1usize..6, 1..6)) {
        let n: usize = sizes.iter().sum();
        let cps = changepoints_from_sizes(&sizes);
        prop_assert_eq!(cps.len(), sizes.len() - 1);
        prop_assert_eq!(sizes_from_changepoints(&cps, n), sizes.clone());
        let z2 = z2_from_sizes(&sizes);
        prop_assert_eq!(z2.len(), n);
        let boundaries: Vec<usize> = (1..n).filter(|&j| z2[j] != z2[j - 1]).collect();
        prop_assert_eq!(boundaries, cps);
    }

    #[test]
    fn prev_next_are_inverse(t in transcript(), sentence_scope in any::<bool>()) {
        let scope = if sentence_scope { PrevScope::Sentence } else { PrevScope::Transcript };
        for i in 0..t.num_tokens() {
            if let Some(p) = t.prev(i, scope) {
                prop_assert_eq!(t.next(p, scope), Some(i));
            }
            if let Some(n) = t.next(i, scope) {
                prop_assert_eq!(t.prev(n, scope), Some(i));
            }
        }
    }

    #[test]
    fn pk_reversal_symmetry((r, h) in (2usize..30).prop_flat_map(|n| (segmentation(n), segmentation(n)))) {
        for k in 1..r.len() {
            prop_assert_eq!(pk(&r, &h, k).unwrap(), pk(&reversed(&r), &reversed(&h), k).unwrap());
            prop_assert_eq!(pk(&r, &r, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn precision_recall_monotone_in_threshold(
        r in prop::collection::btree_set(1usize..60, 0..8),
        h in prop::collection::btree_set(1usize..60, 0..8),
    ) {
        let r = Segmentation::new(60, r.into_iter().collect(), Axis::Token).unwrap().segments();
        let h = Segmentation::new(60, h.into_iter().collect(), Axis::Token).unwrap().segments();
        let mut last = precision_recall(&r, &h, 61);
        for t in (0..61).rev() {
            let now = precision_recall(&r, &h, t);
            prop_assert!(now.0 <= last.0 && now.1 <= last.1, "threshold {}: {:?} after {:?}", t, now, last);
            last = now;
        }
    }

    #[test]
    fn crp_weights_skip_masked_and_foreign_topics(
        uses in prop::collection::vec((0usize..3, 0u32..6), 0..40),
        cats in prop::collection::vec(prop::option::of(0usize..3), 6),
        mask in prop::collection::vec(any::<bool>(), 6),
        s in 0usize..3,
    ) {
        let mut t = CountTables::new(4, 3);
        for &(c, k) in &uses {
            t.add_use(c, k);
        }
        let w = crp_topic_weights(&t, s, |k| mask[k as usize], &cats, 0.5);
        for &(k, weight) in &w.topics {
            prop_assert!(weight > 0.0);
            prop_assert!(!mask[k as usize]);
            match cats[k as usize] {
                Some(c) => prop_assert_eq!(c, s),
                None => prop_assert_eq!(t.use_outside(s, k), 0),
            }
        }
        prop_assert!((w.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn known_model_lookup_is_injective() {
    let names: std::collections::BTreeSet<_> = KNOWN_MODELS.iter().map(|(n, _)| n).collect();
    let strings: std::collections::BTreeSet<_> = KNOWN_MODELS.iter().map(|(_, s)| s).collect();
    assert_eq!(names.len(), KNOWN_MODELS.len());
    assert_eq!(strings.len(), KNOWN_MODELS.len());
    for (name, s) in KNOWN_MODELS {
        assert_eq!(lookup_known_model(&parse_dos(s).unwrap()), Some(name));
    }
}

fn small_config(k: usize, seed: u64) -> GenerativeConfig {
    GenerativeConfig {
        k,
        transcripts: 2,
        sentences: (3 * k, 3 * k + 3),
        tokens_per_sentence: (3, 5),
        vocab_size: 30,
        rho: 0.8,
        seed,
        ..GenerativeConfig::news()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), k in 1usize..4) {
        let cfg = small_config(k, seed);
        prop_assert_eq!(sample_news(&cfg).unwrap(), sample_news(&cfg).unwrap());
    }

    #[test]
    fn sweeps_preserve_state_invariants(seed in any::<u64>(), k in 1usize..4, use_truth in any::<bool>()) {
        let s = sample_news(&small_config(k, seed)).unwrap();
        let params = InferenceParams { k, rho: 0.8, seed, ..InferenceParams::default() };
        let init = use_truth.then_some(&s.topics);
        let mut sampler = Sampler::new(&s.corpus, init, &params).unwrap();
        for _ in 0..4 {
            sampler.sweep().unwrap();
            sampler.update_phi();
            sampler.check_invariants().unwrap();
            let state = sampler.state();
            validate_state(&state, &s.corpus, k).unwrap();
            prop_assert_eq!(sampler.tables().total_tokens(), s.corpus.num_tokens() as u64);
            let topics = sampler.topics();
            let mut owner: BTreeMap<TopicId, usize> = BTreeMap::new();
            for (t, ts) in s.corpus.transcripts.iter().zip(&state.transcripts) {
                prop_assert_eq!(ts.changepoints.len(), k - 1);
                for (i, &z) in ts.z1.iter().enumerate() {
                    let c = ts.z2[t.sentence_of(i)];
                    if let Some(own) = topics.category[z as usize] {
                        prop_assert_eq!(own, c);
                    }
                    prop_assert_eq!(*owner.entry(z).or_insert(c), c);
                }
            }
        }
    }
}

#[test]
fn corpus_construction_rejects_out_of_range_tokens() {
    let t = Transcript::from_sentences("a", &[vec![0, 3]]).unwrap();
    assert!(GroupedCorpus::new(3, vec![t.clone()]).is_err());
    assert!(GroupedCorpus::new(4, vec![t]).is_ok());
}

#[test]
fn generated_segments_and_stories_match_their_rates() {
    let (k, rho) = (3, 0.8);
    let mut fractions = vec![0.0; k];
    let (mut draws, mut stays, mut pairs) = (0usize, 0usize, 0usize);
    for seed in 0..200 {
        let cfg = GenerativeConfig {
            k,
            transcripts: 2,
            sentences: (30, 30),
            tokens_per_sentence: (4, 4),
            vocab_size: 50,
            rho,
            seed,
            ..GenerativeConfig::news()
        };
        let s = sample_news(&cfg).unwrap();
        for (t, ts) in s.corpus.transcripts.iter().zip(&s.truth.transcripts) {
            for (f, &size) in fractions.iter_mut().zip(&ts.sizes) {
                *f += size as f64 / 30.0;
            }
            draws += 1;
            for i in 0..t.num_tokens() {
                let Some(p) = t.prev(i, cfg.prev_scope) else {
                    continue;
                };
                if ts.z2[t.sentence_of(p)] != ts.z2[t.sentence_of(i)] {
                    continue;
                }
                pairs += 1;
                stays += usize::from(ts.z1[p] == ts.z1[i]);
            }
        }
    }
    for f in &fractions {
        let mean = f / draws as f64;
        assert!(
            (mean - 1.0 / k as f64).abs() < 0.04,
            "segment fraction {mean}"
        );
    }
    let rate = stays as f64 / pairs as f64;
    assert!(
        (rate - rho).abs() < 0.02,
        "continuation rate {rate} over {pairs} pairs"
    );
}

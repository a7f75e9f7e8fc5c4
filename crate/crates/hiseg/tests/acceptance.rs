//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails or exceeds its time budget.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hiseg_core::corpus::{
    validate_state, GoldSegmentation, GoldTranscript, GroupedCorpus, TopicId, Transcript,
};
use hiseg_core::dos::{format_dos, lookup_known_model, parse_dos};
use hiseg_core::eval::{
    self, pk, pk_counts, precision_recall, AlignmentThresholds, Axis, Segmentation,
};
use hiseg_core::generative::{
    crp_seating_log_prob, sample_gbm, sample_news, GenerativeConfig, GenerativeMode,
    SizeConcentration,
};
use hiseg_core::inference::{self, baseline_markov, InferenceParams};
use hiseg_core::topics::{
    estimate_phi, init_topics, predictive_word_prob, CountTables, InitTopicsParams, TopicMatrix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, Continuous};
use statrs::function::gamma::ln_gamma;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Check); 9] = [
        (1, "dos golden suite", 1, dos_golden),
        (2, "pk matches exhaustive pair counting", 30, pk_exhaustive),
        (3, "metric calibration", 1, metric_calibration),
        (
            4,
            "collapsed counts match conjugate updates",
            5,
            collapsed_counts,
        ),
        (5, "generative invariants", 30, generative_invariants),
        (6, "small-instance exactness", 120, small_instance_exactness),
        (
            7,
            "synthetic recovery beats the Markov baseline",
            600,
            synthetic_recovery,
        ),
        (8, "cli determinism", 60, cli_determinism),
        (9, "recovery configurations", 30, recovery_configs),
    ];
    let mut failed = 0;
    for (n, name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let budget = Duration::from_secs(budget);
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the time budget")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {n} [{}] {name}: {detail} ({:.2}s of {}s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn dos_golden() -> Check {
    let known = [
        ("GMM", "C;F-P"),
        ("DP-MM", "C;F-NP"),
        ("HDP-HMM", "C;F-NP-S"),
        ("LDA", "C-F;G-P;N"),
        ("HDP", "C-F;G-NP;N"),
        ("NDP", "C-C;C-NP;NP"),
        ("MLC-HDP", "C-F-F;C-F-NP;C-NP;NP"),
        ("TSM", "C-F-F;C-G-P;G-NP-S;N"),
        ("STM", "C-F-F;F-G-NP;N;N"),
        ("LaDP", "C-F-F;C-F-NP-S;F-NP-S;N"),
        ("NewsTranscript", "C-C-F;C-F-NP-S;G-P-S;N"),
    ];
    for (name, s) in known {
        let c = parse_dos(s).map_err(|e| format!("{s}: {e}"))?;
        ensure!(
            c.levels + 1 == s.split(';').count(),
            "{s}: wrong level count"
        );
        ensure!(format_dos(&c) == s, "{s} formats as {}", format_dos(&c));
        ensure!(
            lookup_known_model(&c) == Some(name),
            "{s} looks up to {:?}",
            lookup_known_model(&c)
        );
    }
    let malformed = [
        ("", "SyntaxError"),
        ("C-X;G-NP;N", "SyntaxError"),
        ("C;F-Q", "SyntaxError"),
        ("Z;F-P", "SyntaxError"),
        ("C;F-NP-\u{e9}", "SyntaxError"),
        ("C;F-P-NP", "SyntaxError"),
        ("C;NP-F", "SyntaxError"),
        ("C-F;;N", "SyntaxError"),
        ("C;F", "SyntaxError"),
        ("C;F-P-S-X", "SyntaxError"),
        ("C-F;G", "ArityError"),
        ("C;F-P;N", "ArityError"),
        ("C-F;G-F-NP;N", "ArityError"),
        ("C-F;NP;N", "ArityError"),
        ("C-F-F;C-F-NP;C-NP", "ArityError"),
        ("C-F-F;C-NP;C-NP;NP", "ArityError"),
        ("C-F;G-NP;G-N", "ArityError"),
        ("C-F;G-NP;N-S", "FlagError"),
        ("C-S;F-NP", "FlagError"),
        ("C;F-NP-S-S", "FlagError"),
    ];
    for (s, class) in malformed {
        match parse_dos(s) {
            Ok(_) => return Err(format!("{s:?} parsed")),
            Err(e) => ensure!(
                e.class() == class,
                "{s:?}: {} instead of {class}",
                e.class()
            ),
        }
    }
    Ok(format!(
        "{} classifications round-trip, {} malformed strings rejected",
        known.len(),
        malformed.len()
    ))
}

/// Boundary bit `p - 1` set means a segment starts at position `p`.
fn segmentation_of(n: usize, mask: u32) -> Segmentation {
    let cps = (1..n).filter(|p| mask >> (p - 1) & 1 == 1).collect();
    Segmentation::new(n, cps, Axis::Token).unwrap()
}

fn pk_exhaustive() -> Check {
    let mut pairs = 0u64;
    for n in 2..=12usize {
        let masks: Vec<u32> = (0..1u32 << (n - 1)).collect();
        let segs: Vec<Segmentation> = masks.iter().map(|&m| segmentation_of(n, m)).collect();
        for (rm, r) in masks.iter().zip(&segs) {
            for (hm, h) in masks.iter().zip(&segs) {
                for k in 1..n {
                    let window = (1u32 << k) - 1;
                    let miss = (0..n - k)
                        .filter(|&i| ((rm >> i) & window == 0) != ((hm >> i) & window == 0))
                        .count();
                    let got = pk_counts(r, h, k).map_err(|e| e.to_string())?;
                    ensure!(
                        got == (miss, n - k),
                        "n={n} ref={rm:b} hyp={hm:b} k={k}: {got:?} vs ({miss}, {})",
                        n - k
                    );
                    let p = pk(r, h, k).map_err(|e| e.to_string())?;
                    ensure!(
                        p == miss as f64 / (n - k) as f64,
                        "n={n} k={k}: pk {p} is not the exact ratio"
                    );
                }
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} segmentation pairs, every window, exact"))
}

fn metric_calibration() -> Check {
    for n in 2..=12usize {
        let all = segmentation_of(n, (1 << (n - 1)) - 1);
        let one = segmentation_of(n, 0);
        for k in 1..n {
            for m in [
                0,
                1,
                (1 << (n - 1)) - 1,
                0b1010_1010_1010 & ((1 << (n - 1)) - 1),
            ] {
                let x = segmentation_of(n, m);
                ensure!(
                    pk(&x, &x, k).unwrap() == 0.0,
                    "pk(x, x) != 0 for n={n} k={k}"
                );
            }
            ensure!(
                pk(&all, &one, k).unwrap() == 1.0,
                "all boundaries vs one segment != 1 for n={n} k={k}"
            );
            ensure!(
                pk(&one, &all, k).unwrap() == 1.0,
                "one segment vs all boundaries != 1 for n={n} k={k}"
            );
        }
    }
    let r = Segmentation::new(30, vec![7, 18], Axis::Token)
        .unwrap()
        .segments();
    for t in [1, 5, 500] {
        ensure!(
            precision_recall(&r, &r, t) == (1.0, 1.0),
            "identity PR at threshold {t}"
        );
    }
    let reference = [(0, 10), (10, 20)];
    let hypothesis = [(0, 13), (13, 20)];
    ensure!(
        precision_recall(&reference, &hypothesis, 3) == (0.0, 0.0),
        "offset equal to the threshold must not align"
    );
    ensure!(
        precision_recall(&reference, &hypothesis, 4) == (1.0, 1.0),
        "offset below the threshold must align"
    );
    Ok("pk(x,x)=0, pk(all,one)=1, identity PR=(1,1), strict threshold".into())
}

fn collapsed_counts() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let v = rng.random_range(2..7usize);
        let cats = rng.random_range(1..4usize);
        let topics = rng.random_range(1..6usize);
        let beta = rng.random_range(0.01..2.0);
        let mut tables = CountTables::new(v, cats);
        let mut posterior = vec![vec![beta; v]; topics];
        let mut tokens = Vec::new();
        let mut uses = Vec::new();
        for _ in 0..rng.random_range(0..50) {
            let (k, w) = (rng.random_range(0..topics), rng.random_range(0..v));
            tables.add_token(k as TopicId, w as u32);
            posterior[k][w] += 1.0;
            tokens.push((k, w));
        }
        for _ in 0..rng.random_range(0..20) {
            let (s, k) = (rng.random_range(0..cats), rng.random_range(0..topics));
            tables.add_use(s, k as TopicId);
            uses.push((s, k));
        }
        for k in 0..topics {
            tables.ensure_topic(k as TopicId);
        }
        let phi = estimate_phi(&tables, beta);
        for (k, a) in posterior.iter().enumerate() {
            let total: f64 = a.iter().sum();
            for (w, &aw) in a.iter().enumerate() {
                let want = aw / total;
                let got = predictive_word_prob(&tables, k as TopicId, w as u32, beta)
                    .map_err(|e| e.to_string())?;
                worst = worst
                    .max((got - want).abs())
                    .max((phi.rows[k][w] - want).abs());
            }
        }
        ensure!(worst <= 1e-10, "case {case}: deviation {worst:e}");
        while !tokens.is_empty() {
            let (k, w) = tokens.swap_remove(rng.random_range(0..tokens.len()));
            tables
                .remove_token(k as TopicId, w as u32)
                .map_err(|e| e.to_string())?;
        }
        while !uses.is_empty() {
            let (s, k) = uses.swap_remove(rng.random_range(0..uses.len()));
            tables
                .remove_use(s, k as TopicId)
                .map_err(|e| e.to_string())?;
        }
        ensure!(
            tables.total_tokens() == 0,
            "case {case}: tokens left after removal"
        );
        for k in 0..topics as TopicId {
            ensure!(
                tables.topic_tokens(k) == 0 && tables.total_use(k) == 0,
                "case {case}: topic {k} not zero"
            );
            ensure!(
                (0..v as u32).all(|w| tables.topic_word(k, w) == 0),
                "case {case}: topic {k} word counts not zero"
            );
            ensure!(
                (0..cats).all(|s| tables.use_count(s, k) == 0),
                "case {case}: topic {k} use counts not zero"
            );
        }
    }
    Ok(format!(
        "100 tables, max deviation {worst:.1e}, removal returns to zero"
    ))
}

fn runs_are_contiguous(z: &[TopicId]) -> bool {
    let mut seen = std::collections::BTreeSet::new();
    z.iter()
        .enumerate()
        .all(|(i, &t)| (i > 0 && z[i - 1] == t) || seen.insert(t))
}

fn generative_invariants() -> Check {
    let small = |seed, rho| GenerativeConfig {
        k: 3,
        transcripts: 3,
        sentences: (30, 30),
        tokens_per_sentence: (8, 8),
        rho,
        seed,
        ..GenerativeConfig::news()
    };
    for seed in 0..100 {
        let s = sample_news(&small(seed, GenerativeConfig::news().rho))
            .map_err(|e| format!("seed {seed}: {e}"))?;
        validate_state(&s.truth, &s.corpus, 3).map_err(|v| format!("seed {seed}: {}", v[0]))?;
        for (t, ts) in s.corpus.transcripts.iter().zip(&s.truth.transcripts) {
            ensure!(
                ts.sizes.len() == 3 && ts.sizes.iter().all(|&n| n > 0),
                "seed {seed}: segment sizes {:?}",
                ts.sizes
            );
            ensure!(
                ts.z2.windows(2).all(|w| w[0] <= w[1])
                    && ts.z2 == hiseg_core::corpus::z2_from_sizes(&ts.sizes),
                "seed {seed}: z2 not in segment order"
            );
            ensure!(
                runs_are_contiguous(&ts.z1),
                "seed {seed}: a topic run is split"
            );
            for (i, &k) in ts.z1.iter().enumerate() {
                ensure!(
                    s.topics.category[k as usize] == Some(ts.z2[t.sentence_of(i)]),
                    "seed {seed}: c(z1) != z2 at token {i}"
                );
            }
        }
        let sticky = sample_news(&small(seed, 1.0)).map_err(|e| e.to_string())?;
        for ts in &sticky.truth.transcripts {
            let mut start = 0;
            for &n in &ts.sizes {
                let per_sentence = 8;
                let seg = &ts.z1[start * per_sentence..(start + n) * per_sentence];
                ensure!(
                    seg.iter().all(|&k| k == seg[0]),
                    "seed {seed}: rho=1 segment has several stories"
                );
                start += n;
            }
        }
        let fickle = sample_news(&small(seed, 0.0)).map_err(|e| e.to_string())?;
        for ts in &fickle.truth.transcripts {
            ensure!(
                ts.z1.windows(2).all(|w| w[0] != w[1]),
                "seed {seed}: rho=0 run longer than one token"
            );
        }
    }
    Ok("100 seeds: valid states, K segments, contiguous runs, c(z1)=z2, rho extremes".into())
}

fn small_instance_exactness() -> Check {
    let sentences: [&[u32]; 6] = [
        &[0, 0, 1],
        &[1, 0, 0],
        &[0, 1, 1],
        &[2, 2, 1],
        &[2, 1, 2],
        &[2, 2, 2],
    ];
    let owned: Vec<Vec<u32>> = sentences.iter().map(|s| s.to_vec()).collect();
    let corpus =
        GroupedCorpus::new(3, vec![Transcript::from_sentences("t", &owned).unwrap()]).unwrap();
    let rows = [[0.6, 0.3, 0.1], [0.2, 0.6, 0.2], [0.1, 0.2, 0.7]];
    let (usage, cats) = ([2.0, 1.0, 1.0], [0, 0, 1]);
    let mut phi = TopicMatrix::empty(3, 2);
    for k in 0..3 {
        phi.push(rows[k].to_vec(), Some(cats[k]), usage[k] as u64);
    }
    let (rho, gamma): (f64, f64) = (0.8, 2.0);
    let y: Vec<usize> = owned.iter().flatten().map(|&w| w as usize).collect();

    // Category 0 owns topics 0 and 1, so its story sequence is one topic or
    // one topic followed by the other; category 1 continues topic 2 throughout.
    let emit = |k: usize, ys: &[usize]| ys.iter().map(|&w| rows[k][w]).product::<f64>();
    let first_segment = |ys: &[usize]| {
        let n = ys.len();
        let mut total = 0.0;
        for (a, b) in [(0, 1), (1, 0)] {
            let start = usage[a] / (usage[0] + usage[1]);
            total += start * rho.powi(n as i32 - 1) * emit(a, ys);
            for j in 1..n {
                total += start
                    * rho.powi(j as i32 - 1)
                    * (1.0 - rho)
                    * emit(a, &ys[..j])
                    * emit(b, &ys[j..]);
            }
        }
        total
    };
    let beta = Beta::new(gamma, gamma).unwrap();
    let mut exact: Vec<f64> = (1..6)
        .map(|i| beta.pdf(i as f64 / 6.0) * first_segment(&y[..3 * i]) * emit(2, &y[3 * i..]))
        .collect();
    let z: f64 = exact.iter().sum();
    exact.iter_mut().for_each(|p| *p /= z);

    let kept = 20_000;
    let params = InferenceParams {
        k: 2,
        rho,
        gamma: SizeConcentration::Symmetric(gamma),
        iterations: 500 + kept,
        burn_in: 500,
        epsilon: None,
        update_phi: false,
        allow_new_topics: false,
        seed: 11,
        ..InferenceParams::default()
    };
    let r = inference::run(&corpus, Some(&phi), &params).map_err(|e| e.to_string())?;
    ensure!(r.kept == kept, "kept {} samples", r.kept);
    let freq = r.changepoint_frequencies(0, 0);
    let tv = 0.5 * (1..6).map(|i| (freq[i] - exact[i - 1]).abs()).sum::<f64>();
    ensure!(
        tv <= 0.05,
        "total variation {tv:.4}; exact {exact:.3?}, sampled {:.3?}",
        &freq[1..]
    );
    Ok(format!("total variation {tv:.4} over {kept} samples"))
}

fn synthetic_recovery() -> Check {
    let th = AlignmentThresholds {
        level1: 10,
        level2: 50,
    };
    let (mut s2, mut rc2, mut pk1, mut base_pk1) = (0.0, 0.0, 0.0, 0.0);
    let n = 10;
    for seed in 0..n {
        let cfg = GenerativeConfig {
            k: 3,
            transcripts: 5,
            sentences: (28, 32),
            tokens_per_sentence: (15, 19),
            seed,
            ..GenerativeConfig::news()
        };
        let s = sample_news(&cfg).map_err(|e| e.to_string())?;
        let level1: Vec<Vec<usize>> = s
            .gold
            .transcripts
            .iter()
            .map(|g| g.level1.clone())
            .collect();
        let topics = init_topics(
            &s.corpus,
            &level1,
            &InitTopicsParams {
                seed,
                ..InitTopicsParams::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let params = InferenceParams {
            k: 3,
            rho: cfg.rho,
            iterations: 100,
            burn_in: 50,
            epsilon: None,
            gamma: SizeConcentration::Symmetric(5.0),
            seed,
            ..InferenceParams::default()
        };
        let r = inference::run(&s.corpus, Some(&topics), &params).map_err(|e| e.to_string())?;
        let pred = GoldSegmentation::from_state(&r.state, &s.corpus).map_err(|e| e.to_string())?;
        let rep = eval::evaluate(&s.gold, &pred, &th).map_err(|e| e.to_string())?;
        let b = baseline_markov(&s.corpus, &topics, &params).map_err(|e| e.to_string())?;
        let bpred = GoldSegmentation {
            transcripts: s
                .gold
                .transcripts
                .iter()
                .zip(b)
                .map(|(g, level1)| GoldTranscript {
                    level1,
                    ..g.clone()
                })
                .collect(),
        };
        let brep = eval::evaluate(&s.gold, &bpred, &th).map_err(|e| e.to_string())?;
        s2 += rep.mean.s2;
        rc2 += rep.mean.rc2;
        pk1 += rep.mean_pk1;
        base_pk1 += brep.mean_pk1;
    }
    let m = n as f64;
    let (s2, rc2, pk1, base_pk1) = (s2 / m, rc2 / m, pk1 / m, base_pk1 / m);
    let detail = format!("mean S2 {s2:.4}, RC2 {rc2:.3}, Pk1 {pk1:.5} vs baseline {base_pk1:.5}");
    ensure!(s2 <= 0.15 && rc2 >= 0.8 && pk1 < base_pk1, "{detail}");
    Ok(detail)
}

fn hiseg(args: &[&str], cwd: &Path) -> Result<Vec<u8>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_hiseg"))
        .args(args)
        .current_dir(cwd)
        .env_remove("HISEG_CONFIG_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr).trim()
        ));
    }
    Ok(o.stdout)
}

fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    for args in [
        &["dos", "parse", "C-C-F;C-F-NP-S;G-P-S;N"][..],
        &["dos", "classify", "C-F;G-NP;N"],
        &["dos", "table", "--format", "json"],
    ] {
        ensure!(
            hiseg(args, d)? == hiseg(args, d)?,
            "{args:?} output differs between runs"
        );
    }
    let data = [
        "--k",
        "2",
        "--transcripts",
        "2",
        "--sentences",
        "12,14",
        "--tokens-per-sentence",
        "6,8",
        "--vocab-size",
        "50",
    ];
    let runs: Vec<(&str, Vec<&str>)> = vec![
        (
            "gen",
            [&["generate", "--seed", "3", "--out", "gen"][..], &data].concat(),
        ),
        (
            "lt",
            vec![
                "learn-topics",
                "--corpus",
                "gen/corpus.jsonl",
                "--segments",
                "gen/gold.jsonl",
                "--seed",
                "3",
                "--out",
                "lt",
            ],
        ),
        (
            "inf",
            vec![
                "infer",
                "--corpus",
                "gen/corpus.jsonl",
                "--topics",
                "lt/topics.topics",
                "--k",
                "2",
                "--iters",
                "12",
                "--burn-in",
                "4",
                "--seed",
                "3",
                "--out",
                "inf",
            ],
        ),
        (
            "base",
            vec![
                "baseline",
                "--corpus",
                "gen/corpus.jsonl",
                "--topics",
                "lt/topics.topics",
                "--iters",
                "4",
                "--seed",
                "3",
                "--out",
                "base",
            ],
        ),
        (
            "ev",
            vec![
                "evaluate",
                "--gold",
                "gen/gold.jsonl",
                "--pred",
                "inf/pred.jsonl",
                "--format",
                "json",
                "--out",
                "ev",
            ],
        ),
        (
            "pl",
            [
                &[
                    "pipeline",
                    "--seed",
                    "3",
                    "--iters",
                    "12",
                    "--burn-in",
                    "4",
                    "--out",
                    "pl",
                ][..],
                &data,
            ]
            .concat(),
        ),
    ];
    let mut files = 0;
    for (out, args) in &runs {
        hiseg(args, d)?;
        let replay = format!("{out}-replay");
        hiseg(
            &[
                "replay",
                "--manifest",
                &format!("{out}/manifest.json"),
                "--out",
                &replay,
            ],
            d,
        )?;
        let outputs = hiseg::cli::artifact_files(&d.join(out)).map_err(|e| e.to_string())?;
        ensure!(!outputs.is_empty(), "{out}: manifest lists no outputs");
        for f in outputs {
            let a = std::fs::read(d.join(out).join(&f)).map_err(|e| e.to_string())?;
            let b = std::fs::read(d.join(&replay).join(&f)).map_err(|e| e.to_string())?;
            ensure!(a == b, "{out}/{f} differs on replay");
            files += 1;
        }
    }
    Ok(format!(
        "{} subcommand runs replayed, {files} files byte-identical",
        runs.len() + 3
    ))
}

/// Restricted growth strings of length `n`: every seating with tables
/// numbered by first appearance.
fn seatings(n: usize) -> Vec<Vec<TopicId>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|z: Vec<TopicId>| {
                let open = z.iter().max().map_or(0, |&m| m + 1);
                (0..=open).map(move |t| {
                    let mut next = z.clone();
                    next.push(t);
                    next
                })
            })
            .collect();
    }
    out
}

/// Ewens closed form: alpha^T Gamma(alpha) / Gamma(alpha + n) prod (n_t - 1)!.
fn ewens(z: &[TopicId], alpha: f64) -> f64 {
    let mut sizes: BTreeMap<TopicId, f64> = BTreeMap::new();
    z.iter()
        .for_each(|&t| *sizes.entry(t).or_insert(0.0) += 1.0);
    let lp = sizes.len() as f64 * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + z.len() as f64)
        + sizes.values().map(|&c| ln_gamma(c)).sum::<f64>();
    lp.exp()
}

fn canonical(z: &[TopicId]) -> Vec<TopicId> {
    let mut ids: BTreeMap<TopicId, TopicId> = BTreeMap::new();
    z.iter()
        .map(|t| {
            let next = ids.len() as TopicId;
            *ids.entry(*t).or_insert(next)
        })
        .collect()
}

fn recovery_configs() -> Check {
    let mut count = 0;
    for n in 1..=6 {
        for alpha in [0.3, 1.0, 2.5] {
            let mut total = 0.0;
            for z in seatings(n) {
                let want = ewens(&z, alpha);
                let got = crp_seating_log_prob(&z, alpha).exp();
                ensure!(
                    (got - want).abs() <= 1e-10,
                    "seating {z:?} alpha {alpha}: {got} vs {want}"
                );
                total += got;
                count += 1;
            }
            ensure!(
                (total - 1.0).abs() <= 1e-10,
                "n={n} alpha {alpha}: seatings sum to {total}"
            );
        }
    }

    let draws = 4000;
    let alpha = 1.0;
    let mut freq: BTreeMap<Vec<TopicId>, f64> = BTreeMap::new();
    for seed in 0..draws {
        let cfg = GenerativeConfig {
            sentences: (1, 1),
            tokens_per_sentence: (3, 3),
            vocab_size: 4,
            alpha,
            seed,
            ..GenerativeConfig::for_mode(GenerativeMode::Dpmm)
        };
        let s = sample_gbm(&cfg).map_err(|e| e.to_string())?;
        *freq
            .entry(canonical(&s.truth.transcripts[0].z1))
            .or_insert(0.0) += 1.0 / draws as f64;
    }
    let tv = 0.5
        * seatings(3)
            .iter()
            .map(|z| (freq.get(z).copied().unwrap_or(0.0) - ewens(z, alpha)).abs())
            .sum::<f64>();
    ensure!(
        tv <= 0.05,
        "DP-MM seating frequencies off by total variation {tv:.4}"
    );

    let mut shared_clusters = 0;
    for seed in 0..100 {
        let s = sample_gbm(&GenerativeConfig {
            seed,
            ..GenerativeConfig::for_mode(GenerativeMode::NdpMask)
        })
        .map_err(|e| e.to_string())?;
        let mut owner: BTreeMap<TopicId, usize> = BTreeMap::new();
        for ts in &s.truth.transcripts {
            for &t in &ts.z1 {
                let o = *owner.entry(t).or_insert(ts.z2[0]);
                ensure!(
                    o == ts.z2[0],
                    "seed {seed}: topic {t} used by clusters {o} and {}",
                    ts.z2[0]
                );
            }
        }
        let clusters: std::collections::BTreeSet<usize> =
            s.truth.transcripts.iter().map(|t| t.z2[0]).collect();
        shared_clusters += usize::from(clusters.len() > 1);
    }
    ensure!(
        shared_clusters > 0,
        "no seed produced more than one cluster"
    );
    Ok(format!(
        "{count} seatings exact, DP-MM draws TV {tv:.4}, NDP disjoint over 100 seeds"
    ))
}

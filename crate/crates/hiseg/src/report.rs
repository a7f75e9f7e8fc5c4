use std::fmt::Write;

use hiseg_core::eval::{Scores, SegmentationReport};
use serde::{Deserialize, Serialize};

/// Scores of the hierarchical sampler and the Markov baseline on one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    /// Boundaries in every input file are 0-based.
    pub index_base: u8,
    pub gi_bgs: SegmentationReport,
    pub baseline: SegmentationReport,
}

fn row(out: &mut String, label: &str, s: &Scores, pk1: f64) {
    writeln!(
        out,
        "{label:<16} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
        s.pr1, s.rc1, s.s1, s.pr2, s.rc2, s.s2, pk1
    )
    .unwrap();
}

fn header(out: &mut String, first: &str) {
    writeln!(
        out,
        "{first:<16} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "PR1", "RC1", "S1", "PR2", "RC2", "S2", "Pk1"
    )
    .unwrap();
}

/// Per-transcript rows followed by the mean.
pub fn render_segmentation(r: &SegmentationReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "thresholds: level1={} level2={} (tokens)",
        r.thresholds.level1, r.thresholds.level2
    )
    .unwrap();
    header(&mut out, "transcript");
    for t in &r.transcripts {
        row(&mut out, &t.id, &t.scores, t.pk1);
    }
    row(&mut out, "mean", &r.mean, r.mean_pk1);
    out
}

pub fn render_pipeline(r: &PipelineReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "thresholds: level1={} level2={} (tokens); indices are 0-based",
        r.gi_bgs.thresholds.level1, r.gi_bgs.thresholds.level2
    )
    .unwrap();
    header(&mut out, "method");
    row(&mut out, "gi-bgs", &r.gi_bgs.mean, r.gi_bgs.mean_pk1);
    row(
        &mut out,
        "markov-baseline",
        &r.baseline.mean,
        r.baseline.mean_pk1,
    );
    out
}

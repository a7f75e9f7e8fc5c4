//! Markov-only level-1 baseline: the same collapsed sticky story process and
//! block sampler as GI-BGS, but with the story mask off (a story may recur
//! after it is left) and a single segment per transcript, so neither the
//! once-per-transcript constraint nor the category structure is used.

use alloc::vec::Vec;

use super::{check_inputs, InferError, InferenceParams, Sampler};
use crate::corpus::{change_positions, GroupedCorpus};
use crate::generative::SizeConcentration;
use crate::rng::streams;
use crate::topics::TopicMatrix;

/// Level-1 changepoints (token indices) per transcript after
/// `max(iterations, 1)` sweeps.
pub fn baseline_markov(
    corpus: &GroupedCorpus,
    topics: &TopicMatrix,
    params: &InferenceParams,
) -> Result<Vec<Vec<usize>>, InferError> {
    let p = InferenceParams {
        k: 1,
        gamma: SizeConcentration::Symmetric(1.0),
        burn_in: 0,
        iterations: params.iterations.max(1),
        ..params.clone()
    };
    check_inputs(corpus, Some(topics), &p, false)?;
    let mut init = topics.clone();
    init.category.iter_mut().for_each(|c| *c = None);
    let mut sampler = Sampler::build(corpus, Some(&init), &p, false, streams::BASELINE)?;
    for _ in 0..p.iterations {
        sampler.sweep()?;
        if p.update_phi {
            sampler.update_phi();
        }
    }
    Ok(sampler
        .states
        .iter()
        .map(|a| change_positions(&a.z1))
        .collect())
}

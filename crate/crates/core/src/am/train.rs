use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::am::align::{expand_transcript, forced_align, viterbi_linear};
use crate::am::hmm::{training_fingerprint, AcousticModel, HmmState, LabelSource};
use crate::am::LanguageModel;
use crate::corpus::{Lexicon, Utterance, WordId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub em_iterations: usize,
    pub emission_add: f64,
    pub transition_add: f64,
    /// Fraction of the seed set held out for model selection.
    pub dev_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            em_iterations: 10,
            emission_add: 0.5,
            transition_add: 0.5,
            dev_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.em_iterations == 0 {
            return Err(Error::config("train.em_iterations", "must be at least 1"));
        }
        if !(self.emission_add > 0.0 && self.emission_add.is_finite()) {
            return Err(Error::config("train.emission_add", "must be positive"));
        }
        if !(self.transition_add > 0.0 && self.transition_add.is_finite()) {
            return Err(Error::config("train.transition_add", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(Error::config("train.dev_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One training pair: an utterance, the transcript to train on, and where
/// that transcript came from.
#[derive(Debug, Clone)]
pub struct Labeled<'a> {
    pub utterance: &'a Utterance,
    pub transcript: Vec<WordId>,
    pub source: LabelSource,
}

impl<'a> Labeled<'a> {
    pub fn ground_truth(utterance: &'a Utterance) -> Result<Self> {
        let transcript = utterance.reference.clone().ok_or_else(|| Error::Data {
            utterance: utterance.id.clone(),
            reason: "no reference transcript".into(),
        })?;
        Ok(Self {
            utterance,
            transcript,
            source: LabelSource::GroundTruth,
        })
    }
}

#[derive(Default)]
struct Counts {
    emission: Vec<u64>,
    stay: Vec<u64>,
    advance: Vec<u64>,
}

impl Counts {
    fn new(n_states: usize, alphabet: usize) -> Self {
        Self {
            emission: vec![0; n_states * alphabet],
            stay: vec![0; n_states],
            advance: vec![0; n_states],
        }
    }

    fn add_path(&mut self, alphabet: usize, frames: &[crate::corpus::Symbol], seq: &[usize], positions: &[usize]) {
        for (t, &j) in positions.iter().enumerate() {
            let s = seq[j];
            self.emission[s * alphabet + usize::from(frames[t])] += 1;
            match positions.get(t + 1) {
                Some(&next) if next == j => self.stay[s] += 1,
                _ => self.advance[s] += 1,
            }
        }
    }

    fn estimate(&self, template: &AcousticModel, cfg: &TrainConfig) -> Vec<HmmState> {
        let a = template.alphabet_size();
        (0..template.states().len())
            .map(|s| {
                let row = &self.emission[s * a..(s + 1) * a];
                let total: u64 = row.iter().sum();
                let denom = total as f64 + cfg.emission_add * a as f64;
                let emission = row.iter().map(|&c| (c as f64 + cfg.emission_add) / denom).collect();
                let tdenom = (self.stay[s] + self.advance[s]) as f64 + 2.0 * cfg.transition_add;
                HmmState {
                    self_loop: (self.stay[s] as f64 + cfg.transition_add) / tdenom,
                    advance: (self.advance[s] as f64 + cfg.transition_add) / tdenom,
                    emission,
                }
            })
            .collect()
    }
}

/// Equal-length segmentation of `t_len` frames over `m` states.
fn uniform_positions(t_len: usize, m: usize) -> Vec<usize> {
    (0..t_len).map(|t| t * m / t_len).collect()
}

/// Flat-start Viterbi-EM on a labeled set.
///
/// The set is processed in ascending utterance-id order, so the result does
/// not depend on the order in which the caller collected it. When `init` is
/// untrained the first alignment is an equal-length segmentation; otherwise
/// it is the Viterbi alignment under `init`.
pub fn train_supervised(
    labeled: &[Labeled<'_>],
    lexicon: &Lexicon,
    cfg: &TrainConfig,
    init: &AcousticModel,
) -> Result<AcousticModel> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let mut items: Vec<&Labeled<'_>> = labeled.iter().collect();
    items.sort_by(|a, b| a.utterance.id.cmp(&b.utterance.id));
    if let Some(w) = items.windows(2).find(|w| w[0].utterance.id == w[1].utterance.id) {
        return Err(Error::Data {
            utterance: w[0].utterance.id.clone(),
            reason: "appears twice in the training set".into(),
        });
    }

    let alphabet = init.alphabet_size();
    let seqs: Vec<Vec<usize>> = items
        .iter()
        .map(|l| {
            if let Some(s) = l.utterance.frames.iter().find(|&&s| usize::from(s) >= alphabet) {
                return Err(Error::Data {
                    utterance: l.utterance.id.clone(),
                    reason: format!("symbol {s} outside the model alphabet"),
                });
            }
            let seq = expand_transcript(init, lexicon, &l.utterance.id, &l.transcript)?;
            if l.utterance.frames.len() < seq.len() {
                return Err(Error::Alignment {
                    utterance: l.utterance.id.clone(),
                    reason: format!(
                        "{} frames cannot cover the {} states of the transcript",
                        l.utterance.frames.len(),
                        seq.len()
                    ),
                });
            }
            Ok(seq)
        })
        .collect::<Result<_>>()?;

    let align_all = |model: &AcousticModel| -> (Vec<Vec<usize>>, f64) {
        let results: Vec<(Vec<usize>, f64)> = items
            .par_iter()
            .zip(seqs.par_iter())
            .map(|(l, seq)| viterbi_linear(model, &l.utterance.frames, seq).expect("length checked above"))
            .collect();
        let total = results.iter().map(|r| r.1).sum();
        (results.into_iter().map(|r| r.0).collect(), total)
    };

    let mut positions: Vec<Vec<usize>> = if init.is_trained() {
        align_all(init).0
    } else {
        items
            .iter()
            .zip(&seqs)
            .map(|(l, seq)| uniform_positions(l.utterance.frames.len(), seq.len()))
            .collect()
    };

    let fingerprint = training_fingerprint(items.iter().map(|l| (l.utterance.id.as_str(), &l.source)));
    let mut trace = Vec::with_capacity(cfg.em_iterations);
    let mut model = init.clone();
    for _ in 0..cfg.em_iterations {
        let mut counts = Counts::new(init.states().len(), alphabet);
        for ((l, seq), pos) in items.iter().zip(&seqs).zip(&positions) {
            counts.add_path(alphabet, &l.utterance.frames, seq, pos);
        }
        model = AcousticModel::from_states(
            init.num_phones(),
            init.states_per_phone(),
            alphabet,
            counts.estimate(init, cfg),
            fingerprint.clone(),
        )?;
        let (next, loglik) = align_all(&model);
        positions = next;
        trace.push(loglik);
    }
    model.em_iterations_run = cfg.em_iterations;
    model.em_trace = trace;
    log::debug!(
        "trained {} on {} utterances, final joint loglik {:.3}",
        model.id(),
        items.len(),
        model.em_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(model)
}

/// Sum of forced-alignment joint log-likelihoods over a labeled set.
pub fn corpus_loglik(am: &AcousticModel, lm: Option<&LanguageModel>, labeled: &[Labeled<'_>], lexicon: &Lexicon) -> Result<f64> {
    let mut items: Vec<&Labeled<'_>> = labeled.iter().collect();
    items.sort_by(|a, b| a.utterance.id.cmp(&b.utterance.id));
    let scores = items
        .par_iter()
        .map(|l| forced_align(am, lm, l.utterance, &l.transcript, lexicon).map(|a| a.log_likelihood))
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum())
}

/// The distinct label sources of a training set, for provenance records.
pub fn label_sources(labeled: &[Labeled<'_>]) -> BTreeSet<LabelSource> {
    labeled.iter().map(|l| l.source.clone()).collect()
}

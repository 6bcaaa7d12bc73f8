use std::cmp::Ordering;

use crate::corpus::WordId;
use crate::decoder::Hypothesis;
use crate::error::{Error, Result};

/// For every word of `reference`, the word of `hyp` aligned to it (or `None`
/// when deleted). Unit-cost Levenshtein; on ties the backtrace prefers
/// substitution/match, then insertion, then deletion.
pub(crate) fn align_to_reference(reference: &[WordId], hyp: &[WordId]) -> Vec<Option<WordId>> {
    let (n, m) = (reference.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            let ins = d[i * w + j - 1] + 1;
            let del = d[(i - 1) * w + j] + 1;
            d[i * w + j] = sub.min(ins).min(del);
        }
    }
    let mut slots = vec![None; n];
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hyp[j - 1]) {
            slots[i - 1] = Some(hyp[j - 1]);
            i -= 1;
            j -= 1;
        } else if j > 0 && here == d[i * w + j - 1] + 1 {
            j -= 1;
        } else {
            i -= 1;
        }
    }
    slots
}

fn canonical_order(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.words.cmp(&b.words))
}

/// Per-slot posteriors of the best hypothesis in an N-best list.
///
/// Hypothesis weights are `exp(score / acoustic_scale)`, normalized over the
/// list. Each hypothesis is aligned to the best one; a slot's posterior is
/// the total weight of hypotheses whose aligned word equals the best word.
/// The result does not depend on the order of `nbest`.
pub fn word_posteriors(nbest: &[Hypothesis], acoustic_scale: f64) -> Result<Vec<f64>> {
    if nbest.is_empty() {
        return Err(Error::Contract("word posteriors need a nonempty N-best list".into()));
    }
    if !(acoustic_scale > 0.0) {
        return Err(Error::Contract("acoustic scale must be positive".into()));
    }
    let mut sorted: Vec<&Hypothesis> = nbest.iter().collect();
    sorted.sort_by(|a, b| canonical_order(a, b));
    let best = sorted[0];
    if !best.score.is_finite() {
        return Err(Error::Contract("best hypothesis has a non-finite score".into()));
    }

    let raw: Vec<f64> = sorted
        .iter()
        .map(|h| ((h.score - best.score) / acoustic_scale).exp())
        .collect();
    let total: f64 = raw.iter().sum();

    let mut posteriors = vec![0.0; best.words.len()];
    for (h, r) in sorted.iter().zip(&raw) {
        let weight = r / total;
        let aligned = align_to_reference(&best.words, &h.words);
        for ((p, a), &b) in posteriors.iter_mut().zip(&aligned).zip(&best.words) {
            if *a == Some(b) {
                *p += weight;
            }
        }
    }
    for p in &mut posteriors {
        *p = p.min(1.0);
    }
    Ok(posteriors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfidenceAggregation {
    #[default]
    Mean,
    Min,
    GeometricMean,
}

/// Arithmetic mean of the slot posteriors; 0 for an empty hypothesis.
pub fn utterance_confidence(slot_posteriors: &[f64]) -> Result<f64> {
    aggregate_confidence(slot_posteriors, ConfidenceAggregation::Mean)
}

pub fn aggregate_confidence(slot_posteriors: &[f64], how: ConfidenceAggregation) -> Result<f64> {
    if let Some(p) = slot_posteriors.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Contract(format!("posterior {p} outside [0, 1]")));
    }
    if slot_posteriors.is_empty() {
        return Ok(0.0);
    }
    let n = slot_posteriors.len() as f64;
    Ok(match how {
        ConfidenceAggregation::Mean => slot_posteriors.iter().sum::<f64>() / n,
        ConfidenceAggregation::Min => slot_posteriors.iter().copied().fold(1.0, f64::min),
        ConfidenceAggregation::GeometricMean => (slot_posteriors.iter().map(|p| p.ln()).sum::<f64>() / n).exp(),
    })
}

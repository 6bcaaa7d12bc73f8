use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::error::{Error, Result};

/// Add-k smoothed word n-gram model over a closed vocabulary.
///
/// Outcomes are the `V` words plus a sentence-end symbol (index `V`).
/// Context slots use index `V` for the sentence-start padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageModel {
    pub order: usize,
    pub add_k: f64,
    pub vocab_size: usize,
    /// `probs[ctx * (V + 1) + outcome]`
    probs: Vec<f64>,
    #[serde(skip)]
    log_probs: Vec<f64>,
}

impl LanguageModel {
    pub fn from_probs(order: usize, add_k: f64, vocab_size: usize, probs: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::config("lm.order", "must be 1, 2 or 3"));
        }
        let width = vocab_size + 1;
        if probs.len() != width.pow(order as u32 - 1) * width {
            return Err(Error::Format("language model table has the wrong size".into()));
        }
        for row in probs.chunks(width) {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::Format("language model row is not a positive distribution".into()));
            }
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(Self {
            order,
            add_k,
            vocab_size,
            probs,
            log_probs,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn end_symbol(&self) -> usize {
        self.vocab_size
    }

    pub fn num_contexts(&self) -> usize {
        (self.vocab_size + 1).pow(self.order as u32 - 1)
    }

    /// Context index from the two most recent words (`None` = sentence start).
    #[inline]
    pub fn context(&self, prev2: Option<WordId>, prev1: Option<WordId>) -> usize {
        let slot = |w: Option<WordId>| w.map_or(self.vocab_size, |w| w as usize);
        match self.order {
            1 => 0,
            2 => slot(prev1),
            _ => slot(prev2) * (self.vocab_size + 1) + slot(prev1),
        }
    }

    #[inline]
    pub fn log_prob_in(&self, context: usize, outcome: usize) -> f64 {
        self.log_probs[context * (self.vocab_size + 1) + outcome]
    }

    pub fn prob_in(&self, context: usize, outcome: usize) -> f64 {
        self.probs[context * (self.vocab_size + 1) + outcome]
    }

    /// `log p(next | history)`; `next = None` scores the sentence end.
    pub fn log_prob(&self, history: &[WordId], next: Option<WordId>) -> f64 {
        let n = history.len();
        let prev1 = n.checked_sub(1).map(|i| history[i]);
        let prev2 = n.checked_sub(2).map(|i| history[i]);
        let outcome = next.map_or(self.vocab_size, |w| w as usize);
        self.log_prob_in(self.context(prev2, prev1), outcome)
    }

    /// Log probability of a full sentence including its end symbol.
    pub fn sentence_log_prob(&self, words: &[WordId]) -> f64 {
        (0..=words.len())
            .map(|i| self.log_prob(&words[..i], words.get(i).copied()))
            .sum()
    }
}

pub fn estimate_lm<'a>(
    transcripts: impl IntoIterator<Item = &'a [WordId]>,
    vocab_size: usize,
    order: usize,
    add_k: f64,
) -> Result<LanguageModel> {
    if !(1..=3).contains(&order) {
        return Err(Error::config("lm.order", "must be 1, 2 or 3"));
    }
    if !(add_k > 0.0 && add_k.is_finite()) {
        return Err(Error::config("lm.add_k", "must be positive"));
    }
    if vocab_size == 0 {
        return Err(Error::config("vocab_size", "must be at least 1"));
    }
    let width = vocab_size + 1;
    let contexts = width.pow(order as u32 - 1);
    let mut counts = vec![0u64; contexts * width];
    let mut totals = vec![0u64; contexts];

    // a throwaway model only to reuse the context indexing
    let indexer = LanguageModel {
        order,
        add_k,
        vocab_size,
        probs: Vec::new(),
        log_probs: Vec::new(),
    };
    let mut sentences = 0usize;
    for words in transcripts {
        sentences += 1;
        for i in 0..=words.len() {
            let prev1 = i.checked_sub(1).map(|j| words[j]);
            let prev2 = i.checked_sub(2).map(|j| words[j]);
            let outcome = match words.get(i) {
                Some(&w) if (w as usize) < vocab_size => w as usize,
                Some(&w) => {
                    return Err(Error::Training(format!("transcript word {w} outside vocabulary")))
                }
                None => vocab_size,
            };
            let ctx = indexer.context(prev2, prev1);
            counts[ctx * width + outcome] += 1;
            totals[ctx] += 1;
        }
    }
    if sentences == 0 {
        return Err(Error::Training("no transcripts to estimate a language model from".into()));
    }

    let mut probs = vec![0.0; contexts * width];
    for ctx in 0..contexts {
        let denom = totals[ctx] as f64 + add_k * width as f64;
        for o in 0..width {
            probs[ctx * width + o] = (counts[ctx * width + o] as f64 + add_k) / denom;
        }
    }
    LanguageModel::from_probs(order, add_k, vocab_size, probs)
}

//! Synthetic closed-vocabulary corpus: generation, splitting into
//! seed / unlabeled / test sets, and the simulated annotator.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, STREAM_CORPUS, STREAM_DEV, STREAM_SPLIT};

pub type WordId = u32;
pub type PhoneId = u16;
pub type Symbol = u16;

/// Longest dwell, in frames, of a generating state.
pub const MAX_STATE_DWELL: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub num_phones: usize,
    pub states_per_phone: usize,
    pub alphabet_size: usize,
    pub vocab_size: usize,
    pub word_phone_len: IntRange,
    pub sentence_len: IntRange,
    /// Symmetric Dirichlet concentration of each true emission distribution.
    pub emission_concentration: f64,
    /// Mixing weight of the uniform distribution into every true emission.
    pub noise_rate: f64,
    pub mean_state_dwell: f64,
    pub num_utterances: usize,
    /// Set from the experiment's master seed; not part of the config file.
    #[serde(skip)]
    pub master_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            num_phones: 16,
            states_per_phone: 3,
            alphabet_size: 32,
            vocab_size: 60,
            word_phone_len: IntRange::new(2, 5),
            sentence_len: IntRange::new(3, 12),
            emission_concentration: 0.2,
            noise_rate: 0.3,
            mean_state_dwell: 2.0,
            num_utterances: 2000,
            master_seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("num_phones", self.num_phones),
            ("states_per_phone", self.states_per_phone),
            ("alphabet_size", self.alphabet_size),
            ("vocab_size", self.vocab_size),
            ("num_utterances", self.num_utterances),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(Error::config(field, "must be at least 1"));
            }
        }
        if self.num_phones > usize::from(PhoneId::MAX) {
            return Err(Error::config("num_phones", "too large"));
        }
        if self.alphabet_size > usize::from(Symbol::MAX) {
            return Err(Error::config("alphabet_size", "too large"));
        }
        for (field, r) in [
            ("word_phone_len", self.word_phone_len),
            ("sentence_len", self.sentence_len),
        ] {
            if r.min == 0 {
                return Err(Error::config(field, "lower bound must be at least 1"));
            }
            if r.min > r.max {
                return Err(Error::config(field, "range is empty (min > max)"));
            }
        }
        if !(self.emission_concentration > 0.0 && self.emission_concentration.is_finite()) {
            return Err(Error::config("emission_concentration", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::config("noise_rate", "must lie in [0, 1]"));
        }
        if !(self.mean_state_dwell >= 1.0 && self.mean_state_dwell.is_finite()) {
            return Err(Error::config("mean_state_dwell", "must be at least 1 frame"));
        }
        let distinct_prons: f64 = (self.word_phone_len.min..=self.word_phone_len.max)
            .map(|len| (self.num_phones as f64).powi(len as i32))
            .sum();
        if distinct_prons < self.vocab_size as f64 {
            return Err(Error::config(
                "vocab_size",
                "exceeds the number of distinct pronunciations",
            ));
        }
        Ok(())
    }

    /// Frame-count bounds implied by sentence length, word length, topology
    /// and the dwell cap.
    pub fn frame_bounds(&self) -> (usize, usize) {
        let lo = self.sentence_len.min * self.word_phone_len.min * self.states_per_phone;
        let hi = self.sentence_len.max
            * self.word_phone_len.max
            * self.states_per_phone
            * MAX_STATE_DWELL;
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub num_phones: usize,
    /// Word spellings, indexed by word id.
    pub words: Vec<String>,
    /// Pronunciations, indexed by word id.
    pub pronunciations: Vec<Vec<PhoneId>>,
}

impl Lexicon {
    pub fn new(num_phones: usize, words: Vec<String>, pronunciations: Vec<Vec<PhoneId>>) -> Result<Self> {
        let lex = Self {
            num_phones,
            words,
            pronunciations,
        };
        lex.validate()?;
        Ok(lex)
    }

    pub fn validate(&self) -> Result<()> {
        if self.words.len() != self.pronunciations.len() {
            return Err(Error::Format("lexicon word and pronunciation counts differ".into()));
        }
        if self.words.is_empty() {
            return Err(Error::Format("empty lexicon".into()));
        }
        for (w, pron) in self.words.iter().zip(&self.pronunciations) {
            if pron.is_empty() {
                return Err(Error::Format(format!("word {w} has an empty pronunciation")));
            }
            if let Some(p) = pron.iter().find(|&&p| usize::from(p) >= self.num_phones) {
                return Err(Error::Format(format!("word {w} uses unknown phone {p}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn pronunciation(&self, w: WordId) -> &[PhoneId] {
        &self.pronunciations[w as usize]
    }

    pub fn word_id(&self, spelling: &str) -> Option<WordId> {
        self.words.iter().position(|w| w == spelling).map(|i| i as WordId)
    }

    pub fn contains(&self, w: WordId) -> bool {
        (w as usize) < self.words.len()
    }

    pub fn spell(&self, words: &[WordId]) -> String {
        words
            .iter()
            .map(|&w| self.words[w as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub id: String,
    pub frames: Vec<Symbol>,
    pub reference: Option<Vec<WordId>>,
}

impl Utterance {
    pub fn validate(&self, alphabet_size: usize, vocab_size: usize) -> Result<()> {
        let bad = |reason: String| Error::Data {
            utterance: self.id.clone(),
            reason,
        };
        if self.frames.is_empty() {
            return Err(bad("no frames".into()));
        }
        if let Some(s) = self.frames.iter().find(|&&s| usize::from(s) >= alphabet_size) {
            return Err(bad(format!("symbol {s} outside alphabet of {alphabet_size}")));
        }
        if let Some(r) = &self.reference {
            if let Some(w) = r.iter().find(|&&w| w as usize >= vocab_size) {
                return Err(bad(format!("word id {w} outside vocabulary")));
            }
        }
        Ok(())
    }
}

pub fn utterance_id(index: usize) -> String {
    format!("utt{index:06}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub config: GeneratorConfig,
    pub utterances: Vec<Utterance>,
}

impl Corpus {
    pub fn alphabet_size(&self) -> usize {
        self.config.alphabet_size
    }
}

/// The generating distributions. Kept for diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModels {
    /// Indexed by `phone * states_per_phone + state`.
    pub emissions: Vec<Vec<f64>>,
    pub bigram: Vec<Vec<f64>>,
}

fn dirichlet(rng: &mut impl Rng, alpha: f64, dim: usize) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let total: f64 = v.iter().sum();
        // all-zero draws happen for tiny alpha; redraw
        if total > 0.0 && total.is_finite() {
            v.iter_mut().for_each(|x| *x /= total);
            return v;
        }
    }
}

fn categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn sample_corpus(cfg: &GeneratorConfig) -> Result<(Corpus, Lexicon, TrueModels)> {
    cfg.validate()?;
    let mut rng = rng::substream(cfg.master_seed, STREAM_CORPUS);

    let lexicon = sample_lexicon(cfg, &mut rng)?;

    let uniform = 1.0 / cfg.alphabet_size as f64;
    let emissions: Vec<Vec<f64>> = (0..cfg.num_phones * cfg.states_per_phone)
        .map(|_| {
            dirichlet(&mut rng, cfg.emission_concentration, cfg.alphabet_size)
                .into_iter()
                .map(|p| (1.0 - cfg.noise_rate) * p + cfg.noise_rate * uniform)
                .collect()
        })
        .collect();
    let bigram: Vec<Vec<f64>> = (0..cfg.vocab_size)
        .map(|_| dirichlet(&mut rng, 0.5, cfg.vocab_size))
        .collect();

    let dwell = Geometric::new(1.0 / cfg.mean_state_dwell).expect("dwell validated");
    let mut utterances = Vec::with_capacity(cfg.num_utterances);
    for i in 0..cfg.num_utterances {
        let len = cfg.sentence_len.sample(&mut rng);
        let mut words = Vec::with_capacity(len);
        let mut prev = rng.random_range(0..cfg.vocab_size);
        words.push(prev as WordId);
        for _ in 1..len {
            prev = categorical(&mut rng, &bigram[prev]);
            words.push(prev as WordId);
        }

        let mut frames = Vec::new();
        for &w in &words {
            for &phone in lexicon.pronunciation(w) {
                for state in 0..cfg.states_per_phone {
                    let row = &emissions[usize::from(phone) * cfg.states_per_phone + state];
                    let d = (1 + dwell.sample(&mut rng) as usize).min(MAX_STATE_DWELL);
                    for _ in 0..d {
                        frames.push(categorical(&mut rng, row) as Symbol);
                    }
                }
            }
        }
        utterances.push(Utterance {
            id: utterance_id(i),
            frames,
            reference: Some(words),
        });
    }

    let corpus = Corpus {
        config: cfg.clone(),
        utterances,
    };
    Ok((corpus, lexicon, TrueModels { emissions, bigram }))
}

fn sample_lexicon(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Lexicon> {
    let mut seen = HashSet::new();
    let mut prons = Vec::with_capacity(cfg.vocab_size);
    while prons.len() < cfg.vocab_size {
        let len = cfg.word_phone_len.sample(rng);
        let pron: Vec<PhoneId> = (0..len)
            .map(|_| rng.random_range(0..cfg.num_phones) as PhoneId)
            .collect();
        if seen.insert(pron.clone()) {
            prons.push(pron);
        }
    }
    let width = cfg.vocab_size.saturating_sub(1).to_string().len().max(2);
    let words = (0..cfg.vocab_size).map(|i| format!("w{i:0width$}")).collect();
    Lexicon::new(cfg.num_phones, words, prons)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub seed: f64,
    pub unlabeled: f64,
    pub test: f64,
}

impl SplitRatios {
    pub const fn new(seed: f64, unlabeled: f64, test: f64) -> Self {
        Self {
            seed,
            unlabeled,
            test,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.seed, self.unlabeled, self.test]
            .iter()
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(Error::config("ratios", "ratios must be nonnegative"));
        }
        if (self.seed + self.unlabeled + self.test - 100.0).abs() > 1e-9 {
            return Err(Error::config("ratios", "ratios must sum to 100"));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self::new(25.0, 65.0, 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplits {
    /// Labeled seed utterances, ascending id.
    pub d_seed: Vec<Utterance>,
    /// Unlabeled pool, ascending id, references stripped.
    pub d_u: Vec<Utterance>,
    /// Labeled held-out test utterances, ascending id.
    pub test: Vec<Utterance>,
    pub ratios: SplitRatios,
}

impl DataSplits {
    pub fn total(&self) -> usize {
        self.d_seed.len() + self.d_u.len() + self.test.len()
    }

    /// Size of the training universe `D_seed ∪ D_U`.
    pub fn training_universe(&self) -> usize {
        self.d_seed.len() + self.d_u.len()
    }

    /// Deterministically carves a development subset out of `d_seed`.
    /// Returns `(train, dev)`, both in ascending id order.
    pub fn dev_partition(&self, dev_fraction: f64, master_seed: u64) -> (Vec<&Utterance>, Vec<&Utterance>) {
        let n_dev = floor_share(self.d_seed.len(), dev_fraction * 100.0);
        let mut order: Vec<usize> = (0..self.d_seed.len()).collect();
        order.shuffle(&mut rng::substream(master_seed, STREAM_DEV));
        let mut is_dev = vec![false; self.d_seed.len()];
        for &i in &order[..n_dev] {
            is_dev[i] = true;
        }
        let (dev, train): (Vec<_>, Vec<_>) = self
            .d_seed
            .iter()
            .zip(is_dev)
            .partition(|(_, d)| *d);
        (
            train.into_iter().map(|(u, _)| u).collect(),
            dev.into_iter().map(|(u, _)| u).collect(),
        )
    }
}

fn floor_share(n: usize, percent: f64) -> usize {
    // the epsilon absorbs representation error in e.g. 1000 * 2.5 / 100
    ((n as f64 * percent / 100.0) + 1e-9).floor() as usize
}

/// Holds the hidden references of the unlabeled pool and meters access.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Oracle {
    references: BTreeMap<String, Vec<WordId>>,
    calls: usize,
}

impl Oracle {
    pub fn new(references: BTreeMap<String, Vec<WordId>>) -> Self {
        Self {
            references,
            calls: 0,
        }
    }

    /// Simulated manual labeling; every call is charged to the budget.
    pub fn label(&mut self, utterance_id: &str) -> Result<Vec<WordId>> {
        let r = self
            .references
            .get(utterance_id)
            .ok_or_else(|| Error::Lookup(utterance_id.to_string()))?
            .clone();
        self.calls += 1;
        Ok(r)
    }

    /// Unmetered access, for scoring and reference computations only.
    pub fn reference(&self, utterance_id: &str) -> Option<&[WordId]> {
        self.references.get(utterance_id).map(Vec::as_slice)
    }

    pub fn budget_used(&self) -> usize {
        self.calls
    }

    pub fn len(&self) -> usize {
        self.references.len()
    }

    pub fn is_empty(&self) -> bool {
        self.references.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.references.keys().map(String::as_str)
    }

    pub fn references(&self) -> &BTreeMap<String, Vec<WordId>> {
        &self.references
    }
}

pub fn split_corpus(corpus: &Corpus, ratios: SplitRatios, seed: u64) -> Result<(DataSplits, Oracle)> {
    ratios.validate()?;
    let n = corpus.utterances.len();
    let n_seed = floor_share(n, ratios.seed);
    let n_test = floor_share(n, ratios.test);
    if n_seed + n_test > n {
        return Err(Error::config("ratios", "split sizes exceed corpus size"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::substream(seed, STREAM_SPLIT));
    let (seed_idx, rest) = order.split_at(n_seed);
    let (test_idx, u_idx) = rest.split_at(n_test);

    let take = |idx: &[usize]| {
        let mut v: Vec<Utterance> = idx.iter().map(|&i| corpus.utterances[i].clone()).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    };
    let d_seed = take(seed_idx);
    let test = take(test_idx);
    let mut d_u = take(u_idx);

    let mut refs = BTreeMap::new();
    for u in &mut d_u {
        let r = u.reference.take().ok_or_else(|| Error::Data {
            utterance: u.id.clone(),
            reason: "pool utterance has no reference to hand to the oracle".into(),
        })?;
        refs.insert(u.id.clone(), r);
    }

    Ok((
        DataSplits {
            d_seed,
            d_u,
            test,
            ratios,
        },
        Oracle::new(refs),
    ))
}

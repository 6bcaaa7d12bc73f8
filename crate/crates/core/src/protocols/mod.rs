//! Self-training and active-learning procedures built on confidence bins.
//!
//! Every protocol retrains from a flat start on an accumulated set
//! `D_seed ∪ (selected pool utterances)`, measures WER on the held-out test
//! set, and reports a [`WerProfile`].

mod active;
mod bins;
mod ssl;

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::am::{estimate_lm, flat_start, train_supervised, AcousticModel, LabelSource, Labeled, LanguageModel, TrainConfig};
use crate::corpus::{DataSplits, GeneratorConfig, Lexicon, Oracle, Utterance, WordId};
use crate::decoder::{DecodeConfig, DecodedPool, Decoder};
use crate::error::{Error, Result};
use crate::eval::{corpus_wer, BinHistogram};

pub use active::{active_learning_budgets, run_active_learning, run_random_baseline, ActiveOutput};
pub use bins::{assign_bins, Bin, BinMember, BinSpec, Interval};
pub use ssl::{run_iterative, run_non_iterative, IterativeOutput, NonIterativeOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSelection {
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SslConfig {
    pub max_local_iters: usize,
    /// Stop a local loop once fewer than this fraction of the pool changes bins.
    pub local_saturation: f64,
    pub max_global_iters: usize,
    /// Stop global passes once the best selection-metric WER improves by less
    /// than this (absolute percent).
    pub global_saturation: f64,
    pub model_selection: ModelSelection,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            max_local_iters: 3,
            local_saturation: 0.02,
            max_global_iters: 3,
            global_saturation: 0.2,
            model_selection: ModelSelection::Dev,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_local_iters == 0 {
            return Err(Error::config("ssl.max_local_iters", "must be at least 1"));
        }
        if self.max_global_iters == 0 {
            return Err(Error::config("ssl.max_global_iters", "must be at least 1"));
        }
        if !(self.local_saturation > 0.0) {
            return Err(Error::config("ssl.local_saturation", "must be positive"));
        }
        if !(self.global_saturation > 0.0) {
            return Err(Error::config("ssl.global_saturation", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Batches are the bins of the seed-model decode, lowest confidence first.
    StaticBins,
    /// Before each batch the remaining pool is re-decoded with the latest model.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlConfig {
    pub selection_mode: SelectionMode,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            selection_mode: SelectionMode::Adaptive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub order: usize,
    pub add_k: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self { order: 2, add_k: 0.5 }
    }
}

/// Everything a protocol needs besides the data.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolConfig {
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub lm: LmConfig,
    pub bins: BinSpec,
    pub ssl: SslConfig,
    pub al: AlConfig,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.decode.validate()?;
        if !(1..=3).contains(&self.lm.order) {
            return Err(Error::config("lm.order", "must be 1, 2 or 3"));
        }
        if !(self.lm.add_k > 0.0) {
            return Err(Error::config("lm.add_k", "must be positive"));
        }
        self.bins.validate()?;
        self.ssl.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub stage_label: String,
    pub model_id: String,
    /// `(|D_seed| + selected pool utterances) / (|D_seed| + |D_U|)`
    pub train_fraction: f64,
    pub train_size: usize,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WerProfile {
    pub protocol: String,
    pub points: Vec<ProfilePoint>,
    pub seed_wer: f64,
    pub topline_wer: Option<f64>,
}

impl WerProfile {
    pub fn min_wer(&self) -> Option<f64> {
        self.points.iter().map(|p| p.wer).min_by(f64::total_cmp)
    }

    pub fn last(&self) -> Option<&ProfilePoint> {
        self.points.last()
    }
}

/// Provenance of one training set, for label-hygiene audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingAudit {
    pub stage_label: String,
    pub fingerprint: String,
    pub seed_labels: usize,
    pub pool_ground_truth: usize,
    pub pool_decoded: usize,
}

/// A labeled histogram: which protocol stage produced the bin assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageHistogram {
    pub protocol: String,
    pub stage: String,
    pub histogram: BinHistogram,
}

/// Shared state of one experiment: data, the fixed LM, held-out dev subset,
/// and cached anchor models.
pub struct ProtocolContext<'a> {
    pub splits: &'a DataSplits,
    pub lexicon: &'a Lexicon,
    pub cfg: ProtocolConfig,
    pub master_seed: u64,
    lm: LanguageModel,
    seed_train: Vec<&'a Utterance>,
    dev: Vec<&'a Utterance>,
    flat: AcousticModel,
    pool_index: HashMap<&'a str, usize>,
    seed_model: OnceLock<(AcousticModel, f64)>,
    topline_model: OnceLock<(AcousticModel, f64)>,
    seed_decode: OnceLock<DecodedPool>,
}

impl<'a> ProtocolContext<'a> {
    pub fn new(
        splits: &'a DataSplits,
        lexicon: &'a Lexicon,
        topology: &GeneratorConfig,
        cfg: ProtocolConfig,
        master_seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if splits.d_seed.is_empty() {
            return Err(Error::config("ratios", "the seed set is empty"));
        }
        if splits.test.is_empty() {
            return Err(Error::config("ratios", "the test set is empty"));
        }
        let (seed_train, dev) = splits.dev_partition(cfg.train.dev_fraction, master_seed);
        if seed_train.is_empty() {
            return Err(Error::config("train.dev_fraction", "leaves no seed utterances for training"));
        }
        if cfg.ssl.model_selection == ModelSelection::Dev && dev.is_empty() {
            return Err(Error::config("train.dev_fraction", "dev model selection needs a nonempty dev set"));
        }
        let refs: Vec<&[WordId]> = seed_train
            .iter()
            .map(|u| {
                u.reference.as_deref().ok_or_else(|| Error::Data {
                    utterance: u.id.clone(),
                    reason: "seed utterance without reference".into(),
                })
            })
            .collect::<Result<_>>()?;
        let lm = estimate_lm(refs, lexicon.len(), cfg.lm.order, cfg.lm.add_k)?;
        let flat = flat_start(topology.num_phones, topology.alphabet_size, topology.states_per_phone)?;
        let pool_index = splits.d_u.iter().enumerate().map(|(i, u)| (u.id.as_str(), i)).collect();
        Ok(Self {
            splits,
            lexicon,
            cfg,
            master_seed,
            lm,
            seed_train,
            dev,
            flat,
            pool_index,
            seed_model: OnceLock::new(),
            topline_model: OnceLock::new(),
            seed_decode: OnceLock::new(),
        })
    }

    pub fn lm(&self) -> &LanguageModel {
        &self.lm
    }

    pub fn dev_set(&self) -> &[&'a Utterance] {
        &self.dev
    }

    pub fn seed_train_set(&self) -> &[&'a Utterance] {
        &self.seed_train
    }

    fn pool_utterance(&self, id: &str) -> Result<&'a Utterance> {
        let splits: &'a DataSplits = self.splits;
        self.pool_index
            .get(id)
            .map(|&i| &splits.d_u[i])
            .ok_or_else(|| Error::Lookup(id.to_string()))
    }

    pub fn train_fraction(&self, pool_selected: usize) -> f64 {
        (self.splits.d_seed.len() + pool_selected) as f64 / self.splits.training_universe() as f64
    }

    /// Trains from a flat start on the seed training set plus `extra` pool
    /// labels `(utterance id, words, source)`.
    pub fn train_with(&self, extra: &[(String, Vec<WordId>, LabelSource)]) -> Result<AcousticModel> {
        let mut labeled: Vec<Labeled<'a>> = self
            .seed_train
            .iter()
            .map(|u| Labeled::ground_truth(*u))
            .collect::<Result<_>>()?;
        for (id, words, source) in extra {
            labeled.push(Labeled {
                utterance: self.pool_utterance(id)?,
                transcript: words.clone(),
                source: source.clone(),
            });
        }
        train_supervised(&labeled, self.lexicon, &self.cfg.train, &self.flat)
    }

    pub fn audit(&self, stage_label: &str, am: &AcousticModel, extra: &[(String, Vec<WordId>, LabelSource)]) -> TrainingAudit {
        let gt = extra.iter().filter(|e| e.2.is_ground_truth()).count();
        TrainingAudit {
            stage_label: stage_label.to_string(),
            fingerprint: am.fingerprint.clone(),
            seed_labels: self.seed_train.len(),
            pool_ground_truth: gt,
            pool_decoded: extra.len() - gt,
        }
    }

    pub fn decoder<'m>(&'m self, am: &'m AcousticModel) -> Result<Decoder<'m>> {
        Decoder::new(am, &self.lm, self.lexicon, &self.cfg.decode)
    }

    /// Decodes the listed pool utterances (ids in any order).
    pub fn decode_pool_ids<'i>(&self, am: &AcousticModel, ids: impl IntoIterator<Item = &'i str>) -> Result<DecodedPool> {
        let utts: Vec<Utterance> = ids
            .into_iter()
            .map(|id| self.pool_utterance(id).cloned())
            .collect::<Result<_>>()?;
        self.decoder(am)?.decode_pool(&utts)
    }

    pub fn decode_full_pool(&self, am: &AcousticModel) -> Result<DecodedPool> {
        if self.splits.d_u.is_empty() {
            return Err(Error::Contract("the unlabeled pool is empty".into()));
        }
        self.decoder(am)?.decode_pool(&self.splits.d_u)
    }

    fn wer_on(&self, am: &AcousticModel, set: &[&Utterance]) -> Result<f64> {
        let one_best = self.cfg.decode.one_best();
        let decoder = Decoder::new(am, &self.lm, self.lexicon, &one_best)?;
        let owned: Vec<Utterance> = set.iter().map(|u| (*u).clone()).collect();
        let decoded = decoder.decode_pool(&owned)?;
        let pairs: Vec<(&[WordId], &[WordId])> = owned
            .iter()
            .map(|u| {
                let r = u.reference.as_deref().ok_or_else(|| Error::Evaluation(format!("{} has no reference", u.id)))?;
                Ok((r, decoded.entries[&u.id].best.words.as_slice()))
            })
            .collect::<Result<_>>()?;
        corpus_wer(pairs)
    }

    pub fn test_wer(&self, am: &AcousticModel) -> Result<f64> {
        let test: Vec<&Utterance> = self.splits.test.iter().collect();
        self.wer_on(am, &test)
    }

    pub fn dev_wer(&self, am: &AcousticModel) -> Result<f64> {
        self.wer_on(am, &self.dev)
    }

    pub fn selection_wer(&self, am: &AcousticModel) -> Result<f64> {
        match self.cfg.ssl.model_selection {
            ModelSelection::Dev => self.dev_wer(am),
            ModelSelection::Test => self.test_wer(am),
        }
    }

    /// `AM_seed` and its test WER.
    pub fn seed_model(&self) -> Result<&(AcousticModel, f64)> {
        if let Some(v) = self.seed_model.get() {
            return Ok(v);
        }
        let am = self.train_with(&[])?;
        let wer = self.test_wer(&am)?;
        Ok(self.seed_model.get_or_init(|| (am, wer)))
    }

    /// The decode of the whole pool by `AM_seed`.
    pub fn seed_decode(&self) -> Result<&DecodedPool> {
        if let Some(v) = self.seed_decode.get() {
            return Ok(v);
        }
        let pool = self.decode_full_pool(&self.seed_model()?.0)?;
        Ok(self.seed_decode.get_or_init(|| pool))
    }

    /// Model trained on the seed set plus the whole pool with true labels.
    pub fn topline_model(&self, oracle: &Oracle) -> Result<&(AcousticModel, f64)> {
        if let Some(v) = self.topline_model.get() {
            return Ok(v);
        }
        let extra = self.ground_truth_labels(oracle, self.splits.d_u.iter().map(|u| u.id.as_str()))?;
        let am = self.train_with(&extra)?;
        let wer = self.test_wer(&am)?;
        Ok(self.topline_model.get_or_init(|| (am, wer)))
    }

    fn ground_truth_labels<'i>(
        &self,
        oracle: &Oracle,
        ids: impl IntoIterator<Item = &'i str>,
    ) -> Result<Vec<(String, Vec<WordId>, LabelSource)>> {
        ids.into_iter()
            .map(|id| {
                let r = oracle.reference(id).ok_or_else(|| Error::Lookup(id.to_string()))?;
                Ok((id.to_string(), r.to_vec(), LabelSource::GroundTruth))
            })
            .collect()
    }

    pub fn seed_point(&self) -> Result<ProfilePoint> {
        let (am, wer) = self.seed_model()?;
        Ok(ProfilePoint {
            stage_label: "seed".into(),
            model_id: am.id(),
            train_fraction: self.train_fraction(0),
            train_size: self.seed_train.len(),
            wer: *wer,
        })
    }
}

pub fn run_seed_baseline(ctx: &ProtocolContext<'_>) -> Result<(AcousticModel, ProfilePoint)> {
    let point = ctx.seed_point()?;
    Ok((ctx.seed_model()?.0.clone(), point))
}

pub fn run_topline(ctx: &ProtocolContext<'_>, oracle: &Oracle) -> Result<(AcousticModel, ProfilePoint)> {
    if oracle.len() != ctx.splits.d_u.len() {
        return Err(Error::Contract("oracle does not cover the unlabeled pool".into()));
    }
    let (am, wer) = ctx.topline_model(oracle)?;
    Ok((
        am.clone(),
        ProfilePoint {
            stage_label: "topline".into(),
            model_id: am.id(),
            train_fraction: ctx.train_fraction(ctx.splits.d_u.len()),
            train_size: ctx.seed_train.len() + ctx.splits.d_u.len(),
            wer: *wer,
        },
    ))
}

/// References of the pool, for evaluation artifacts only.
pub(crate) fn pool_truth(oracle: &Oracle) -> BTreeMap<String, Vec<WordId>> {
    oracle.references().clone()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::corpus::{sample_corpus, split_corpus, IntRange, SplitRatios};

    pub struct Fixture {
        pub cfg: GeneratorConfig,
        pub lexicon: Lexicon,
        pub splits: DataSplits,
        pub oracle: Oracle,
    }

    /// A small, fast corpus for protocol unit tests.
    pub fn fixture(seed: u64, n: usize, ratios: SplitRatios) -> Fixture {
        let cfg = GeneratorConfig {
            num_phones: 6,
            vocab_size: 12,
            word_phone_len: IntRange::new(1, 3),
            sentence_len: IntRange::new(2, 5),
            alphabet_size: 12,
            num_utterances: n,
            master_seed: seed,
            ..GeneratorConfig::default()
        };
        let (corpus, lexicon, _) = sample_corpus(&cfg).unwrap();
        let (splits, oracle) = split_corpus(&corpus, ratios, seed).unwrap();
        Fixture {
            cfg,
            lexicon,
            splits,
            oracle,
        }
    }

    pub fn quick_config() -> ProtocolConfig {
        ProtocolConfig {
            train: TrainConfig {
                em_iterations: 4,
                dev_fraction: 0.2,
                ..TrainConfig::default()
            },
            decode: DecodeConfig {
                nbest: 4,
                ..DecodeConfig::default()
            },
            ..ProtocolConfig::default()
        }
    }
}

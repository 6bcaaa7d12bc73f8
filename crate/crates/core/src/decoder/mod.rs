//! Exact k-best decoding, N-best word posteriors and utterance confidence.

mod posterior;
mod search;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::am::{AcousticModel, LanguageModel};
use crate::corpus::{Lexicon, Utterance, WordId};
use crate::error::{Error, Result};

pub use posterior::{aggregate_confidence, utterance_confidence, word_posteriors, ConfidenceAggregation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub nbest: usize,
    /// Divides combined log scores before they are turned into posteriors.
    pub acoustic_scale: f64,
    pub exact_search: bool,
    /// Beam width in log units; only used when `exact_search` is off.
    pub beam: f64,
    pub confidence: ConfidenceAggregation,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            nbest: 10,
            acoustic_scale: 3.0,
            exact_search: true,
            beam: 60.0,
            confidence: ConfidenceAggregation::Mean,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nbest == 0 {
            return Err(Error::config("decode.nbest", "must be at least 1"));
        }
        if !(self.acoustic_scale > 0.0 && self.acoustic_scale.is_finite()) {
            return Err(Error::config("decode.acoustic_scale", "must be positive"));
        }
        if !self.exact_search && !(self.beam > 0.0) {
            return Err(Error::config("decode.beam", "must be positive"));
        }
        Ok(())
    }

    /// Stable short hash of the configuration, recorded as pool provenance.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    /// Same search, but only the single best hypothesis.
    pub fn one_best(&self) -> Self {
        Self {
            nbest: 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub words: Vec<WordId>,
    /// Acoustic log-likelihood plus LM log probability.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedUtterance {
    pub utterance_id: String,
    pub best: Hypothesis,
    pub nbest: Vec<Hypothesis>,
    pub slot_posteriors: Vec<f64>,
    pub confidence: f64,
    pub decoder_model_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPool {
    pub entries: BTreeMap<String, DecodedUtterance>,
    pub model_id: String,
    pub config_hash: String,
}

impl DecodedPool {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DecodedUtterance> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &DecodedUtterance> {
        self.entries.values()
    }

    pub fn mean_confidence(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        self.iter().map(|d| d.confidence).sum::<f64>() / self.len() as f64
    }
}

/// A model, LM and lexicon checked for consistency, ready to decode.
pub struct Decoder<'a> {
    am: &'a AcousticModel,
    graph: search::Graph<'a>,
    cfg: DecodeConfig,
    model_id: String,
}

impl<'a> Decoder<'a> {
    pub fn new(am: &'a AcousticModel, lm: &'a LanguageModel, lexicon: &'a Lexicon, cfg: &DecodeConfig) -> Result<Self> {
        cfg.validate()?;
        if lm.vocab_size != lexicon.len() {
            return Err(Error::config(
                "lm",
                format!("vocabulary of {} words, lexicon has {}", lm.vocab_size, lexicon.len()),
            ));
        }
        if lexicon.num_phones > am.num_phones() {
            return Err(Error::config(
                "lexicon",
                format!("uses {} phones, model has {}", lexicon.num_phones, am.num_phones()),
            ));
        }
        lexicon.validate()?;
        Ok(Self {
            am,
            graph: search::Graph::new(am, lm, lexicon),
            cfg: cfg.clone(),
            model_id: am.id(),
        })
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.cfg
    }

    pub fn decode(&self, utterance: &Utterance) -> Result<DecodedUtterance> {
        let fail = |reason: String| Error::Decode {
            utterance: utterance.id.clone(),
            reason,
        };
        if utterance.frames.is_empty() {
            return Err(fail("no frames".into()));
        }
        if let Some(s) = utterance
            .frames
            .iter()
            .find(|&&s| usize::from(s) >= self.am.alphabet_size())
        {
            return Err(Error::config(
                "alphabet",
                format!(
                    "utterance {} has symbol {s}, model alphabet is {}",
                    utterance.id,
                    self.am.alphabet_size()
                ),
            ));
        }
        let found = search::search(
            &self.graph,
            &utterance.frames,
            self.cfg.nbest,
            self.cfg.exact_search,
            self.cfg.beam,
        )
        .ok_or_else(|| fail("no word sequence fits the frames".into()))?;
        let nbest: Vec<Hypothesis> = found
            .into_iter()
            .map(|s| Hypothesis {
                words: s.words,
                score: s.score,
            })
            .collect();
        let slot_posteriors = word_posteriors(&nbest, self.cfg.acoustic_scale)?;
        let confidence = aggregate_confidence(&slot_posteriors, self.cfg.confidence)?;
        Ok(DecodedUtterance {
            utterance_id: utterance.id.clone(),
            best: nbest[0].clone(),
            nbest,
            slot_posteriors,
            confidence,
            decoder_model_id: self.model_id.clone(),
        })
    }

    /// Decodes every utterance; output is keyed and ordered by utterance id
    /// and does not depend on how the work is scheduled.
    pub fn decode_pool(&self, pool: &[Utterance]) -> Result<DecodedPool> {
        let decoded = pool
            .par_iter()
            .map(|u| self.decode(u))
            .collect::<Result<Vec<_>>>()?;
        let mut entries = BTreeMap::new();
        for d in decoded {
            let id = d.utterance_id.clone();
            if entries.insert(id.clone(), d).is_some() {
                return Err(Error::Contract(format!("utterance {id} appears twice in the pool")));
            }
        }
        Ok(DecodedPool {
            entries,
            model_id: self.model_id.clone(),
            config_hash: self.cfg.hash(),
        })
    }
}

pub fn decode_utterance(
    am: &AcousticModel,
    lm: &LanguageModel,
    lexicon: &Lexicon,
    utterance: &Utterance,
    cfg: &DecodeConfig,
) -> Result<DecodedUtterance> {
    Decoder::new(am, lm, lexicon, cfg)?.decode(utterance)
}

pub fn decode_pool(
    am: &AcousticModel,
    lm: &LanguageModel,
    lexicon: &Lexicon,
    pool: &[Utterance],
    cfg: &DecodeConfig,
) -> Result<DecodedPool> {
    if pool.is_empty() {
        return Err(Error::Contract("cannot decode an empty pool".into()));
    }
    Decoder::new(am, lm, lexicon, cfg)?.decode_pool(pool)
}

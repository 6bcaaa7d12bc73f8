use serde::{Deserialize, Serialize};

use crate::corpus::WordId;
use crate::decoder::DecodedPool;
use crate::error::{Error, Result};

/// Confidence interval `(lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, c: f64) -> bool {
        self.lo < c && c <= self.hi
    }
}

/// Disjoint intervals covering `(0, 1]`, highest confidence first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinSpec {
    pub intervals: Vec<Interval>,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self {
            intervals: vec![
                Interval::new(0.95, 1.0),
                Interval::new(0.9, 0.95),
                Interval::new(0.85, 0.9),
                Interval::new(0.8, 0.85),
                Interval::new(0.0, 0.8),
            ],
        }
    }
}

impl BinSpec {
    pub fn single() -> Self {
        Self {
            intervals: vec![Interval::new(0.0, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let iv = &self.intervals;
        if iv.is_empty() {
            return Err(Error::config("bins", "at least one interval required"));
        }
        if iv[0].hi != 1.0 || iv[iv.len() - 1].lo != 0.0 {
            return Err(Error::config("bins", "intervals must cover (0, 1]"));
        }
        for (i, b) in iv.iter().enumerate() {
            if !(b.lo < b.hi) {
                return Err(Error::config("bins", format!("interval {i} is empty")));
            }
            if i > 0 && iv[i - 1].lo != b.hi {
                return Err(Error::config(
                    "bins",
                    "intervals must be contiguous, disjoint and in decreasing order",
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn index_of(&self, confidence: f64) -> Option<usize> {
        self.intervals.iter().position(|b| b.contains(confidence))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMember {
    pub utterance_id: String,
    pub words: Vec<WordId>,
    pub label_model_id: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub interval: Interval,
    /// Ascending utterance id.
    pub members: Vec<BinMember>,
}

impl Bin {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}

/// Places every decoded utterance in the interval holding its confidence.
/// Bins come back in `spec` order.
pub fn assign_bins(decoded: &DecodedPool, spec: &BinSpec) -> Result<Vec<Bin>> {
    spec.validate()?;
    let mut bins: Vec<Bin> = spec
        .intervals
        .iter()
        .map(|&interval| Bin {
            interval,
            members: Vec::new(),
        })
        .collect();
    for d in decoded.iter() {
        let i = spec.index_of(d.confidence).ok_or_else(|| {
            Error::Contract(format!(
                "confidence {} of {} lies outside (0, 1]",
                d.confidence, d.utterance_id
            ))
        })?;
        bins[i].members.push(BinMember {
            utterance_id: d.utterance_id.clone(),
            words: d.best.words.clone(),
            label_model_id: d.decoder_model_id.clone(),
            confidence: d.confidence,
        });
    }
    Ok(bins)
}

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{PhoneId, Symbol};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const UNTRAINED: &str = "untrained";

/// Where a training transcript came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelSource {
    GroundTruth,
    DecodedBy(String),
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelSource::GroundTruth => f.write_str("ground-truth"),
            LabelSource::DecodedBy(model) => write!(f, "decoded-by:{model}"),
        }
    }
}

impl LabelSource {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "ground-truth" {
            Ok(LabelSource::GroundTruth)
        } else if let Some(model) = s.strip_prefix("decoded-by:") {
            Ok(LabelSource::DecodedBy(model.to_string()))
        } else {
            Err(Error::Format(format!("unknown label source {s:?}")))
        }
    }

    pub fn is_ground_truth(&self) -> bool {
        matches!(self, LabelSource::GroundTruth)
    }
}

/// Hash of the sorted `(utterance id, label source)` pairs of a training set.
pub fn training_fingerprint<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a LabelSource)>) -> String {
    let mut lines: Vec<String> = pairs
        .into_iter()
        .map(|(id, src)| format!("{id}\t{src}\n"))
        .collect();
    lines.sort_unstable();
    let mut h = Sha256::new();
    for l in &lines {
        h.update(l.as_bytes());
    }
    hex::encode(h.finalize())[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmState {
    pub self_loop: f64,
    pub advance: f64,
    pub emission: Vec<f64>,
}

/// Per-phone left-to-right HMMs with categorical emissions.
///
/// States are stored flat, `phone * states_per_phone + state`. Log tables are
/// derived from the probabilities whenever a model is constructed.
#[derive(Debug, Clone)]
pub struct AcousticModel {
    num_phones: usize,
    states_per_phone: usize,
    alphabet_size: usize,
    states: Vec<HmmState>,
    pub fingerprint: String,
    pub em_iterations_run: usize,
    /// Joint best-path log-likelihood after each EM iteration.
    pub em_trace: Vec<f64>,
    log_emission: Vec<f64>,
    log_self: Vec<f64>,
    log_advance: Vec<f64>,
}

impl PartialEq for AcousticModel {
    fn eq(&self, other: &Self) -> bool {
        self.num_phones == other.num_phones
            && self.states_per_phone == other.states_per_phone
            && self.alphabet_size == other.alphabet_size
            && self.states == other.states
            && self.fingerprint == other.fingerprint
            && self.em_iterations_run == other.em_iterations_run
            && self.em_trace == other.em_trace
    }
}

impl AcousticModel {
    pub fn from_states(
        num_phones: usize,
        states_per_phone: usize,
        alphabet_size: usize,
        states: Vec<HmmState>,
        fingerprint: String,
    ) -> Result<Self> {
        if num_phones == 0 || states_per_phone == 0 || alphabet_size == 0 {
            return Err(Error::Format("model topology has a zero dimension".into()));
        }
        if states.len() != num_phones * states_per_phone {
            return Err(Error::Format(format!(
                "expected {} states, found {}",
                num_phones * states_per_phone,
                states.len()
            )));
        }
        for (i, s) in states.iter().enumerate() {
            if s.emission.len() != alphabet_size {
                return Err(Error::Format(format!("state {i}: emission has wrong width")));
            }
            let total: f64 = s.emission.iter().sum();
            if (total - 1.0).abs() > 1e-9 || s.emission.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::Format(format!("state {i}: emission is not a positive distribution")));
            }
            if (s.self_loop + s.advance - 1.0).abs() > 1e-9 || !(s.self_loop > 0.0) || !(s.advance > 0.0) {
                return Err(Error::Format(format!("state {i}: transition probabilities invalid")));
            }
        }
        let log_emission = states
            .iter()
            .flat_map(|s| s.emission.iter().map(|p| p.ln()))
            .collect();
        let log_self = states.iter().map(|s| s.self_loop.ln()).collect();
        let log_advance = states.iter().map(|s| s.advance.ln()).collect();
        Ok(Self {
            num_phones,
            states_per_phone,
            alphabet_size,
            states,
            fingerprint,
            em_iterations_run: 0,
            em_trace: Vec::new(),
            log_emission,
            log_self,
            log_advance,
        })
    }

    pub fn num_phones(&self) -> usize {
        self.num_phones
    }

    pub fn states_per_phone(&self) -> usize {
        self.states_per_phone
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn states(&self) -> &[HmmState] {
        &self.states
    }

    pub fn state_index(&self, phone: PhoneId, state: usize) -> usize {
        usize::from(phone) * self.states_per_phone + state
    }

    #[inline]
    pub fn log_emission(&self, state: usize, symbol: Symbol) -> f64 {
        self.log_emission[state * self.alphabet_size + usize::from(symbol)]
    }

    /// Log emission row of one state, indexed by symbol.
    #[inline]
    pub fn log_emission_row(&self, state: usize) -> &[f64] {
        &self.log_emission[state * self.alphabet_size..(state + 1) * self.alphabet_size]
    }

    #[inline]
    pub fn log_self(&self, state: usize) -> f64 {
        self.log_self[state]
    }

    #[inline]
    pub fn log_advance(&self, state: usize) -> f64 {
        self.log_advance[state]
    }

    pub fn is_trained(&self) -> bool {
        self.fingerprint != UNTRAINED
    }

    /// Short identifier used in label sources and reports.
    pub fn id(&self) -> String {
        if self.is_trained() {
            format!("am-{}", &self.fingerprint[..self.fingerprint.len().min(12)])
        } else {
            format!("am-{UNTRAINED}")
        }
    }
}

/// Uniform emissions and 0.5 self-loops for every phone state.
pub fn flat_start(num_phones: usize, alphabet_size: usize, states_per_phone: usize) -> Result<AcousticModel> {
    let uniform = 1.0 / alphabet_size.max(1) as f64;
    let states = (0..num_phones * states_per_phone)
        .map(|_| HmmState {
            self_loop: 0.5,
            advance: 0.5,
            emission: vec![uniform; alphabet_size],
        })
        .collect();
    AcousticModel::from_states(num_phones, states_per_phone, alphabet_size, states, UNTRAINED.to_string())
}

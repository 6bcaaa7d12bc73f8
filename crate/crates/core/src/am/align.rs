use crate::am::{AcousticModel, LanguageModel};
use crate::corpus::{Lexicon, PhoneId, Symbol, Utterance, WordId};
use crate::error::{Error, Result};

/// Best state path for a fixed transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `(phone, state within phone)` for every frame.
    pub frames: Vec<(PhoneId, usize)>,
    /// Flat model state index for every frame.
    pub model_states: Vec<usize>,
    /// Position in the transcript's expanded state sequence for every frame.
    pub positions: Vec<usize>,
    pub acoustic_log_likelihood: f64,
    /// Acoustic plus (when a language model was supplied) LM log probability.
    pub log_likelihood: f64,
}

/// Expands a transcript into its sequence of flat model states.
pub fn expand_transcript(
    am: &AcousticModel,
    lexicon: &Lexicon,
    utterance_id: &str,
    transcript: &[WordId],
) -> Result<Vec<usize>> {
    if transcript.is_empty() {
        return Err(Error::Data {
            utterance: utterance_id.to_string(),
            reason: "empty transcript".into(),
        });
    }
    let mut seq = Vec::new();
    for &w in transcript {
        if !lexicon.contains(w) {
            return Err(Error::Data {
                utterance: utterance_id.to_string(),
                reason: format!("word id {w} is not in the lexicon"),
            });
        }
        for &p in lexicon.pronunciation(w) {
            if usize::from(p) >= am.num_phones() {
                return Err(Error::config("lexicon", format!("phone {p} unknown to the model")));
            }
            for s in 0..am.states_per_phone() {
                seq.push(am.state_index(p, s));
            }
        }
    }
    Ok(seq)
}

/// Viterbi over a linear state sequence. Returns per-frame positions and the
/// log-likelihood including the final exit transition, or `None` when the
/// sequence cannot be traversed in the available frames.
pub(crate) fn viterbi_linear(am: &AcousticModel, frames: &[Symbol], seq: &[usize]) -> Option<(Vec<usize>, f64)> {
    let t_len = frames.len();
    let m = seq.len();
    if m == 0 || t_len < m {
        return None;
    }
    let mut prev = vec![f64::NEG_INFINITY; m];
    let mut cur = vec![f64::NEG_INFINITY; m];
    // true when position j at frame t was entered by advancing
    let mut advanced = vec![false; t_len * m];

    prev[0] = am.log_emission(seq[0], frames[0]);
    for t in 1..t_len {
        // position j is reachable at frame t only if j <= t and the rest fits
        let lo = (m + t).saturating_sub(t_len);
        let hi = t.min(m - 1);
        cur.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        for j in lo..=hi {
            let s = seq[j];
            let stay = prev[j] + am.log_self(s);
            let adv = if j > 0 {
                prev[j - 1] + am.log_advance(seq[j - 1])
            } else {
                f64::NEG_INFINITY
            };
            let (best, from_adv) = if adv > stay { (adv, true) } else { (stay, false) };
            cur[j] = best + am.log_emission(s, frames[t]);
            advanced[t * m + j] = from_adv;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let total = prev[m - 1] + am.log_advance(seq[m - 1]);
    if !total.is_finite() {
        return None;
    }

    let mut positions = vec![0; t_len];
    let mut j = m - 1;
    for t in (0..t_len).rev() {
        positions[t] = j;
        if t > 0 && advanced[t * m + j] {
            j -= 1;
        }
    }
    debug_assert_eq!(j, 0);
    Some((positions, total))
}

pub fn forced_align(
    am: &AcousticModel,
    lm: Option<&LanguageModel>,
    utterance: &Utterance,
    transcript: &[WordId],
    lexicon: &Lexicon,
) -> Result<Alignment> {
    if utterance.frames.is_empty() {
        return Err(Error::Alignment {
            utterance: utterance.id.clone(),
            reason: "no frames".into(),
        });
    }
    if let Some(s) = utterance.frames.iter().find(|&&s| usize::from(s) >= am.alphabet_size()) {
        return Err(Error::Data {
            utterance: utterance.id.clone(),
            reason: format!("symbol {s} outside the model alphabet"),
        });
    }
    let seq = expand_transcript(am, lexicon, &utterance.id, transcript)?;
    let (positions, acoustic) =
        viterbi_linear(am, &utterance.frames, &seq).ok_or_else(|| Error::Alignment {
            utterance: utterance.id.clone(),
            reason: format!(
                "{} frames cannot cover the {} states of the transcript",
                utterance.frames.len(),
                seq.len()
            ),
        })?;
    let spp = am.states_per_phone();
    let model_states: Vec<usize> = positions.iter().map(|&j| seq[j]).collect();
    let frames = model_states
        .iter()
        .map(|&s| ((s / spp) as PhoneId, s % spp))
        .collect();
    let lm_score = lm.map_or(0.0, |lm| lm.sentence_log_prob(transcript));
    Ok(Alignment {
        frames,
        model_states,
        positions,
        acoustic_log_likelihood: acoustic,
        log_likelihood: acoustic + lm_score,
    })
}

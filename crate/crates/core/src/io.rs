//! On-disk formats: corpus, splits, oracle, models, decoded pools and the
//! CSV reports.
//!
//! JSON documents store floats in shortest round-trip form, so loading a
//! saved model reproduces it exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::am::{AcousticModel, HmmState, LanguageModel, TrainConfig, MODEL_FORMAT_VERSION};
use crate::corpus::{DataSplits, GeneratorConfig, Lexicon, Oracle, SplitRatios, Utterance, WordId};
use crate::decoder::{DecodedPool, DecodedUtterance, Hypothesis};
use crate::error::{Error, Result};
use crate::eval::ScatterPoint;
use crate::protocols::{StageHistogram, WerProfile};

pub const CORPUS_FORMAT_VERSION: u32 = 1;
pub const CORPUS_FILE: &str = "corpus.json";
pub const SPLITS_FILE: &str = "splits.json";
pub const ORACLE_FILE: &str = "oracle.json";

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn split_ints<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Format(format!("bad {what} {t:?}"))))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct UtteranceRecord {
    id: String,
    symbols: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    format_version: u32,
    master_seed: u64,
    config: GeneratorConfig,
    lexicon: Lexicon,
    utterances: Vec<UtteranceRecord>,
}

#[derive(Serialize, Deserialize)]
struct SplitsFile {
    ratios: SplitRatios,
    seed: Vec<String>,
    unlabeled: Vec<String>,
    test: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct OracleFile {
    references: BTreeMap<String, String>,
}

/// A generated experiment: corpus, lexicon, splits and the pool's labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: GeneratorConfig,
    pub lexicon: Lexicon,
    pub splits: DataSplits,
    pub oracle: Oracle,
}

/// Writes `corpus.json`, `splits.json` and `oracle.json` into `dir`. The
/// corpus file carries no labels for pool utterances.
pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    let s = &data.splits;
    let mut utterances: Vec<&Utterance> = s.d_seed.iter().chain(&s.d_u).chain(&s.test).collect();
    utterances.sort_by(|a, b| a.id.cmp(&b.id));
    let records = utterances
        .into_iter()
        .map(|u| UtteranceRecord {
            id: u.id.clone(),
            symbols: join(&u.frames),
            reference: u.reference.as_deref().map(join),
        })
        .collect();
    write_json(
        &dir.join(CORPUS_FILE),
        &CorpusFile {
            format_version: CORPUS_FORMAT_VERSION,
            master_seed: data.config.master_seed,
            config: data.config.clone(),
            lexicon: data.lexicon.clone(),
            utterances: records,
        },
    )?;
    let ids = |v: &[Utterance]| v.iter().map(|u| u.id.clone()).collect();
    write_json(
        &dir.join(SPLITS_FILE),
        &SplitsFile {
            ratios: s.ratios,
            seed: ids(&s.d_seed),
            unlabeled: ids(&s.d_u),
            test: ids(&s.test),
        },
    )?;
    write_json(
        &dir.join(ORACLE_FILE),
        &OracleFile {
            references: data.oracle.references().iter().map(|(k, v)| (k.clone(), join(v))).collect(),
        },
    )
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let corpus: CorpusFile = read_json(&dir.join(CORPUS_FILE))?;
    if corpus.format_version != CORPUS_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported corpus format {}", corpus.format_version)));
    }
    let splits: SplitsFile = read_json(&dir.join(SPLITS_FILE))?;
    let oracle: OracleFile = read_json(&dir.join(ORACLE_FILE))?;
    let mut config = corpus.config;
    config.master_seed = corpus.master_seed;
    config.validate()?;
    corpus.lexicon.validate()?;

    let mut by_id: HashMap<String, Utterance> = HashMap::new();
    for r in corpus.utterances {
        let u = Utterance {
            frames: split_ints(&r.symbols, "symbol")?,
            reference: r.reference.as_deref().map(|s| split_ints(s, "word id")).transpose()?,
            id: r.id,
        };
        u.validate(config.alphabet_size, corpus.lexicon.len())?;
        if by_id.insert(u.id.clone(), u).is_some() {
            return Err(Error::Format("duplicate utterance id in corpus".into()));
        }
    }
    let mut take = |ids: &[String], labeled: bool| -> Result<Vec<Utterance>> {
        let mut out: Vec<Utterance> = ids
            .iter()
            .map(|id| by_id.remove(id).ok_or_else(|| Error::Lookup(id.clone())))
            .collect::<Result<_>>()?;
        out.sort_by(|a, b| a.id.cmp(&b.id));
        for u in &out {
            if labeled != u.reference.is_some() {
                return Err(Error::Data {
                    utterance: u.id.clone(),
                    reason: if labeled { "labeled split without reference" } else { "pool utterance carries a label" }.into(),
                });
            }
        }
        Ok(out)
    };
    let d_seed = take(&splits.seed, true)?;
    let d_u = take(&splits.unlabeled, false)?;
    let test = take(&splits.test, true)?;
    let references = oracle
        .references
        .into_iter()
        .map(|(k, v)| Ok((k, split_ints(&v, "word id")?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    if references.len() != d_u.len() || d_u.iter().any(|u| !references.contains_key(&u.id)) {
        return Err(Error::Format("oracle does not match the unlabeled pool".into()));
    }
    Ok(Dataset {
        config,
        lexicon: corpus.lexicon,
        splits: DataSplits {
            d_seed,
            d_u,
            test,
            ratios: splits.ratios,
        },
        oracle: Oracle::new(references),
    })
}

/// Training provenance stored alongside a model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelProvenance {
    pub train: Option<TrainConfig>,
    pub label_sources: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    num_phones: usize,
    states_per_phone: usize,
    alphabet_size: usize,
    fingerprint: String,
    em_iterations_run: usize,
    em_trace: Vec<f64>,
    states: Vec<HmmState>,
    provenance: ModelProvenance,
}

pub fn model_json(am: &AcousticModel, provenance: &ModelProvenance) -> Result<String> {
    to_json(&ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            num_phones: am.num_phones(),
            states_per_phone: am.states_per_phone(),
            alphabet_size: am.alphabet_size(),
            fingerprint: am.fingerprint.clone(),
            em_iterations_run: am.em_iterations_run,
            em_trace: am.em_trace.clone(),
            states: am.states().to_vec(),
        provenance: provenance.clone(),
    })
}

pub fn save_model(path: &Path, am: &AcousticModel, provenance: &ModelProvenance) -> Result<()> {
    write_atomic(path, model_json(am, provenance)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<(AcousticModel, ModelProvenance)> {
    let f: ModelFile = read_json(path)?;
    if f.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model format {}", f.format_version)));
    }
    let mut am = AcousticModel::from_states(f.num_phones, f.states_per_phone, f.alphabet_size, f.states, f.fingerprint)?;
    am.em_iterations_run = f.em_iterations_run;
    am.em_trace = f.em_trace;
    Ok((am, f.provenance))
}

#[derive(Serialize, Deserialize)]
struct LmFile {
    order: usize,
    add_k: f64,
    vocab_size: usize,
    probs: Vec<f64>,
}

pub fn lm_json(lm: &LanguageModel) -> Result<String> {
    to_json(&LmFile {
        order: lm.order,
        add_k: lm.add_k,
        vocab_size: lm.vocab_size,
        probs: lm.probs().to_vec(),
    })
}

pub fn save_lm(path: &Path, lm: &LanguageModel) -> Result<()> {
    write_atomic(path, lm_json(lm)?.as_bytes())
}

pub fn load_lm(path: &Path) -> Result<LanguageModel> {
    let f: LmFile = read_json(path)?;
    LanguageModel::from_probs(f.order, f.add_k, f.vocab_size, f.probs)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn tsv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Tab-separated decoded pool: a header row, then one row per utterance in id
/// order. Confidence is rounded to 9 decimals.
pub fn decoded_pool_tsv(pool: &DecodedPool) -> Result<String> {
    let mut w = tsv_writer();
    w.write_record(["utt_id", "confidence", "words", "slot_posteriors", "score", "model_id", "config_hash"])
        .map_err(csv_err)?;
    for d in pool.iter() {
        w.write_record([
            d.utterance_id.as_str(),
            &format!("{:.9}", d.confidence),
            &join(&d.best.words),
            &join(&d.slot_posteriors),
            &d.best.score.to_string(),
            &d.decoder_model_id,
            &pool.config_hash,
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Reads a pool written by [`decoded_pool_tsv`]. Only the best hypothesis
/// survives the round trip.
pub fn parse_decoded_pool(text: &str) -> Result<DecodedPool> {
    let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(text.as_bytes());
    let mut entries = BTreeMap::new();
    let mut model_id = String::new();
    let mut config_hash = String::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 7 {
            return Err(Error::Format(format!("decoded pool row has {} fields", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::Format(format!("bad number {:?}", &rec[i])))
        };
        let best = Hypothesis {
            words: split_ints(&rec[2], "word id")?,
            score: num(4)?,
        };
        let d = DecodedUtterance {
            utterance_id: rec[0].to_string(),
            confidence: num(1)?,
            slot_posteriors: split_ints(&rec[3], "posterior")?,
            nbest: vec![best.clone()],
            best,
            decoder_model_id: rec[5].to_string(),
        };
        model_id = d.decoder_model_id.clone();
        config_hash = rec[6].to_string();
        if entries.insert(d.utterance_id.clone(), d).is_some() {
            return Err(Error::Format(format!("duplicate utterance {}", &rec[0])));
        }
    }
    Ok(DecodedPool {
        entries,
        model_id,
        config_hash,
    })
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

pub fn scatter_csv(points: &[ScatterPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["utt_id", "confidence", "utt_wer"]).map_err(csv_err)?;
    for p in points {
        w.write_record([p.utterance_id.clone(), f6(p.confidence), f6(p.wer)])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn profile_csv(profiles: &[WerProfile]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["protocol", "stage_label", "model_id", "train_fraction", "wer"])
        .map_err(csv_err)?;
    for prof in profiles {
        for p in &prof.points {
            w.write_record([
                prof.protocol.clone(),
                p.stage_label.clone(),
                p.model_id.clone(),
                f6(p.train_fraction),
                f6(p.wer),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// One profile row as read back from `profile.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub protocol: String,
    pub stage_label: String,
    pub model_id: String,
    pub train_fraction: f64,
    pub wer: f64,
}

pub fn parse_profile_csv(text: &str) -> Result<Vec<ProfileRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers != vec!["protocol", "stage_label", "model_id", "train_fraction", "wer"] {
        return Err(Error::Format("unexpected profile.csv header".into()));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Bin populations. The protocol column is `protocol:stage` so that the
/// local iterations of different stages stay distinguishable.
pub fn bins_csv(histograms: &[StageHistogram]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["protocol", "model_id", "iteration", "bin_index", "lo", "hi", "count"])
        .map_err(csv_err)?;
    for h in histograms {
        let tag = format!("{}:{}", h.protocol, h.stage);
        for (i, (iv, count)) in h.histogram.counts.iter().enumerate() {
            w.write_record([
                tag.clone(),
                h.histogram.model_id.clone(),
                h.histogram.iteration.to_string(),
                (i + 1).to_string(),
                f6(iv.lo),
                f6(iv.hi),
                count.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Words of a reference list written as space-separated ids.
pub fn words_to_string(words: &[WordId]) -> String {
    join(words)
}

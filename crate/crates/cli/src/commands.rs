use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use confbin::am::AcousticModel;
use confbin::corpus::{sample_corpus, split_corpus, Oracle};
use confbin::eval::{bin_histogram, scatter, ScatterPoint};
use confbin::io::{self, Dataset, ModelProvenance, ProfileRow};
use confbin::protocols::{
    active_learning_budgets, assign_bins, run_active_learning, run_iterative, run_non_iterative, run_random_baseline,
    run_seed_baseline, run_topline, ProtocolContext, StageHistogram, WerProfile,
};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Protocol};
use crate::manifest::{Manifest, StageRow};
use crate::CliError;

pub const PROFILE_FILE: &str = "profile.csv";
pub const BINS_FILE: &str = "bins.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const SUMMARY_FILE: &str = "summary.json";

struct Timer(BTreeMap<String, f64>);

impl Timer {
    fn time<T>(&mut self, step: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.insert(step.to_string(), start.elapsed().as_secs_f64());
        out
    }
}

pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest, CliError> {
    let mut timer = Timer(BTreeMap::new());
    let gen_cfg = cfg.generator();
    let (corpus, lexicon, _) = timer.time("generate", || sample_corpus(&gen_cfg))?;
    let (splits, oracle) = split_corpus(&corpus, cfg.ratios, cfg.master_seed)?;
    let data = Dataset {
        config: gen_cfg,
        lexicon,
        splits,
        oracle,
    };
    io::save_dataset(out, &data)?;
    let mut manifest = Manifest::new("gen", None, cfg);
    for name in [io::CORPUS_FILE, io::SPLITS_FILE, io::ORACLE_FILE] {
        let bytes = std::fs::read(out.join(name)).map_err(confbin::Error::from)?;
        manifest.files.insert(name.to_string(), crate::manifest::sha256_hex(&bytes));
    }
    manifest.timings = timer.0;
    manifest.save(out)?;
    info!(
        "wrote {} utterances ({} seed, {} pool, {} test) to {}",
        corpus.utterances.len(),
        data.splits.d_seed.len(),
        data.splits.d_u.len(),
        data.splits.test.len(),
        out.display()
    );
    Ok(manifest)
}

pub fn load_data(dir: &Path) -> Result<Dataset, CliError> {
    io::load_dataset(dir).map_err(|e| match e {
        confbin::Error::Io(err) => CliError::MissingData(format!("{}: {err}", dir.display())),
        other => other.into(),
    })
}

/// Everything a protocol run produces before it is written out.
pub struct RunOutcome {
    pub profiles: Vec<WerProfile>,
    pub histograms: Vec<StageHistogram>,
    pub scatter: Vec<ScatterPoint>,
    pub final_model: AcousticModel,
    pub annotation_budget: Option<usize>,
}

fn seed_histogram(ctx: &ProtocolContext<'_>, protocol: &str) -> Result<StageHistogram, CliError> {
    let decoded = ctx.seed_decode()?;
    let bins = assign_bins(decoded, &ctx.cfg.bins)?;
    Ok(StageHistogram {
        protocol: protocol.to_string(),
        stage: "seed".into(),
        histogram: bin_histogram(&bins, ctx.splits.d_u.len(), &decoded.model_id, 0)?,
    })
}

fn seed_scatter(ctx: &ProtocolContext<'_>, oracle: &Oracle) -> Result<Vec<ScatterPoint>, CliError> {
    Ok(scatter(ctx.seed_decode()?, oracle.references())?)
}

pub fn execute(protocol: Protocol, ctx: &ProtocolContext<'_>, oracle: &mut Oracle) -> Result<RunOutcome, CliError> {
    let name = protocol.to_string();
    let single = |points, seed_wer| WerProfile {
        protocol: name.clone(),
        points,
        seed_wer,
        topline_wer: None,
    };
    let outcome = match protocol {
        Protocol::Seed => {
            let (am, point) = run_seed_baseline(ctx)?;
            RunOutcome {
                profiles: vec![single(vec![point.clone()], point.wer)],
                histograms: vec![seed_histogram(ctx, &name)?],
                scatter: seed_scatter(ctx, oracle)?,
                final_model: am,
                annotation_budget: None,
            }
        }
        Protocol::Topline => {
            let (am, point) = run_topline(ctx, oracle)?;
            let seed_wer = ctx.seed_point()?.wer;
            let mut profile = single(vec![point.clone()], seed_wer);
            profile.topline_wer = Some(point.wer);
            RunOutcome {
                profiles: vec![profile],
                histograms: Vec::new(),
                scatter: Vec::new(),
                final_model: am,
                annotation_budget: None,
            }
        }
        Protocol::Noniter => {
            let out = run_non_iterative(ctx, oracle)?;
            let final_model = match out.models.last() {
                Some(am) => am.clone(),
                None => ctx.seed_model()?.0.clone(),
            };
            RunOutcome {
                profiles: vec![out.profile],
                histograms: vec![out.histogram],
                scatter: out.scatter,
                final_model,
                annotation_budget: None,
            }
        }
        Protocol::Iter => {
            let out = run_iterative(ctx)?;
            RunOutcome {
                profiles: out.passes,
                histograms: out.histograms,
                scatter: seed_scatter(ctx, oracle)?,
                final_model: out.final_model,
                annotation_budget: None,
            }
        }
        Protocol::Active => {
            let out = run_active_learning(ctx, oracle)?;
            RunOutcome {
                profiles: vec![out.profile],
                histograms: vec![seed_histogram(ctx, &name)?],
                scatter: seed_scatter(ctx, oracle)?,
                final_model: out.final_model,
                annotation_budget: Some(oracle.budget_used()),
            }
        }
        Protocol::Random => {
            let budgets = active_learning_budgets(ctx)?;
            let out = run_random_baseline(ctx, oracle, &budgets)?;
            RunOutcome {
                profiles: vec![out.profile],
                histograms: Vec::new(),
                scatter: Vec::new(),
                final_model: out.final_model,
                annotation_budget: Some(oracle.budget_used()),
            }
        }
    };
    Ok(outcome)
}

pub fn cmd_run(cfg: &ExperimentConfig, protocol: Protocol, data_dir: &Path, out: &Path) -> Result<Manifest, CliError> {
    let mut timer = Timer(BTreeMap::new());
    let mut data = load_data(data_dir)?;
    if data.config != cfg.generator() {
        log::warn!("the corpus in {} was generated with a different configuration", data_dir.display());
    }
    let ctx = ProtocolContext::new(
        &data.splits,
        &data.lexicon,
        &data.config,
        cfg.protocol_config(),
        cfg.master_seed,
    )?;
    let outcome = timer.time(&protocol.to_string(), || execute(protocol, &ctx, &mut data.oracle))?;

    let mut manifest = Manifest::new("run", Some(protocol.to_string()), cfg);
    manifest.annotation_budget = outcome.annotation_budget;
    manifest.stages = outcome
        .profiles
        .iter()
        .flat_map(|p| {
            p.points.iter().map(|pt| StageRow {
                protocol: p.protocol.clone(),
                stage_label: pt.stage_label.clone(),
                train_fraction: pt.train_fraction,
                wer: pt.wer,
            })
        })
        .collect();
    manifest.emit(out, PROFILE_FILE, io::profile_csv(&outcome.profiles)?.as_bytes())?;
    manifest.emit(out, BINS_FILE, io::bins_csv(&outcome.histograms)?.as_bytes())?;
    manifest.emit(out, SCATTER_FILE, io::scatter_csv(&outcome.scatter)?.as_bytes())?;

    let provenance = ModelProvenance {
        train: Some(cfg.train.clone()),
        label_sources: Vec::new(),
    };
    manifest.emit(out, "model.json", io::model_json(&outcome.final_model, &provenance)?.as_bytes())?;
    manifest.emit(out, "lm.json", io::lm_json(ctx.lm())?.as_bytes())?;
    manifest.timings = timer.0;
    manifest.save(out)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    /// Protocol of each merged run, in argument order.
    pub runs: Vec<String>,
    pub seed_wer: Option<f64>,
    pub topline_wer: Option<f64>,
    pub best_ssl_wer: Option<f64>,
    /// `(seed - best SSL) / (seed - topline)`
    pub gap_recovery: Option<f64>,
    /// Whether the active and random profiles share their training fractions.
    pub budgets_match: Option<bool>,
}

fn is_ssl(protocol: &str) -> bool {
    protocol == "noniter" || protocol.starts_with("iter-")
}

pub fn summarize(rows: &[ProfileRow]) -> ReportSummary {
    let seed_wer = rows.iter().find(|r| r.stage_label == "seed").map(|r| r.wer);
    let topline_wer = rows.iter().find(|r| r.protocol == "topline").map(|r| r.wer);
    let best_ssl_wer = rows
        .iter()
        .filter(|r| is_ssl(&r.protocol) && r.stage_label != "seed")
        .map(|r| r.wer)
        .min_by(f64::total_cmp);
    let gap_recovery = match (seed_wer, topline_wer, best_ssl_wer) {
        (Some(s), Some(t), Some(b)) if s != t => Some((s - b) / (s - t)),
        _ => None,
    };
    let fractions = |p: &str| -> Vec<f64> { rows.iter().filter(|r| r.protocol == p).map(|r| r.train_fraction).collect() };
    let (al, random) = (fractions("active"), fractions("random"));
    let budgets_match = (!al.is_empty() && !random.is_empty()).then(|| al == random);
    ReportSummary {
        runs: Vec::new(),
        seed_wer,
        topline_wer,
        best_ssl_wer,
        gap_recovery,
        budgets_match,
    }
}

pub fn cmd_report(run_dirs: &[&Path], out: &Path) -> Result<ReportSummary, CliError> {
    if run_dirs.is_empty() {
        return Err(CliError::Config("report needs at least one run directory".into()));
    }
    let mut merged: Vec<ProfileRow> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut first_config = None;
    let mut runs = Vec::new();
    for dir in run_dirs {
        let manifest = Manifest::load(dir)?;
        manifest.verify(dir)?;
        runs.push(manifest.protocol.clone().unwrap_or_else(|| manifest.command.clone()));
        first_config.get_or_insert(manifest.config.clone());
        let text = std::fs::read_to_string(dir.join(PROFILE_FILE))
            .map_err(|e| CliError::MissingData(format!("{}: {e}", dir.display())))?;
        for row in io::parse_profile_csv(&text)? {
            if seen.insert((row.protocol.clone(), row.stage_label.clone())) {
                merged.push(row);
            }
        }
    }
    let mut summary = summarize(&merged);
    summary.runs = runs;

    let mut manifest = Manifest::new("report", None, first_config.as_ref().expect("at least one run"));
    let mut csv = String::from("protocol,stage_label,model_id,train_fraction,wer\n");
    for r in &merged {
        csv.push_str(&format!(
            "{},{},{},{:.6},{:.6}\n",
            r.protocol, r.stage_label, r.model_id, r.train_fraction, r.wer
        ));
    }
    manifest.emit(out, PROFILE_FILE, csv.as_bytes())?;
    let mut text = serde_json::to_string_pretty(&summary).map_err(confbin::Error::from)?;
    text.push('\n');
    manifest.emit(out, SUMMARY_FILE, text.as_bytes())?;
    manifest.save(out)?;
    Ok(summary)
}

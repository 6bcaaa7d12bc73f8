use std::collections::HashMap;

use log::info;

use super::{assign_bins, pool_truth, Bin, ProfilePoint, ProtocolContext, StageHistogram, TrainingAudit, WerProfile};
use crate::am::{AcousticModel, LabelSource};
use crate::corpus::{Oracle, WordId};
use crate::decoder::DecodedPool;
use crate::error::{Error, Result};
use crate::eval::{bin_histogram, scatter, ScatterPoint};

type PoolLabel = (String, Vec<WordId>, LabelSource);

pub struct NonIterativeOutput {
    /// `AM_1..AM_N` for the stages that ran, in stage order.
    pub models: Vec<AcousticModel>,
    pub profile: WerProfile,
    /// Bin populations of the seed-model decode.
    pub histogram: StageHistogram,
    /// Confidence against utterance WER on the seed-model decode.
    pub scatter: Vec<ScatterPoint>,
    pub audits: Vec<TrainingAudit>,
    /// Labels of stages skipped because their bin was empty.
    pub skipped: Vec<String>,
}

pub struct IterativeOutput {
    /// One profile per global pass.
    pub passes: Vec<WerProfile>,
    /// Every bin assignment, including iteration 0 of each local loop.
    pub histograms: Vec<StageHistogram>,
    /// Model chosen at the end of each pass to seed the next one.
    pub selected: Vec<String>,
    /// The model selected in the last pass.
    pub final_model: AcousticModel,
    pub audits: Vec<TrainingAudit>,
}

impl IterativeOutput {
    /// Histograms of the first local loop of the first pass.
    pub fn first_loop(&self) -> Vec<&StageHistogram> {
        self.histograms
            .iter()
            .filter(|h| h.protocol == "iter-1" && h.stage == "B1")
            .collect()
    }

    pub fn best_wer(&self) -> Option<f64> {
        self.passes.iter().filter_map(WerProfile::min_wer).min_by(f64::total_cmp)
    }
}

fn pseudo_labels(bins: &[Bin]) -> Vec<PoolLabel> {
    bins.iter()
        .flat_map(|b| &b.members)
        .map(|m| {
            (
                m.utterance_id.clone(),
                m.words.clone(),
                LabelSource::DecodedBy(m.label_model_id.clone()),
            )
        })
        .collect()
}

fn check_partition(bins: &[Bin], pool: usize) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for m in bins.iter().flat_map(|b| &b.members) {
        if !seen.insert(m.utterance_id.as_str()) {
            return Err(Error::invariant(
                "bin-partition",
                format!("{} sits in two bins", m.utterance_id),
            ));
        }
    }
    if seen.len() != pool {
        return Err(Error::invariant(
            "bin-partition",
            format!("bins hold {} utterances, pool has {pool}", seen.len()),
        ));
    }
    Ok(())
}

fn assign_checked(ctx: &ProtocolContext<'_>, decoded: &DecodedPool) -> Result<Vec<Bin>> {
    let bins = assign_bins(decoded, &ctx.cfg.bins)?;
    check_partition(&bins, ctx.splits.d_u.len())?;
    Ok(bins)
}

fn stage_point(ctx: &ProtocolContext<'_>, label: String, am: &AcousticModel, selected: usize) -> Result<ProfilePoint> {
    Ok(ProfilePoint {
        stage_label: label,
        model_id: am.id(),
        train_fraction: ctx.train_fraction(selected),
        train_size: ctx.seed_train_set().len() + selected,
        wer: ctx.test_wer(am)?,
    })
}

/// Bin the seed decode by decreasing confidence, then add one bin per stage.
/// Bin `B_n` is relabeled by `AM_{n-1}` just before it joins the training
/// set; bins consumed earlier keep the labels they had. `oracle` is read only
/// to score the scatter plot.
pub fn run_non_iterative(ctx: &ProtocolContext<'_>, oracle: &Oracle) -> Result<NonIterativeOutput> {
    let (seed_am, seed_wer) = ctx.seed_model()?;
    let decoded = ctx.seed_decode()?;
    let bins = assign_checked(ctx, decoded)?;
    let histogram = StageHistogram {
        protocol: "noniter".into(),
        stage: "seed".into(),
        histogram: bin_histogram(&bins, ctx.splits.d_u.len(), &seed_am.id(), 0)?,
    };
    let scatter = scatter(decoded, &pool_truth(oracle))?;

    let mut points = vec![ctx.seed_point()?];
    let mut models: Vec<AcousticModel> = Vec::new();
    let mut audits = Vec::new();
    let mut skipped = Vec::new();
    let mut labels: Vec<PoolLabel> = Vec::new();
    for (n, bin) in bins.iter().enumerate() {
        let label = format!("B{}", n + 1);
        if bin.is_empty() {
            info!("noniter: {label} is empty, stage skipped");
            skipped.push(label);
            continue;
        }
        let prev = models.last().unwrap_or(seed_am);
        let mut fresh = pseudo_labels(std::slice::from_ref(bin));
        if prev.fingerprint != seed_am.fingerprint {
            let redecoded = ctx.decode_pool_ids(prev, bin.members.iter().map(|m| m.utterance_id.as_str()))?;
            for l in &mut fresh {
                let d = &redecoded.entries[&l.0];
                l.1 = d.best.words.clone();
                l.2 = LabelSource::DecodedBy(d.decoder_model_id.clone());
            }
        }
        labels.extend(fresh);
        let am = ctx.train_with(&labels)?;
        audits.push(ctx.audit(&label, &am, &labels));
        let point = stage_point(ctx, label, &am, labels.len())?;
        info!("noniter: {} wer {:.3}", point.stage_label, point.wer);
        points.push(point);
        models.push(am);
    }
    Ok(NonIterativeOutput {
        models,
        profile: WerProfile {
            protocol: "noniter".into(),
            points,
            seed_wer: *seed_wer,
            topline_wer: None,
        },
        histogram,
        scatter,
        audits,
        skipped,
    })
}

fn churn(before: &[Bin], after: &[Bin]) -> f64 {
    let index: HashMap<&str, usize> = before
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.members.iter().map(move |m| (m.utterance_id.as_str(), i)))
        .collect();
    let total = index.len();
    if total == 0 {
        return 0.0;
    }
    let moved = after
        .iter()
        .enumerate()
        .flat_map(|(i, b)| b.members.iter().map(move |m| (m.utterance_id.as_str(), i)))
        .filter(|(id, i)| index.get(id) != Some(i))
        .count();
    moved as f64 / total as f64
}

/// Local loops refresh the whole pool after every retrain; global passes
/// restart the binning from the best model of the previous pass.
pub fn run_iterative(ctx: &ProtocolContext<'_>) -> Result<IterativeOutput> {
    let ssl = &ctx.cfg.ssl;
    let pool = ctx.splits.d_u.len();
    let (seed_am, _) = ctx.seed_model()?;
    let seed_point = ctx.seed_point()?;

    let mut passes = Vec::new();
    let mut histograms = Vec::new();
    let mut selected = Vec::new();
    let mut audits = Vec::new();

    let mut decoding_model = seed_am.clone();
    let mut previous_best = ctx.selection_wer(seed_am)?;
    for pass in 1..=ssl.max_global_iters {
        let protocol = format!("iter-{pass}");
        let mut bins = if pass == 1 {
            assign_checked(ctx, ctx.seed_decode()?)?
        } else {
            assign_checked(ctx, &ctx.decode_full_pool(&decoding_model)?)?
        };
        let mut bins_model = decoding_model.id();
        let mut points = vec![seed_point.clone()];
        let mut candidates: Vec<AcousticModel> = Vec::new();
        for n in 1..=bins.len() {
            let stage = format!("B{n}");
            histograms.push(StageHistogram {
                protocol: protocol.clone(),
                stage: stage.clone(),
                histogram: bin_histogram(&bins, pool, &bins_model, 0)?,
            });
            if bins[n - 1].is_empty() {
                info!("{protocol}: {stage} is empty, stage skipped");
                continue;
            }
            let mut model = None;
            for local in 1..=ssl.max_local_iters {
                let labels = pseudo_labels(&bins[..n]);
                let am = ctx.train_with(&labels)?;
                audits.push(ctx.audit(&format!("{protocol}-{stage}-{local}"), &am, &labels));
                let refreshed = assign_checked(ctx, &ctx.decode_full_pool(&am)?)?;
                let moved = churn(&bins, &refreshed);
                bins = refreshed;
                bins_model = am.id();
                histograms.push(StageHistogram {
                    protocol: protocol.clone(),
                    stage: stage.clone(),
                    histogram: bin_histogram(&bins, pool, &am.id(), local)?,
                });
                model = Some((am, labels.len()));
                if moved < ssl.local_saturation {
                    break;
                }
            }
            let (am, selected_size) = model.expect("at least one local iteration");
            let point = stage_point(ctx, stage, &am, selected_size)?;
            info!("{protocol}: {} wer {:.3}", point.stage_label, point.wer);
            points.push(point);
            candidates.push(am);
        }
        if candidates.is_empty() {
            return Err(Error::invariant("iterative-progress", "every bin of the pass was empty"));
        }
        let mut best: Option<(f64, usize)> = None;
        for (i, am) in candidates.iter().enumerate() {
            let w = ctx.selection_wer(am)?;
            if best.is_none_or(|(b, _)| w < b) {
                best = Some((w, i));
            }
        }
        let (best_wer, best_index) = best.expect("nonempty candidates");
        decoding_model = candidates.swap_remove(best_index);
        selected.push(decoding_model.id());
        passes.push(WerProfile {
            protocol,
            points,
            seed_wer: seed_point.wer,
            topline_wer: None,
        });
        let improvement = previous_best - best_wer;
        info!("pass {pass}: selected {} ({best_wer:.3}), improvement {improvement:.3}", decoding_model.id());
        if improvement < ssl.global_saturation {
            break;
        }
        previous_best = best_wer;
    }
    Ok(IterativeOutput {
        passes,
        histograms,
        selected,
        final_model: decoding_model,
        audits,
    })
}

use log::info;
use rand::seq::SliceRandom;

use super::{assign_bins, ProfilePoint, ProtocolContext, SelectionMode, TrainingAudit, WerProfile};
use crate::am::{AcousticModel, LabelSource};
use crate::corpus::{Oracle, WordId};
use crate::error::{Error, Result};
use crate::rng::{substream, STREAM_RANDOM_BASELINE};

pub struct ActiveOutput {
    pub profile: WerProfile,
    /// Cumulative number of pool utterances labeled after each batch.
    pub budgets: Vec<usize>,
    pub final_model: AcousticModel,
    pub audits: Vec<TrainingAudit>,
}

/// Cumulative batch sizes: the non-empty bins of the seed-model decode,
/// lowest confidence first.
pub fn active_learning_budgets(ctx: &ProtocolContext<'_>) -> Result<Vec<usize>> {
    let bins = assign_bins(ctx.seed_decode()?, &ctx.cfg.bins)?;
    let mut total = 0;
    Ok(bins
        .iter()
        .rev()
        .filter(|b| !b.is_empty())
        .map(|b| {
            total += b.len();
            total
        })
        .collect())
}

type Labels = Vec<(String, Vec<WordId>, LabelSource)>;

fn label_batch(oracle: &mut Oracle, ids: &[String], labels: &mut Labels) -> Result<()> {
    for id in ids {
        labels.push((id.clone(), oracle.label(id)?, LabelSource::GroundTruth));
    }
    Ok(())
}

fn retrain_point(
    ctx: &ProtocolContext<'_>,
    stage_label: String,
    labels: &Labels,
    audits: &mut Vec<TrainingAudit>,
) -> Result<(AcousticModel, ProfilePoint)> {
    let am = ctx.train_with(labels)?;
    audits.push(ctx.audit(&stage_label, &am, labels));
    let point = ProfilePoint {
        stage_label,
        model_id: am.id(),
        train_fraction: ctx.train_fraction(labels.len()),
        train_size: ctx.seed_train_set().len() + labels.len(),
        wer: ctx.test_wer(&am)?,
    };
    info!("{}: wer {:.3} at fraction {:.3}", point.stage_label, point.wer, point.train_fraction);
    Ok((am, point))
}

/// Uncertainty sampling: each batch is the least-confident part of the
/// remaining pool, labeled by the oracle and added to the ground-truth
/// training set. Batch sizes follow the seed-model bins in increasing
/// confidence order, so the last batch exhausts the pool.
pub fn run_active_learning(ctx: &ProtocolContext<'_>, oracle: &mut Oracle) -> Result<ActiveOutput> {
    if oracle.len() != ctx.splits.d_u.len() {
        return Err(Error::Contract("oracle does not cover the unlabeled pool".into()));
    }
    let (seed_am, seed_wer) = ctx.seed_model()?;
    let seed_decode = ctx.seed_decode()?;
    let static_batches: Vec<Vec<String>> = assign_bins(seed_decode, &ctx.cfg.bins)?
        .into_iter()
        .rev()
        .filter(|b| !b.is_empty())
        .map(|b| b.members.into_iter().map(|m| m.utterance_id).collect())
        .collect();

    let mut remaining: Vec<String> = ctx.splits.d_u.iter().map(|u| u.id.clone()).collect();
    let mut labels: Labels = Vec::new();
    let mut points = vec![ctx.seed_point()?];
    let mut budgets = Vec::new();
    let mut audits = Vec::new();
    let mut model = seed_am.clone();
    for (i, batch) in static_batches.iter().enumerate() {
        let chosen: Vec<String> = match ctx.cfg.al.selection_mode {
            SelectionMode::StaticBins => batch.clone(),
            SelectionMode::Adaptive if batch.len() == remaining.len() => remaining.clone(),
            SelectionMode::Adaptive => {
                let decoded = if i == 0 {
                    seed_decode.clone()
                } else {
                    ctx.decode_pool_ids(&model, remaining.iter().map(String::as_str))?
                };
                let mut ranked: Vec<(f64, &String)> =
                    decoded.iter().map(|d| (d.confidence, &d.utterance_id)).collect();
                ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
                ranked.into_iter().take(batch.len()).map(|(_, id)| id.clone()).collect()
            }
        };
        let taken: std::collections::HashSet<&str> = chosen.iter().map(String::as_str).collect();
        let before = remaining.len();
        remaining.retain(|id| !taken.contains(id.as_str()));
        if before - remaining.len() != chosen.len() {
            return Err(Error::Contract("batch selects utterances outside the remaining pool".into()));
        }
        label_batch(oracle, &chosen, &mut labels)?;
        budgets.push(labels.len());
        let (am, point) = retrain_point(ctx, format!("al-{}", i + 1), &labels, &mut audits)?;
        points.push(point);
        model = am;
    }
    if !remaining.is_empty() {
        return Err(Error::invariant(
            "active-learning-coverage",
            format!("{} pool utterances were never selected", remaining.len()),
        ));
    }
    Ok(ActiveOutput {
        profile: WerProfile {
            protocol: "active".into(),
            points,
            seed_wer: *seed_wer,
            topline_wer: None,
        },
        budgets,
        final_model: model,
        audits,
    })
}

/// Same budgets as active learning, but each increment is drawn uniformly at
/// random from the remaining pool.
pub fn run_random_baseline(ctx: &ProtocolContext<'_>, oracle: &mut Oracle, budgets: &[usize]) -> Result<ActiveOutput> {
    let pool = ctx.splits.d_u.len();
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Contract("budgets must be non-decreasing".into()));
    }
    if let Some(&b) = budgets.iter().find(|&&b| b > pool) {
        return Err(Error::Contract(format!("budget {b} exceeds the pool of {pool}")));
    }
    let (seed_am, seed_wer) = ctx.seed_model()?;
    let mut order: Vec<String> = ctx.splits.d_u.iter().map(|u| u.id.clone()).collect();
    order.shuffle(&mut substream(ctx.master_seed, STREAM_RANDOM_BASELINE));

    let mut labels: Labels = Vec::new();
    let mut points = vec![ctx.seed_point()?];
    let mut audits = Vec::new();
    let mut model = seed_am.clone();
    for (i, &budget) in budgets.iter().enumerate() {
        let label = format!("random-{}", i + 1);
        if budget == 0 {
            let mut p = ctx.seed_point()?;
            p.stage_label = label;
            points.push(p);
            continue;
        }
        label_batch(oracle, &order[labels.len()..budget], &mut labels)?;
        let (am, point) = retrain_point(ctx, label, &labels, &mut audits)?;
        points.push(point);
        model = am;
    }
    Ok(ActiveOutput {
        profile: WerProfile {
            protocol: "random".into(),
            points,
            seed_wer: *seed_wer,
            topline_wer: None,
        },
        budgets: budgets.to_vec(),
        final_model: model,
        audits,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{run_topline, AlConfig};
    use super::*;
    use crate::corpus::SplitRatios;

    #[test]
    fn final_active_model_is_the_topline() {
        for mode in [SelectionMode::Adaptive, SelectionMode::StaticBins] {
            let mut f = fixture(21, 100, SplitRatios::default());
            let mut cfg = quick_config();
            cfg.al = AlConfig { selection_mode: mode };
            let ctx = ProtocolContext::new(&f.splits, &f.lexicon, &f.cfg, cfg, 21).unwrap();
            let (top_am, top) = run_topline(&ctx, &f.oracle).unwrap();
            let out = run_active_learning(&ctx, &mut f.oracle).unwrap();
            assert_eq!(out.final_model, top_am);
            assert_eq!(out.profile.last().unwrap().wer, top.wer);
            assert_eq!(*out.budgets.last().unwrap(), f.splits.d_u.len());
            assert_eq!(f.oracle.budget_used(), f.splits.d_u.len());
            assert!(out.audits.iter().all(|a| a.pool_decoded == 0));
        }
    }

    #[test]
    fn random_baseline_matches_budgets_and_anchors() {
        let mut f = fixture(22, 100, SplitRatios::default());
        let ctx = ProtocolContext::new(&f.splits, &f.lexicon, &f.cfg, quick_config(), 22).unwrap();
        let budgets = active_learning_budgets(&ctx).unwrap();
        let (top_am, _) = run_topline(&ctx, &f.oracle).unwrap();
        let out = run_random_baseline(&ctx, &mut f.oracle, &budgets).unwrap();
        assert_eq!(out.final_model, top_am);
        assert_eq!(out.profile.points.len(), budgets.len() + 1);

        let seed = ctx.seed_point().unwrap();
        let zero = run_random_baseline(&ctx, &mut f.oracle, &[0]).unwrap();
        assert_eq!(zero.profile.points[1].wer, seed.wer);
    }

    #[test]
    fn oversized_budget_is_rejected() {
        let mut f = fixture(23, 60, SplitRatios::default());
        let ctx = ProtocolContext::new(&f.splits, &f.lexicon, &f.cfg, quick_config(), 23).unwrap();
        let too_many = f.splits.d_u.len() + 1;
        assert!(matches!(
            run_random_baseline(&ctx, &mut f.oracle, &[too_many]),
            Err(Error::Contract(_))
        ));
    }
}

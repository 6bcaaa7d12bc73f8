//! Confidence binning partitions any decoded pool.

use std::collections::BTreeMap;

use confbin::decoder::{DecodedPool, DecodedUtterance, Hypothesis};
use confbin::eval::bin_histogram;
use confbin::protocols::{assign_bins, BinSpec, Interval};
use proptest::prelude::*;

fn pool(confidences: &[f64]) -> DecodedPool {
    let entries = confidences
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let id = format!("utt{i:06}");
            let best = Hypothesis { words: vec![0], score: -1.0 };
            let d = DecodedUtterance {
                utterance_id: id.clone(),
                best: best.clone(),
                nbest: vec![best],
                slot_posteriors: vec![c],
                confidence: c,
                decoder_model_id: "am-x".into(),
            };
            (id, d)
        })
        .collect::<BTreeMap<_, _>>();
    DecodedPool {
        entries,
        model_id: "am-x".into(),
        config_hash: "h".into(),
    }
}

fn spec_from_cuts(mut cuts: Vec<f64>) -> BinSpec {
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup();
    let mut hi = 1.0;
    let mut intervals = Vec::new();
    for c in cuts {
        intervals.push(Interval::new(c, hi));
        hi = c;
    }
    intervals.push(Interval::new(0.0, hi));
    BinSpec { intervals }
}

proptest! {
    #[test]
    fn bins_partition_the_pool(
        confidences in prop::collection::vec(prop_oneof![Just(1.0), 1e-9f64..1.0], 0..200),
        cuts in prop::collection::vec(0.01f64..0.99, 0..6),
    ) {
        let spec = spec_from_cuts(cuts);
        let decoded = pool(&confidences);
        let bins = assign_bins(&decoded, &spec).unwrap();
        prop_assert_eq!(bins.len(), spec.len());
        let mut seen = std::collections::BTreeSet::new();
        for (b, iv) in bins.iter().zip(&spec.intervals) {
            prop_assert_eq!(b.interval, *iv);
            for m in &b.members {
                prop_assert!(m.confidence > iv.lo && m.confidence <= iv.hi);
                prop_assert!(seen.insert(m.utterance_id.clone()));
            }
            prop_assert!(b.members.windows(2).all(|w| w[0].utterance_id < w[1].utterance_id));
        }
        prop_assert_eq!(seen.len(), confidences.len());
        let h = bin_histogram(&bins, decoded.len(), "am-x", 0).unwrap();
        prop_assert_eq!(h.total(), confidences.len());
        prop_assert!(bin_histogram(&bins, decoded.len() + 1, "am-x", 0).is_err());
    }
}

//! Scoring and posterior routines against independent brute-force versions.

use confbin::corpus::WordId;
use confbin::decoder::{word_posteriors, Hypothesis};
use confbin::eval::edit_distance;
use proptest::prelude::*;

fn all_sequences(max_len: usize, alphabet: WordId) -> Vec<Vec<WordId>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for w in 0..alphabet {
                let mut t: Vec<WordId> = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Levenshtein distance straight from its recursive definition.
fn recursive_distance(a: &[WordId], b: &[WordId]) -> usize {
    match (a.split_last(), b.split_last()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                return recursive_distance(ra, rb);
            }
            1 + recursive_distance(ra, rb)
                .min(recursive_distance(a, rb))
                .min(recursive_distance(ra, b))
        }
    }
}

#[test]
fn edit_distance_matches_recursion_on_all_short_pairs() {
    let seqs = all_sequences(6, 3);
    assert_eq!(seqs.len(), 1093);
    for r in &seqs {
        for h in &seqs {
            let c = edit_distance(r, h);
            assert_eq!(c.errors(), recursive_distance(r, h), "{r:?} vs {h:?}");
            assert_eq!(c.ref_len, r.len());
            assert_eq!(h.len() + c.deletions, r.len() + c.insertions, "{r:?} vs {h:?}");
        }
    }
}

#[derive(Debug, Clone)]
enum Variant {
    Substitute(usize, WordId),
    Delete(usize),
}

fn nbest_case() -> impl Strategy<Value = (Vec<WordId>, Vec<(Variant, f64)>, f64)> {
    (2usize..7)
        .prop_flat_map(|len| {
            let best = prop::collection::vec(0u32..5, len).prop_filter("no adjacent repeats", |b| b.windows(2).all(|w| w[0] != w[1]));
            let variant = prop_oneof![
                (0..len, 0u32..5).prop_map(|(i, w)| Variant::Substitute(i, w)),
                (0..len).prop_map(Variant::Delete),
            ];
            let others = prop::collection::vec((variant, 0.1f64..30.0), 0..6);
            (best, others, 0.5f64..10.0)
        })
}

fn apply(best: &[WordId], v: &Variant) -> Option<Vec<WordId>> {
    let mut w = best.to_vec();
    match *v {
        Variant::Substitute(i, x) => {
            if w[i] == x {
                return None;
            }
            w[i] = x;
        }
        Variant::Delete(i) => {
            w.remove(i);
        }
    }
    Some(w)
}

proptest! {
    #[test]
    fn posteriors_equal_hand_normalized_weights((best, variants, scale) in nbest_case()) {
        let top = -50.0;
        let mut list = vec![Hypothesis { words: best.clone(), score: top }];
        let mut changed: Vec<Option<usize>> = vec![None];
        for (v, gap) in &variants {
            let Some(words) = apply(&best, v) else { continue };
            if list.iter().any(|h| h.words == words) {
                continue;
            }
            list.push(Hypothesis { words, score: top - gap });
            changed.push(Some(match *v { Variant::Substitute(i, _) | Variant::Delete(i) => i }));
        }
        let weights: Vec<f64> = list.iter().map(|h| ((h.score - top) / scale).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut want = vec![1.0; best.len()];
        for (w, c) in weights.iter().zip(&changed) {
            if let Some(i) = c {
                want[*i] -= w / total;
            }
        }
        let got = word_posteriors(&list, scale).unwrap();
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-6, "got {:?}, want {:?}", got, want);
        }
        list.reverse();
        prop_assert_eq!(word_posteriors(&list, scale).unwrap(), got);
    }

    #[test]
    fn posteriors_lie_in_the_unit_interval(
        hyps in prop::collection::vec((prop::collection::vec(0u32..4, 0..6), -100.0f64..0.0), 1..8),
        scale in 0.1f64..20.0,
    ) {
        let list: Vec<Hypothesis> = hyps.into_iter().map(|(words, score)| Hypothesis { words, score }).collect();
        let p = word_posteriors(&list, scale).unwrap();
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn edit_distance_is_a_metric(
        a in prop::collection::vec(0u32..4, 0..9),
        b in prop::collection::vec(0u32..4, 0..9),
        c in prop::collection::vec(0u32..4, 0..9),
    ) {
        let d = |x: &[WordId], y: &[WordId]| edit_distance(x, y).errors();
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) >= a.len().abs_diff(b.len()));
    }
}
